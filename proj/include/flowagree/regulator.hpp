#pragma once

#include "flowagree/graph.hpp"

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace flowagree {

/// Linear steady-state maps x^w = Pi w, u^w = Gamma w, lambda^w = H w.
struct RegulatorSolution {
  Eigen::MatrixXd Pi;     // state_dim x q
  Eigen::MatrixXd Gamma;  // n p x q
  Eigen::MatrixXd H;      // m p x q, minimum-norm solution of (B (x) I_p) H = Gamma
  double sylvester_residual = 0.0;  // |Pi S - A Pi - G Gamma - P|_inf
  double agreement_residual = 0.0;  // |(B (x) I_p)^T C Pi|_inf
  double flow_residual = 0.0;       // |(B (x) I_p) H - Gamma|_inf
  // True when the minimum-norm Gamma was not a network input and the system
  // was re-solved with Gamma restricted to the range of B (x) I_p.
  bool flow_constrained = false;
};

struct RegulatorResiduals {
  double sylvester;
  double agreement;
};

/// Residuals of Pi S = A Pi + G Gamma + P and (B (x) I_p)^T C Pi = 0.
RegulatorResiduals regulator_residuals(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G,
                                       const Eigen::MatrixXd& C, const Eigen::MatrixXd& P,
                                       const Eigen::MatrixXd& S, const Graph& graph, int p,
                                       const Eigen::MatrixXd& Pi, const Eigen::MatrixXd& Gamma);

/// Solves the regulator equations by vectorization (minimum-norm solution),
/// then H by pseudoinverse. Throws InfeasibleError with the rank diagnosis
/// when the equations have no solution; state dimension is capped at 200.
RegulatorSolution solve_sylvester(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G,
                                  const Eigen::MatrixXd& C, const Eigen::MatrixXd& P,
                                  const Eigen::MatrixXd& S, const Graph& graph, int p = 1);

struct RankFeasibility {
  bool feasible = true;
  std::vector<std::complex<double>> checked;  // distinct eigenvalues of S
  std::vector<std::complex<double>> failing;
};

/// For each distinct eigenvalue mu of S, checks that
///   [A - mu I, G; D, 0]
/// has full row rank, where D spans the row space of (B (x) I_p)^T C. Rows of
/// (B (x) I_p)^T C that are linearly dependent (cycles in the graph) impose no
/// extra constraint and are removed first.
RankFeasibility rank_feasibility(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G,
                                 const Eigen::MatrixXd& C, const Eigen::MatrixXd& S,
                                 const Graph& graph, int p = 1);

struct FeedforwardMaps {
  Eigen::MatrixXd dual;  // n x q:  -L_Q^+ P
  Eigen::MatrixXd flow;  // m x q:  Q^-1 B^T dual
};

/// Feedforward maps for the inventory network with edge weights Q.
FeedforwardMaps compute_H(const Graph& graph, const Eigen::VectorXd& weights,
                          const Eigen::MatrixXd& P);

/// sup over sampled t in [0, horizon] of |B H w(t) + P w(t)|_inf with
/// w(t) = exp(S t) w0.
double verify_steady_state(const Graph& graph, const Eigen::MatrixXd& H_flow,
                           const Eigen::MatrixXd& S, const Eigen::MatrixXd& P,
                           const Eigen::VectorXd& w0, double horizon, int samples = 1001);

}  // namespace flowagree
