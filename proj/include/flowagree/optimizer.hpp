#pragma once

#include "flowagree/cost.hpp"
#include "flowagree/graph.hpp"

#include <Eigen/Dense>

namespace flowagree {

/// Primal/dual pair of the static optimal distribution problem
///   min P(lambda)  s.t.  B lambda + supply = 0.
struct KktPoint {
  Eigen::VectorXd lambda;  // optimal flow
  Eigen::VectorXd zeta;    // node potentials, normalized to 1^T zeta = 0
  Eigen::VectorXd supply;
  int iterations = 0;
};

struct KktResidual {
  double stationarity;  // |grad P(lambda) - B^T zeta|_inf
  double feasibility;   // |B lambda + supply|_inf
};

/// Solves the static problem. Quadratic costs use the weighted Laplacian
/// pseudoinverse; other costs run damped Newton on the dual residual
/// g(zeta) = B grad P^-1(B^T zeta) + supply inside the hyperplane 1^T zeta = 0.
KktPoint solve_static(const Graph& graph, const CostFunction& cost,
                      const Eigen::VectorXd& supply);

KktResidual kkt_residual(const KktPoint& point, const Graph& graph,
                         const CostFunction& cost);

/// |B lambda + P w|_2 + |proj_circulation(grad P(lambda))|_2; zero iff the
/// pair (lambda, w) is an optimal routing/supply pair.
double gamma_distance(const Eigen::VectorXd& lambda, const Eigen::VectorXd& w,
                      const Graph& graph, const CostFunction& cost,
                      const Eigen::MatrixXd& P);

/// |B grad P^-1(B^T zeta) + P w|_2.
double gamma_d_residual(const Eigen::VectorXd& zeta, const Eigen::VectorXd& w,
                        const Graph& graph, const CostFunction& cost,
                        const Eigen::MatrixXd& P);

/// Dual objective -P*(B^T zeta) - zeta^T supply (maximized by the optimal zeta).
double dual_value(const Eigen::VectorXd& zeta, const Graph& graph,
                  const CostFunction& cost, const Eigen::VectorXd& supply);

struct ProjectedGradientOptions {
  long steps = 100000;
  double rate = 0.0;  // <= 0 selects 0.1 / max_k (b_k + 3 a_k bound^2)
};

/// Independent primal reference: projected gradient descent on the affine set
/// {lambda : B lambda + supply = 0}, started at the least-squares flow
/// -B^+ supply. Shares no code path with solve_static.
Eigen::VectorXd oracle_projected_gradient(const Graph& graph, const CostFunction& cost,
                                          const Eigen::VectorXd& supply,
                                          const ProjectedGradientOptions& options = {});

}  // namespace flowagree
