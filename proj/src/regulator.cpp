#include "flowagree/regulator.hpp"

#include "flowagree/errors.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <sstream>

namespace flowagree {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double inf_norm(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

void check_dims(const MatrixXd& A, const MatrixXd& G, const MatrixXd& C, const MatrixXd* P,
                const MatrixXd& S, const Graph& graph, int p) {
  const Eigen::Index N = A.rows();
  const Eigen::Index np = static_cast<Eigen::Index>(graph.node_count()) * p;
  if (A.cols() != N) throw DimensionError("A must be square");
  if (G.rows() != N || G.cols() != np) throw DimensionError("G must be state_dim x n p");
  if (C.rows() != np || C.cols() != N) throw DimensionError("C must be n p x state_dim");
  if (S.rows() != S.cols()) throw DimensionError("S must be square");
  if (P != nullptr && (P->rows() != N || P->cols() != S.rows())) {
    throw DimensionError("P must be state_dim x q");
  }
  if (N > 200) throw DimensionError("regulator solve is limited to state dimension 200");
}

struct VectorizedSolution {
  MatrixXd Pi;
  MatrixXd input;  // Gamma, or the flow map when input_map is G (B (x) I_p)
  double residual;
};

// Solves Pi S - A Pi - G_in X = P, D Pi = 0 for (Pi, X), minimum norm.
VectorizedSolution solve_vectorized(const MatrixXd& A, const MatrixXd& G_in, const MatrixXd& D,
                                    const MatrixXd& P, const MatrixXd& S) {
  const Eigen::Index N = A.rows();
  const Eigen::Index q = S.rows();
  const Eigen::Index k = G_in.cols();
  const Eigen::Index d = D.rows();
  const MatrixXd Iq = MatrixXd::Identity(q, q);
  const MatrixXd IN = MatrixXd::Identity(N, N);

  MatrixXd system = MatrixXd::Zero(N * q + d * q, N * q + k * q);
  system.topLeftCorner(N * q, N * q) =
      Eigen::kroneckerProduct(S.transpose(), IN) - Eigen::kroneckerProduct(Iq, A);
  system.topRightCorner(N * q, k * q) = -Eigen::kroneckerProduct(Iq, G_in);
  if (d > 0) system.bottomLeftCorner(d * q, N * q) = Eigen::kroneckerProduct(Iq, D);

  VectorXd rhs = VectorXd::Zero(system.rows());
  rhs.head(N * q) = Eigen::Map<const VectorXd>(P.data(), N * q);

  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(system);
  const VectorXd solution = cod.solve(rhs);
  VectorizedSolution out;
  out.Pi = Eigen::Map<const MatrixXd>(solution.data(), N, q);
  out.input = Eigen::Map<const MatrixXd>(solution.data() + N * q, k, q);
  out.residual = (system * solution - rhs).cwiseAbs().maxCoeff();
  return out;
}

std::string describe(const RankFeasibility& rank) {
  std::ostringstream os;
  if (rank.feasible) {
    os << "rank condition holds";
  } else {
    os << "rank condition fails at eigenvalue(s)";
    for (const auto& mu : rank.failing) os << " " << mu.real() << (mu.imag() < 0 ? "" : "+") << mu.imag() << "i";
  }
  return os.str();
}

}  // namespace

RegulatorResiduals regulator_residuals(const MatrixXd& A, const MatrixXd& G, const MatrixXd& C,
                                       const MatrixXd& P, const MatrixXd& S, const Graph& graph,
                                       int p, const MatrixXd& Pi, const MatrixXd& Gamma) {
  check_dims(A, G, C, &P, S, graph, p);
  const MatrixXd D = kron_identity(graph.incidence(), p).transpose() * C;
  return {inf_norm(Pi * S - A * Pi - G * Gamma - P), inf_norm(D * Pi)};
}

RankFeasibility rank_feasibility(const MatrixXd& A, const MatrixXd& G, const MatrixXd& C,
                                 const MatrixXd& S, const Graph& graph, int p) {
  check_dims(A, G, C, nullptr, S, graph, p);
  const Eigen::Index N = A.rows();
  const Eigen::Index k = G.cols();

  // Orthonormal basis of the row space of (B (x) I_p)^T C.
  const MatrixXd D_full = kron_identity(graph.incidence(), p).transpose() * C;
  MatrixXd D(0, N);
  if (D_full.size() > 0) {
    Eigen::JacobiSVD<MatrixXd> svd(D_full, Eigen::ComputeFullV);
    const VectorXd& sv = svd.singularValues();
    const double cutoff = 1e-9 * std::max(sv.size() ? sv(0) : 0.0, 1e-300);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > cutoff) ++rank;
    D = svd.matrixV().leftCols(rank).transpose();
  }

  RankFeasibility report;
  const Eigen::VectorXcd eigenvalues = Eigen::EigenSolver<MatrixXd>(S).eigenvalues();
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const auto mu = eigenvalues(i);
    bool seen = false;
    for (const auto& prev : report.checked) seen = seen || std::abs(prev - mu) < 1e-9;
    if (!seen) report.checked.push_back(mu);
  }
  for (const auto& mu : report.checked) {
    const Eigen::Index rows = N + D.rows();
    const Eigen::Index cols = N + k;
    MatrixXcd block = MatrixXcd::Zero(rows, cols);
    block.topLeftCorner(N, N) = A.cast<std::complex<double>>() -
                                mu * MatrixXcd::Identity(N, N);
    block.topRightCorner(N, k) = G.cast<std::complex<double>>();
    block.bottomLeftCorner(D.rows(), N) = D.cast<std::complex<double>>();
    bool full_row_rank = rows <= cols;
    if (full_row_rank && rows > 0) {
      const Eigen::VectorXd sv = Eigen::JacobiSVD<MatrixXcd>(block).singularValues();
      full_row_rank = sv(rows - 1) > 1e-9 * sv(0);
    }
    if (!full_row_rank) {
      report.feasible = false;
      report.failing.push_back(mu);
    }
  }
  return report;
}

RegulatorSolution solve_sylvester(const MatrixXd& A, const MatrixXd& G, const MatrixXd& C,
                                  const MatrixXd& P, const MatrixXd& S, const Graph& graph,
                                  int p) {
  check_dims(A, G, C, &P, S, graph, p);
  const MatrixXd lift = kron_identity(graph.incidence(), p);
  const MatrixXd D = lift.transpose() * C;
  const double tolerance = 1e-9 * std::max(1.0, inf_norm(P));

  const VectorizedSolution plain = solve_vectorized(A, G, D, P, S);
  if (plain.residual > tolerance) {
    throw InfeasibleError("regulator equations have no solution (residual " +
                          std::to_string(plain.residual) + "); " +
                          describe(rank_feasibility(A, G, C, S, graph, p)));
  }

  const MatrixXd lift_pinv = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(lift).pseudoInverse();
  RegulatorSolution solution;
  solution.Pi = plain.Pi;
  solution.Gamma = plain.input;
  solution.H = lift_pinv * solution.Gamma;
  solution.flow_residual = inf_norm(lift * solution.H - solution.Gamma);

  if (solution.flow_residual > tolerance) {
    // The feedforward input must be produced by edge flows: restrict Gamma to
    // the range of B (x) I_p and solve for (Pi, H) directly.
    const VectorizedSolution routed = solve_vectorized(A, G * lift, D, P, S);
    if (routed.residual <= tolerance) {
      solution.Pi = routed.Pi;
      solution.H = lift_pinv * (lift * routed.input);
      solution.Gamma = lift * solution.H;
      solution.flow_residual = inf_norm(lift * solution.H - solution.Gamma);
      solution.flow_constrained = true;
    }
  }
  const auto residuals = regulator_residuals(A, G, C, P, S, graph, p, solution.Pi, solution.Gamma);
  solution.sylvester_residual = residuals.sylvester;
  solution.agreement_residual = residuals.agreement;
  return solution;
}

FeedforwardMaps compute_H(const Graph& graph, const VectorXd& weights, const MatrixXd& P) {
  if (P.rows() != graph.node_count()) {
    throw DimensionError("supply matrix must have one row per node");
  }
  const double imbalance = P.cols() ? P.colwise().sum().cwiseAbs().maxCoeff() : 0.0;
  if (imbalance > 1e-10 * std::max(1.0, inf_norm(P))) {
    throw PreconditionError("supply not balanced: 1^T P != 0");
  }
  const WeightedLaplacian laplacian = weighted_laplacian(graph, weights);
  FeedforwardMaps maps;
  maps.dual = -(laplacian_pinv(laplacian) * P);
  maps.flow = weights.cwiseInverse().asDiagonal() * (graph.incidence().transpose() * maps.dual);
  return maps;
}

double verify_steady_state(const Graph& graph, const MatrixXd& H_flow, const MatrixXd& S,
                           const MatrixXd& P, const VectorXd& w0, double horizon, int samples) {
  const MatrixXd& B = graph.incidence();
  if (H_flow.rows() != B.cols() || H_flow.cols() != S.rows() || P.cols() != S.rows() ||
      w0.size() != S.rows()) {
    throw DimensionError("verify_steady_state: inconsistent dimensions");
  }
  const MatrixXd map = B * H_flow + P;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = samples > 1 ? horizon * i / (samples - 1) : 0.0;
    const MatrixXd St = S * t;
    const VectorXd w = MatrixXd(St.exp()) * w0;
    worst = std::max(worst, (map * w).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace flowagree
