#include "flowagree/optimizer.hpp"

#include "flowagree/errors.hpp"

#include <cmath>
#include <string>

namespace flowagree {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_problem(const Graph& graph, const CostFunction& cost, const VectorXd& supply) {
  if (supply.size() != graph.node_count()) {
    throw DimensionError("supply has length " + std::to_string(supply.size()) +
                         ", graph has " + std::to_string(graph.node_count()) + " nodes");
  }
  if (cost.edge_count() != graph.edge_count()) {
    throw DimensionError("cost has " + std::to_string(cost.edge_count()) +
                         " edges, graph has " + std::to_string(graph.edge_count()));
  }
  const double imbalance = std::abs(supply.sum());
  if (imbalance > 1e-10 * std::max(1.0, supply.cwiseAbs().maxCoeff())) {
    throw InfeasibleError("supply not balanced: 1^T supply = " + std::to_string(supply.sum()));
  }
  if (!graph.is_connected()) {
    throw RankDeficiencyError("static problem needs a connected graph");
  }
}

KktPoint solve_quadratic(const Graph& graph, const CostFunction& cost, const VectorXd& supply) {
  const WeightedLaplacian laplacian = weighted_laplacian(graph, cost.quadratic_weights());
  const VectorXd zeta = -(laplacian_pinv(laplacian) * supply);
  VectorXd lambda = cost.quadratic_weights().cwiseInverse().asDiagonal() *
                    (graph.incidence().transpose() * zeta);
  return {std::move(lambda), zeta, supply, 0};
}

KktPoint solve_dual_newton(const Graph& graph, const CostFunction& cost, const VectorXd& supply) {
  const MatrixXd& B = graph.incidence();
  const int n = graph.node_count();
  const double scale = std::max(1.0, supply.cwiseAbs().maxCoeff());
  const double tolerance = 1e-12 * scale;
  const MatrixXd centering = MatrixXd::Constant(n, n, 1.0 / n);

  // Warm start from the quadratic part of the cost.
  VectorXd zeta = solve_quadratic(graph, CostFunction::quadratic(cost.quadratic_weights()),
                                  supply).zeta;
  auto residual_at = [&](const VectorXd& z, VectorXd& lambda) {
    lambda = cost.inverse_gradient(B.transpose() * z);
    return VectorXd(B * lambda + supply);
  };

  VectorXd lambda;
  VectorXd g = residual_at(zeta, lambda);
  for (int it = 0; it < 200; ++it) {
    if (g.cwiseAbs().maxCoeff() <= tolerance) {
      return {lambda, zeta, supply, it};
    }
    // Jacobian of g is B diag(1 / P''(lambda)) B^T; adding 11^T/n removes the
    // constant-shift null direction without changing the step on 1^perp.
    const VectorXd curvature = cost.hessian_diagonal(lambda).cwiseInverse();
    const MatrixXd jacobian = B * curvature.asDiagonal() * B.transpose() + centering;
    VectorXd step = -jacobian.ldlt().solve(g);
    step.array() -= step.mean();

    const double merit = g.norm();
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      VectorXd trial_lambda;
      const VectorXd trial_zeta = zeta + t * step;
      const VectorXd trial_g = residual_at(trial_zeta, trial_lambda);
      if (trial_g.norm() <= (1.0 - 1e-4 * t) * merit) {
        zeta = trial_zeta;
        lambda = std::move(trial_lambda);
        g = trial_g;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Line search stalls only at the round-off floor of the residual.
      if (g.cwiseAbs().maxCoeff() <= 1e-10 * scale) return {lambda, zeta, supply, it};
      throw ConvergenceError("dual Newton line search failed at iteration " +
                             std::to_string(it) + ", residual " +
                             std::to_string(g.cwiseAbs().maxCoeff()));
    }
  }
  if (g.cwiseAbs().maxCoeff() <= tolerance) return {lambda, zeta, supply, 200};
  throw ConvergenceError("dual Newton did not converge in 200 iterations");
}

}  // namespace

KktPoint solve_static(const Graph& graph, const CostFunction& cost, const VectorXd& supply) {
  check_problem(graph, cost, supply);
  if (graph.edge_count() == 0) {
    return {VectorXd::Zero(0), VectorXd::Zero(graph.node_count()), supply, 0};
  }
  if (cost.is_quadratic()) return solve_quadratic(graph, cost, supply);
  return solve_dual_newton(graph, cost, supply);
}

KktResidual kkt_residual(const KktPoint& point, const Graph& graph, const CostFunction& cost) {
  const MatrixXd& B = graph.incidence();
  const VectorXd stationarity = cost.gradient(point.lambda) - B.transpose() * point.zeta;
  const VectorXd feasibility = B * point.lambda + point.supply;
  auto inf_norm = [](const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  return {inf_norm(stationarity), inf_norm(feasibility)};
}

double gamma_distance(const VectorXd& lambda, const VectorXd& w, const Graph& graph,
                      const CostFunction& cost, const MatrixXd& P) {
  const double feasibility = (graph.incidence() * lambda + P * w).norm();
  const double optimality = project_circulation(graph, cost.gradient(lambda)).norm();
  return feasibility + optimality;
}

double gamma_d_residual(const VectorXd& zeta, const VectorXd& w, const Graph& graph,
                        const CostFunction& cost, const MatrixXd& P) {
  const MatrixXd& B = graph.incidence();
  return (B * cost.inverse_gradient(B.transpose() * zeta) + P * w).norm();
}

double dual_value(const VectorXd& zeta, const Graph& graph, const CostFunction& cost,
                  const VectorXd& supply) {
  return -cost.conjugate(graph.incidence().transpose() * zeta) - zeta.dot(supply);
}

VectorXd oracle_projected_gradient(const Graph& graph, const CostFunction& cost,
                                   const VectorXd& supply,
                                   const ProjectedGradientOptions& options) {
  check_problem(graph, cost, supply);
  const int m = graph.edge_count();
  if (m == 0) return VectorXd::Zero(0);
  const MatrixXd& B = graph.incidence();
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(B);
  const MatrixXd B_pinv = cod.pseudoInverse();
  VectorXd lambda = -(B_pinv * supply);
  const MatrixXd null_projector = MatrixXd::Identity(m, m) - B_pinv * B;
  if (null_projector.cwiseAbs().maxCoeff() < 1e-12) return lambda;  // tree

  double rate = options.rate;
  if (rate <= 0.0) {
    // Every iterate stays in the sublevel set {P <= P(lambda_0)}, on which
    // |lambda_k| <= sqrt(2 P(lambda_0) / b_k); this bounds the curvature.
    const double level = cost.value(lambda);
    const VectorXd& a = cost.quartic_weights();
    const VectorXd& b = cost.quadratic_weights();
    double curvature = 0.0;
    for (int k = 0; k < m; ++k) {
      const double bound = std::sqrt(2.0 * level / b(k));
      curvature = std::max(curvature, b(k) + 3.0 * a(k) * bound * bound);
    }
    rate = 0.1 / curvature;
  }

  double value = cost.value(lambda);
  for (long step = 0; step < options.steps; ++step) {
    const VectorXd direction = null_projector * cost.gradient(lambda);
    if (direction.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, lambda.cwiseAbs().maxCoeff())) {
      break;
    }
    lambda -= rate * direction;
    const double next = cost.value(lambda);
    if (next > value + 1e-12 * (1.0 + std::abs(value))) {
      throw OracleError("projected gradient diverged at step " + std::to_string(step) +
                        " (cost increased); reduce the rate");
    }
    value = next;
  }
  return lambda;
}

}  // namespace flowagree
