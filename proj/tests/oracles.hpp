#pragma once

// Reference computations used only by the tests. None of these call the
// library routine they are checked against.

#include "flowagree/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Pseudoinverse of the unit-weight Laplacian of the complete graph K3,
// derived by hand: L = 3I - J, so L^+ = (I - J/3) / 3.
inline MatrixXd k3_laplacian_pinv() {
  return (MatrixXd::Identity(3, 3) - MatrixXd::Constant(3, 3, 1.0 / 3.0)) / 3.0;
}

// Optimal flow on the oriented 3-ring 1->2->3->1, unit quadratic cost,
// supply (1, -1, 0). The balance constraint leaves one free circulation c:
// lambda = (c - 1, c, c); minimizing |lambda|^2 gives c = 1/3.
inline VectorXd ring3_unit_flow() {
  VectorXd lambda(3);
  lambda << -2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
  return lambda;
}

// exp(A) by scaling and squaring of a truncated Taylor series.
inline MatrixXd expm(const MatrixXd& A) {
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  const MatrixXd X = A / std::pow(2.0, squarings);
  MatrixXd term = MatrixXd::Identity(A.rows(), A.cols());
  MatrixXd sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * X / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// Quadratic-cost KKT system solved as one dense saddle-point system:
//   [diag(q)  -B^T  0] [lambda]   [0]
//   [B          0   0] [zeta  ] = [-s]
//   [0        1^T   0]            [0]
// (last row pins the additive constant of zeta). Returns lambda.
inline VectorXd quadratic_kkt_flow(const MatrixXd& B, const VectorXd& q, const VectorXd& s) {
  const Eigen::Index n = B.rows();
  const Eigen::Index m = B.cols();
  MatrixXd K = MatrixXd::Zero(m + n + 1, m + n);
  K.topLeftCorner(m, m) = q.asDiagonal();
  K.block(0, m, m, n) = -B.transpose();
  K.block(m, 0, n, m) = B;
  K.block(m + n, m, 1, n) = Eigen::RowVectorXd::Ones(n);
  VectorXd rhs = VectorXd::Zero(m + n + 1);
  rhs.segment(m, n) = -s;
  const VectorXd sol = K.colPivHouseholderQr().solve(rhs);
  return sol.head(m);
}

// sup over l of (sigma l - f(l)) for a strictly convex scalar f, by golden
// section search on [-R, R].
inline double scalar_conjugate(const std::function<double(double)>& f, double sigma,
                               double R = 50.0) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -R, b = R;
  auto g = [&](double l) { return sigma * l - f(l); };
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int i = 0; i < 400; ++i) {
    if (g(c) > g(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return g(0.5 * (a + b));
}

// Random connected graph: a random spanning tree plus extra random edges.
inline flowagree::Graph random_connected_graph(std::mt19937_64& rng, int n, double extra_prob) {
  std::vector<flowagree::Edge> edges;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    const int j = parent(rng);
    if (unit(rng) < 0.5) {
      edges.push_back({i, j});
    } else {
      edges.push_back({j, i});
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (unit(rng) < extra_prob) edges.push_back({i, j});
    }
  }
  return flowagree::Graph(n, edges);
}

// Random vector with zero sum.
inline VectorXd balanced_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd s(n);
  for (int i = 0; i < n; ++i) s(i) = normal(rng);
  return s.array() - s.mean();
}

inline VectorXd normal_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

// Central difference of a scalar function along a direction.
inline double directional_derivative(const std::function<double(const VectorXd&)>& f,
                                     const VectorXd& x, const VectorXd& dir, double h = 1e-6) {
  return (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
}

}  // namespace oracle
