#include "flowagree/cost.hpp"

#include "flowagree/errors.hpp"

#include <cmath>
#include <string>

namespace flowagree {

using Eigen::VectorXd;

CostFunction::CostFunction(Kind kind, VectorXd a, VectorXd b)
    : kind_(kind), a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() != b_.size()) {
    throw DimensionError("quartic and quadratic cost coefficients differ in length");
  }
  for (Eigen::Index k = 0; k < b_.size(); ++k) {
    if (!(b_(k) > 0.0)) {
      throw InvalidWeightsError("quadratic cost coefficient of edge " +
                                std::to_string(k + 1) + " must be > 0");
    }
    if (!(a_(k) >= 0.0)) {
      throw InvalidWeightsError("quartic cost coefficient of edge " +
                                std::to_string(k + 1) + " must be >= 0");
    }
  }
}

CostFunction CostFunction::quadratic(VectorXd q) {
  VectorXd a = VectorXd::Zero(q.size());
  return CostFunction(Kind::Quadratic, std::move(a), std::move(q));
}

CostFunction CostFunction::quartic(VectorXd a, VectorXd b) {
  return CostFunction(Kind::Quartic, std::move(a), std::move(b));
}

void CostFunction::check_size(const VectorXd& v) const {
  if (v.size() != edge_count()) {
    throw DimensionError("cost expects " + std::to_string(edge_count()) +
                         " edges, got a vector of length " + std::to_string(v.size()));
  }
}

double CostFunction::value(const VectorXd& lambda) const {
  check_size(lambda);
  const auto l2 = lambda.array().square();
  return (0.25 * a_.array() * l2.square() + 0.5 * b_.array() * l2).sum();
}

VectorXd CostFunction::gradient(const VectorXd& lambda) const {
  check_size(lambda);
  return (a_.array() * lambda.array().cube() + b_.array() * lambda.array()).matrix();
}

VectorXd CostFunction::hessian_diagonal(const VectorXd& lambda) const {
  check_size(lambda);
  return (3.0 * a_.array() * lambda.array().square() + b_.array()).matrix();
}

double CostFunction::inverse_gradient_scalar(int k, double sigma) const {
  const double a = a_(k);
  const double b = b_(k);
  if (a == 0.0) return sigma / b;
  // g(l) = a l^3 + b l - sigma is strictly increasing; since |g(l) + sigma|
  // >= b |l| the root lies in [-|sigma|/b, |sigma|/b].
  double lo = -std::abs(sigma) / b - 1.0;
  double hi = std::abs(sigma) / b + 1.0;
  double l = sigma / b;
  for (int it = 0; it < 200; ++it) {
    const double g = a * l * l * l + b * l - sigma;
    if (g == 0.0) return l;
    if (g > 0.0) {
      hi = l;
    } else {
      lo = l;
    }
    const double step = g / (3.0 * a * l * l + b);
    double next = l - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - l) <= 1e-12 * std::max(1.0, std::abs(l))) {
      // One more Newton step to land on machine precision.
      const double gn = a * next * next * next + b * next - sigma;
      return next - gn / (3.0 * a * next * next + b);
    }
    l = next;
  }
  return l;
}

VectorXd CostFunction::inverse_gradient(const VectorXd& sigma) const {
  check_size(sigma);
  VectorXd lambda(sigma.size());
  for (Eigen::Index k = 0; k < sigma.size(); ++k) {
    lambda(k) = inverse_gradient_scalar(static_cast<int>(k), sigma(k));
  }
  return lambda;
}

double CostFunction::conjugate(const VectorXd& sigma) const {
  const VectorXd lambda = inverse_gradient(sigma);
  return sigma.dot(lambda) - value(lambda);
}

double CostFunction::bregman_distance(const VectorXd& sigma, const VectorXd& sigma_ref) const {
  check_size(sigma);
  check_size(sigma_ref);
  if (is_quadratic()) {
    return 0.5 * ((sigma - sigma_ref).array().square() / b_.array()).sum();
  }
  const VectorXd lambda_ref = inverse_gradient(sigma_ref);
  return conjugate(sigma) - conjugate(sigma_ref) - lambda_ref.dot(sigma - sigma_ref);
}

}  // namespace flowagree
