#pragma once

#include <Eigen/Dense>

namespace flowagree {

/// Separable, strictly convex edge cost P(lambda) = sum_k P_k(lambda_k).
///
/// Quadratic:  P_k = q_k lambda^2 / 2,                 q_k > 0
/// Quartic:    P_k = a_k lambda^4 / 4 + b_k lambda^2 / 2, a_k >= 0, b_k > 0
///
/// Quadratic is the quartic family with a = 0 and b = q, but is kept as its
/// own variant since it admits closed-form inverses and the Laplacian route.
class CostFunction {
 public:
  enum class Kind { Quadratic, Quartic };

  static CostFunction quadratic(Eigen::VectorXd q);
  static CostFunction quartic(Eigen::VectorXd a, Eigen::VectorXd b);

  Kind kind() const { return kind_; }
  bool is_quadratic() const { return kind_ == Kind::Quadratic; }
  int edge_count() const { return static_cast<int>(b_.size()); }

  /// q_k for quadratic costs (b_k for quartic).
  const Eigen::VectorXd& quadratic_weights() const { return b_; }
  const Eigen::VectorXd& quartic_weights() const { return a_; }

  double value(const Eigen::VectorXd& lambda) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& lambda) const;
  Eigen::VectorXd hessian_diagonal(const Eigen::VectorXd& lambda) const;

  /// Componentwise inverse of the gradient map.
  Eigen::VectorXd inverse_gradient(const Eigen::VectorXd& sigma) const;

  /// Convex conjugate P*(sigma) = sum_k sup_l (sigma_k l - P_k(l)).
  double conjugate(const Eigen::VectorXd& sigma) const;

  /// Bregman distance of the conjugate between sigma and sigma_ref.
  double bregman_distance(const Eigen::VectorXd& sigma,
                          const Eigen::VectorXd& sigma_ref) const;

 private:
  CostFunction(Kind kind, Eigen::VectorXd a, Eigen::VectorXd b);
  double inverse_gradient_scalar(int k, double sigma) const;
  void check_size(const Eigen::VectorXd& v) const;

  Kind kind_;
  Eigen::VectorXd a_;
  Eigen::VectorXd b_;
};

}  // namespace flowagree
