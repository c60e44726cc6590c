#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace flowagree {

/// Axis-aligned box used as the compact set of admissible initial conditions.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box uniform(int dim, double lower, double upper);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& point) const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
};

enum class ExosystemKind { LinearSkew, GradientConcave, Constant };

const char* to_string(ExosystemKind kind);

/// Disturbance generator w' = s(w).
///
/// All built-in variants have a linear drift: S w for LinearSkew, -M w for
/// the concave quadratic Sigma(w) = -1/2 w^T M w, and 0 for Constant.
class Exosystem {
 public:
  static Exosystem skew(Eigen::MatrixXd S, Box box);
  static Exosystem gradient(Eigen::MatrixXd M, Box box);
  static Exosystem constant(int dim, Box box);

  ExosystemKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Box& box() const { return box_; }

  Eigen::VectorXd drift(const Eigen::VectorXd& w) const;

  /// Matrix of the (linear) drift: S, -M, or the zero matrix.
  Eigen::MatrixXd linear_part() const;

 private:
  Exosystem(ExosystemKind kind, Eigen::MatrixXd matrix, Box box);

  ExosystemKind kind_;
  Eigen::MatrixXd matrix_;  // S for skew, M for gradient, unused for constant
  Box box_;
};

/// Lists violated structural invariants; empty when the exosystem is valid.
/// Monotonicity is sampled on 100 random pairs from the initial-set box.
std::vector<std::string> validate(const Exosystem& exo, std::uint64_t seed = 1);

/// exp(S t) w0 for the LinearSkew variant.
Eigen::VectorXd closed_form(const Exosystem& exo, const Eigen::VectorXd& w0, double t);

}  // namespace flowagree
