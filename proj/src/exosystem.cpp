#include "flowagree/exosystem.hpp"

#include "flowagree/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace flowagree {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Box Box::uniform(int dim, double lower, double upper) {
  return {VectorXd::Constant(dim, lower), VectorXd::Constant(dim, upper)};
}

bool Box::contains(const VectorXd& point) const {
  if (point.size() != lower.size()) return false;
  return (point.array() >= lower.array()).all() &&
         (point.array() <= upper.array()).all();
}

VectorXd Box::sample(std::mt19937_64& rng) const {
  VectorXd point(lower.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    point(i) = lower(i) + unit(rng) * (upper(i) - lower(i));
  }
  return point;
}

const char* to_string(ExosystemKind kind) {
  switch (kind) {
    case ExosystemKind::LinearSkew: return "skew";
    case ExosystemKind::GradientConcave: return "gradient";
    case ExosystemKind::Constant: return "constant";
  }
  return "?";
}

Exosystem::Exosystem(ExosystemKind kind, MatrixXd matrix, Box box)
    : kind_(kind), matrix_(std::move(matrix)), box_(std::move(box)) {
  if (matrix_.rows() != matrix_.cols()) {
    throw DimensionError("exosystem matrix must be square");
  }
  if (box_.lower.size() != matrix_.rows() || box_.upper.size() != matrix_.rows()) {
    throw DimensionError("exosystem box has wrong dimension");
  }
}

Exosystem Exosystem::skew(MatrixXd S, Box box) {
  return Exosystem(ExosystemKind::LinearSkew, std::move(S), std::move(box));
}

Exosystem Exosystem::gradient(MatrixXd M, Box box) {
  return Exosystem(ExosystemKind::GradientConcave, std::move(M), std::move(box));
}

Exosystem Exosystem::constant(int dim, Box box) {
  return Exosystem(ExosystemKind::Constant, MatrixXd::Zero(dim, dim), std::move(box));
}

VectorXd Exosystem::drift(const VectorXd& w) const {
  if (w.size() != dim()) {
    throw DimensionError("disturbance has dimension " + std::to_string(w.size()) +
                         ", exosystem expects " + std::to_string(dim()));
  }
  switch (kind_) {
    case ExosystemKind::LinearSkew: return matrix_ * w;
    case ExosystemKind::GradientConcave: return -(matrix_ * w);
    case ExosystemKind::Constant: return VectorXd::Zero(dim());
  }
  return VectorXd::Zero(dim());
}

MatrixXd Exosystem::linear_part() const {
  switch (kind_) {
    case ExosystemKind::LinearSkew: return matrix_;
    case ExosystemKind::GradientConcave: return -matrix_;
    case ExosystemKind::Constant: return MatrixXd::Zero(dim(), dim());
  }
  return MatrixXd::Zero(dim(), dim());
}

std::vector<std::string> validate(const Exosystem& exo, std::uint64_t seed) {
  std::vector<std::string> violations;
  const Box& box = exo.box();
  if (!(box.lower.array() <= box.upper.array()).all()) {
    violations.push_back("initial-set box has lower > upper");
  }
  const MatrixXd linear = exo.linear_part();
  switch (exo.kind()) {
    case ExosystemKind::LinearSkew:
      if ((linear + linear.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        violations.push_back("S is not skew-symmetric (S + S^T != 0)");
      }
      break;
    case ExosystemKind::GradientConcave:
      if ((linear - linear.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        violations.push_back("gradient drift matrix M is not symmetric");
      }
      break;
    case ExosystemKind::Constant:
      break;
  }
  if (exo.kind() != ExosystemKind::Constant && violations.empty()) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 100; ++i) {
      const VectorXd a = box.sample(rng);
      const VectorXd b = box.sample(rng);
      const double rate = (a - b).dot(exo.drift(a) - exo.drift(b));
      if (rate > 1e-12) {
        violations.push_back("drift is not incrementally monotone: (w-w')^T(s(w)-s(w')) = " +
                             std::to_string(rate) + " > 0");
        break;
      }
    }
  }
  return violations;
}

VectorXd closed_form(const Exosystem& exo, const VectorXd& w0, double t) {
  if (exo.kind() != ExosystemKind::LinearSkew) {
    throw UnsupportedVariantError(std::string("closed_form needs a skew exosystem, got ") +
                                  to_string(exo.kind()));
  }
  if (w0.size() != exo.dim()) throw DimensionError("w0 has wrong dimension");
  if (t == 0.0) return w0;
  const MatrixXd St = exo.linear_part() * t;
  if (exo.dim() == 2 && (St + St.transpose()).cwiseAbs().maxCoeff() == 0.0) {
    // exp of [[0, a], [-a, 0]] is a rotation by angle a.
    const double a = St(0, 1);
    const double c = std::cos(a);
    const double s = std::sin(a);
    return VectorXd{{c * w0(0) + s * w0(1), -s * w0(0) + c * w0(1)}};
  }
  const MatrixXd propagator = St.exp();
  return propagator * w0;
}

}  // namespace flowagree
