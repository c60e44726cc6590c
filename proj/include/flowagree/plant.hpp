#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowagree {

enum class PlantKind { Inventory, LinearPassive, GradientNonlinear };

const char* to_string(PlantKind kind);

/// Built-in concave potentials F with drift f = grad F.
///   Quadratic: F = -1/2 x^T M x      (M symmetric PSD)
///   Cubic:     F = -sum x^4 / 4      (f = -x^3 componentwise)
///   Tanh:      F = -a sum log cosh x (f = -a tanh x componentwise)
struct ConcaveGradient {
  enum class Kind { Quadratic, Cubic, Tanh };
  Kind kind = Kind::Quadratic;
  Eigen::MatrixXd M;  // quadratic only
  double scale = 1.0;  // tanh only

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
};

struct LinearNode {
  Eigen::MatrixXd A, G, P, C, Q;
};

struct GradientNode {
  ConcaveGradient drift;
  Eigen::MatrixXd C, P;
  Eigen::MatrixXd G;  // must equal C^T; empty means C^T
};

/// Stacked linear realization x' = A x + G u + P w, y = C x.
struct LinearModel {
  Eigen::MatrixXd A, G, C, P;
};

/// Node dynamics of the network together with incremental storage functions.
///
/// States, inputs and outputs are stacked node by node; each node has its own
/// state dimension r_i and a common output dimension p. The disturbance w is
/// the full exosystem state and enters node i through its block P_i.
class Plant {
 public:
  /// x' = u + P w, y = x; P is n x q.
  static Plant inventory(Eigen::MatrixXd P);
  static Plant linear(std::vector<LinearNode> nodes);
  static Plant gradient(std::vector<GradientNode> nodes);

  PlantKind kind() const { return kind_; }
  int node_count() const { return static_cast<int>(offsets_.size()) - 1; }
  int state_dim() const { return offsets_.back(); }
  int node_offset(int i) const { return offsets_[i]; }
  int node_state_dim(int i) const { return offsets_[i + 1] - offsets_[i]; }
  int output_dim() const { return output_dim_; }
  int disturbance_dim() const { return static_cast<int>(supply_.cols()); }

  /// Stacked P (state_dim x q).
  const Eigen::MatrixXd& supply_matrix() const { return supply_; }
  const std::vector<LinearNode>& linear_nodes() const { return linear_; }
  const std::vector<GradientNode>& gradient_nodes() const { return gradient_; }

  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& w) const;
  Eigen::VectorXd output(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const;

  /// 1/2 |x - x'|^2, or 1/2 sum (x_i - x_i')^T Q_i (x_i - x_i') for linear nodes.
  double incremental_storage(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref) const;

  /// dV/dt along both trajectories minus (y - y')^T (u - u'). Nonpositive for
  /// incrementally passive plants.
  double passivity_rate_check(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                              const Eigen::VectorXd& u, const Eigen::VectorXd& u_ref,
                              const Eigen::VectorXd& w) const;

  /// Stacked linear realization; empty for non-quadratic gradient drifts.
  std::optional<LinearModel> linear_model() const;

 private:
  Plant() = default;
  void check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd* u,
                  const Eigen::VectorXd& w) const;

  PlantKind kind_ = PlantKind::Inventory;
  std::vector<int> offsets_;
  int output_dim_ = 1;
  Eigen::MatrixXd supply_;
  std::vector<LinearNode> linear_;
  std::vector<GradientNode> gradient_;
};

/// Checks supply balance, passivity certificates and concavity. Returns the
/// list of violations (empty when valid).
std::vector<std::string> validate(const Plant& plant, std::uint64_t seed = 1);

}  // namespace flowagree
