#pragma once

#include "flowagree/cost.hpp"
#include "flowagree/exosystem.hpp"
#include "flowagree/graph.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace flowagree {

enum class ControllerKind { EdgeInternalModel, InventoryRouting, DualNodeLQ, StaticBregman };
enum class BregmanMode { EdgePotential, DualSigma };

const char* to_string(ControllerKind kind);

/// Distributed internal-model controllers. The input v is the controller's
/// share of the interconnection (v = -z); every variant feeds it through
/// as the stabilizing term nu = v.
///
///   EdgeInternalModel  eta_k' = s(eta_k) + M_k^T v_k,      lambda_k = M_k eta_k + v_k
///   InventoryRouting   eta_k' = S eta_k + H_k v_k,         lambda_k = H_k^T eta_k + v_k
///   DualNodeLQ         eta'   = (I (x) S) eta + Hb^T B Q^-1 v,
///                      lambda = Q^-1 B^T Hb eta + v,       Hb = blkdiag(H_1^T..H_n^T)
///   StaticBregman      sigma' = v,                         lambda = grad P^-1(sigma) + v
///
/// Here M_k (p x q) and H_k^T are the row blocks of the feedforward matrix
/// belonging to edge k (node i for DualNodeLQ).
class Controller {
 public:
  static Controller edge_internal_model(Graph graph, Exosystem model, Eigen::MatrixXd M,
                                        int p = 1);
  static Controller inventory_routing(Graph graph, Eigen::MatrixXd S, Eigen::MatrixXd H);
  static Controller dual_node_lq(Graph graph, Eigen::MatrixXd S, Eigen::MatrixXd H_dual,
                                 Eigen::VectorXd weights);
  static Controller static_bregman(Graph graph, CostFunction cost,
                                   BregmanMode mode = BregmanMode::DualSigma);

  ControllerKind kind() const { return kind_; }
  BregmanMode bregman_mode() const { return mode_; }
  const Graph& graph() const { return graph_; }
  int output_dim() const { return p_; }
  /// Dimension of the internal model (q); 1 for StaticBregman.
  int model_dim() const;
  int state_dim() const;
  int input_dim() const { return graph_.edge_count() * p_; }

  /// Internal-model matrix S (linear variants only).
  Eigen::MatrixXd internal_model() const;
  const Eigen::MatrixXd& feedforward() const { return feedforward_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::optional<CostFunction>& cost() const { return cost_; }

  Eigen::VectorXd dynamics(const Eigen::VectorXd& state, const Eigen::VectorXd& v) const;

  /// psi(eta): the flow produced by the internal model alone.
  Eigen::VectorXd model_output(const Eigen::VectorXd& state) const;

  /// lambda = psi(eta) + nu with nu = v.
  Eigen::VectorXd output(const Eigen::VectorXd& state, const Eigen::VectorXd& v) const;

  /// 1/2 |state - ref|^2 for linear variants; Bregman distance of the
  /// conjugate cost for StaticBregman.
  double storage(const Eigen::VectorXd& state, const Eigen::VectorXd& ref_state) const;

  /// dW/dt along both trajectories minus (psi - psi')^T (v - v').
  double passivity_residual(const Eigen::VectorXd& state, const Eigen::VectorXd& ref_state,
                            const Eigen::VectorXd& v, const Eigen::VectorXd& v_ref) const;

  /// State for which the controller reproduces the steady flow under zero
  /// input: eta = w0 on every edge/node, or sigma = B^T zeta for StaticBregman
  /// (zeta from the static optimizer; RequiresOptimizerError if absent).
  Eigen::VectorXd init_matched(const Eigen::VectorXd& w0,
                               const std::optional<Eigen::VectorXd>& zeta = std::nullopt) const;

 private:
  explicit Controller(Graph graph) : graph_(std::move(graph)) {}
  void check_state(const Eigen::VectorXd& state) const;
  void check_input(const Eigen::VectorXd& v) const;

  ControllerKind kind_ = ControllerKind::EdgeInternalModel;
  BregmanMode mode_ = BregmanMode::DualSigma;
  Graph graph_;
  int p_ = 1;
  std::optional<Exosystem> model_;
  Eigen::MatrixXd S_;
  Eigen::MatrixXd feedforward_;  // M, H (m p x q) or H_dual (n x q)
  Eigen::VectorXd weights_;
  std::optional<CostFunction> cost_;
  Eigen::MatrixXd circulation_projector_;  // I - B^+ B, for the range check
};

std::vector<std::string> validate(const Controller& controller);

}  // namespace flowagree
