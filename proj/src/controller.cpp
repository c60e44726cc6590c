#include "flowagree/controller.hpp"

#include "flowagree/errors.hpp"

namespace flowagree {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::EdgeInternalModel: return "edge_im";
    case ControllerKind::InventoryRouting: return "inventory_routing";
    case ControllerKind::DualNodeLQ: return "dual_lq";
    case ControllerKind::StaticBregman: return "bregman";
  }
  return "?";
}

Controller Controller::edge_internal_model(Graph graph, Exosystem model, MatrixXd M, int p) {
  Controller c(std::move(graph));
  c.kind_ = ControllerKind::EdgeInternalModel;
  c.p_ = p;
  if (M.rows() != c.graph_.edge_count() * p || M.cols() != model.dim()) {
    throw DimensionError("edge internal model needs M of size m p x q");
  }
  c.S_ = model.linear_part();
  c.model_ = std::move(model);
  c.feedforward_ = std::move(M);
  return c;
}

Controller Controller::inventory_routing(Graph graph, MatrixXd S, MatrixXd H) {
  Controller c(std::move(graph));
  c.kind_ = ControllerKind::InventoryRouting;
  if (S.rows() != S.cols()) throw DimensionError("S must be square");
  if (H.rows() != c.graph_.edge_count() || H.cols() != S.rows()) {
    throw DimensionError("inventory routing needs H of size m x q");
  }
  c.S_ = std::move(S);
  c.feedforward_ = std::move(H);
  return c;
}

Controller Controller::dual_node_lq(Graph graph, MatrixXd S, MatrixXd H_dual, VectorXd weights) {
  Controller c(std::move(graph));
  c.kind_ = ControllerKind::DualNodeLQ;
  if (S.rows() != S.cols()) throw DimensionError("S must be square");
  if (H_dual.rows() != c.graph_.node_count() || H_dual.cols() != S.rows()) {
    throw DimensionError("dual LQ controller needs H of size n x q");
  }
  if (weights.size() != c.graph_.edge_count()) {
    throw DimensionError("dual LQ controller needs one weight per edge");
  }
  if (!(weights.array() > 0.0).all()) {
    throw InvalidWeightsError("dual LQ edge weights must be strictly positive");
  }
  c.S_ = std::move(S);
  c.feedforward_ = std::move(H_dual);
  c.weights_ = std::move(weights);
  return c;
}

Controller Controller::static_bregman(Graph graph, CostFunction cost, BregmanMode mode) {
  Controller c(std::move(graph));
  c.kind_ = ControllerKind::StaticBregman;
  c.mode_ = mode;
  if (cost.edge_count() != c.graph_.edge_count()) {
    throw DimensionError("Bregman controller cost must have one component per edge");
  }
  c.cost_ = std::move(cost);
  const MatrixXd& B = c.graph_.incidence();
  const int m = c.graph_.edge_count();
  if (m > 0) {
    const MatrixXd B_pinv = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(B).pseudoInverse();
    c.circulation_projector_ = MatrixXd::Identity(m, m) - B_pinv * B;
  } else {
    c.circulation_projector_ = MatrixXd::Zero(0, 0);
  }
  return c;
}

int Controller::model_dim() const {
  return kind_ == ControllerKind::StaticBregman ? 1 : static_cast<int>(S_.rows());
}

int Controller::state_dim() const {
  switch (kind_) {
    case ControllerKind::EdgeInternalModel:
    case ControllerKind::InventoryRouting:
      return graph_.edge_count() * model_dim();
    case ControllerKind::DualNodeLQ:
      return graph_.node_count() * model_dim();
    case ControllerKind::StaticBregman:
      return graph_.edge_count();
  }
  return 0;
}

MatrixXd Controller::internal_model() const {
  if (kind_ == ControllerKind::StaticBregman) {
    throw UnsupportedVariantError("Bregman controller has no internal-model matrix");
  }
  return S_;
}

void Controller::check_state(const VectorXd& state) const {
  if (state.size() != state_dim()) {
    throw DimensionError(std::string(to_string(kind_)) + " controller state has dimension " +
                         std::to_string(state.size()) + ", expected " +
                         std::to_string(state_dim()));
  }
}

void Controller::check_input(const VectorXd& v) const {
  if (v.size() != input_dim()) {
    throw DimensionError(std::string(to_string(kind_)) + " controller input has dimension " +
                         std::to_string(v.size()) + ", expected " + std::to_string(input_dim()));
  }
  if (kind_ == ControllerKind::StaticBregman && mode_ == BregmanMode::DualSigma &&
      input_dim() > 0) {
    const double off_range = (circulation_projector_ * v).cwiseAbs().maxCoeff();
    if (off_range > 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff())) {
      throw ContractError("dual-sigma controller input is not in range(B^T) (circulation part " +
                          std::to_string(off_range) + ")");
    }
  }
}

VectorXd Controller::dynamics(const VectorXd& state, const VectorXd& v) const {
  check_state(state);
  check_input(v);
  const int q = model_dim();
  VectorXd d(state.size());
  switch (kind_) {
    case ControllerKind::EdgeInternalModel:
      for (int k = 0; k < graph_.edge_count(); ++k) {
        const auto M_k = feedforward_.middleRows(k * p_, p_);
        d.segment(k * q, q) =
            model_->drift(state.segment(k * q, q)) + M_k.transpose() * v.segment(k * p_, p_);
      }
      break;
    case ControllerKind::InventoryRouting:
      for (int k = 0; k < graph_.edge_count(); ++k) {
        d.segment(k * q, q) = S_ * state.segment(k * q, q) + feedforward_.row(k).transpose() * v(k);
      }
      break;
    case ControllerKind::DualNodeLQ: {
      const VectorXd node_input =
          graph_.incidence() * (weights_.cwiseInverse().asDiagonal() * v);
      for (int i = 0; i < graph_.node_count(); ++i) {
        d.segment(i * q, q) =
            S_ * state.segment(i * q, q) + feedforward_.row(i).transpose() * node_input(i);
      }
      break;
    }
    case ControllerKind::StaticBregman:
      d = v;
      break;
  }
  return d;
}

VectorXd Controller::model_output(const VectorXd& state) const {
  check_state(state);
  const int q = model_dim();
  switch (kind_) {
    case ControllerKind::EdgeInternalModel: {
      VectorXd lambda(input_dim());
      for (int k = 0; k < graph_.edge_count(); ++k) {
        lambda.segment(k * p_, p_) = feedforward_.middleRows(k * p_, p_) * state.segment(k * q, q);
      }
      return lambda;
    }
    case ControllerKind::InventoryRouting: {
      VectorXd lambda(graph_.edge_count());
      for (int k = 0; k < graph_.edge_count(); ++k) {
        lambda(k) = feedforward_.row(k).dot(state.segment(k * q, q));
      }
      return lambda;
    }
    case ControllerKind::DualNodeLQ: {
      VectorXd zeta(graph_.node_count());
      for (int i = 0; i < graph_.node_count(); ++i) {
        zeta(i) = feedforward_.row(i).dot(state.segment(i * q, q));
      }
      return weights_.cwiseInverse().asDiagonal() * (graph_.incidence().transpose() * zeta);
    }
    case ControllerKind::StaticBregman:
      return cost_->inverse_gradient(state);
  }
  return VectorXd::Zero(input_dim());
}

VectorXd Controller::output(const VectorXd& state, const VectorXd& v) const {
  check_input(v);
  return model_output(state) + v;
}

double Controller::storage(const VectorXd& state, const VectorXd& ref_state) const {
  check_state(state);
  check_state(ref_state);
  if (kind_ == ControllerKind::StaticBregman) return cost_->bregman_distance(state, ref_state);
  return 0.5 * (state - ref_state).squaredNorm();
}

double Controller::passivity_residual(const VectorXd& state, const VectorXd& ref_state,
                                      const VectorXd& v, const VectorXd& v_ref) const {
  const double supply_rate = (model_output(state) - model_output(ref_state)).dot(v - v_ref);
  double rate = 0.0;
  if (kind_ == ControllerKind::StaticBregman) {
    // W = P*(s) - P*(s') - grad P*(s')^T (s - s'); grad P* = grad P^-1 and
    // the Hessian of P* is 1 / P''(grad P^-1(s')).
    const VectorXd psi_ref = cost_->inverse_gradient(ref_state);
    const VectorXd curvature_ref = cost_->hessian_diagonal(psi_ref).cwiseInverse();
    rate = (model_output(state) - psi_ref).dot(dynamics(state, v)) -
           (state - ref_state).dot(curvature_ref.asDiagonal() * dynamics(ref_state, v_ref));
  } else {
    rate = (state - ref_state).dot(dynamics(state, v) - dynamics(ref_state, v_ref));
  }
  return rate - supply_rate;
}

VectorXd Controller::init_matched(const VectorXd& w0, const std::optional<VectorXd>& zeta) const {
  if (kind_ == ControllerKind::StaticBregman) {
    if (!zeta) {
      throw RequiresOptimizerError(
          "matched Bregman initialization needs the optimal dual potentials (run solve_static)");
    }
    if (zeta->size() != graph_.node_count()) throw DimensionError("zeta has wrong length");
    return graph_.incidence().transpose() * *zeta;
  }
  if (w0.size() != model_dim()) {
    throw DimensionError("w0 has dimension " + std::to_string(w0.size()) +
                         ", internal model expects " + std::to_string(model_dim()));
  }
  const int copies = state_dim() / std::max(model_dim(), 1);
  return w0.replicate(copies, 1);
}

std::vector<std::string> validate(const Controller& controller) {
  std::vector<std::string> violations;
  switch (controller.kind()) {
    case ControllerKind::InventoryRouting:
    case ControllerKind::DualNodeLQ: {
      const MatrixXd S = controller.internal_model();
      if (S.size() && (S + S.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        violations.push_back("internal model S is not skew-symmetric");
      }
      break;
    }
    case ControllerKind::EdgeInternalModel: {
      const MatrixXd S = controller.internal_model();
      if (S.size() && (S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 &&
          (S + S.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        violations.push_back("internal model drift is neither skew nor a symmetric gradient");
      }
      break;
    }
    case ControllerKind::StaticBregman:
      break;
  }
  return violations;
}

}  // namespace flowagree
