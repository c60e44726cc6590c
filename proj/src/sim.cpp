#include "flowagree/sim.hpp"

#include "flowagree/errors.hpp"
#include "flowagree/optimizer.hpp"

#include <cmath>
#include <limits>

namespace flowagree {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double inf_norm(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

[[noreturn]] void mismatch(const std::string& pair, const std::string& detail) {
  throw AssemblyError(pair + " mismatch: " + detail);
}

bool same_matrix(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && inf_norm(a - b) <= 1e-12;
}

// Input the controller produces on the steady manifold, u^w = F w.
std::optional<MatrixXd> controller_flow_map(const Controller& controller, const MatrixXd& lift) {
  const MatrixXd& B = controller.graph().incidence();
  switch (controller.kind()) {
    case ControllerKind::EdgeInternalModel:
      return MatrixXd(lift * controller.feedforward());
    case ControllerKind::InventoryRouting:
      return MatrixXd(B * controller.feedforward());
    case ControllerKind::DualNodeLQ:
      return MatrixXd(B * controller.weights().cwiseInverse().asDiagonal() * B.transpose() *
                      controller.feedforward());
    case ControllerKind::StaticBregman:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

VectorXd ClosedLoop::pack(const VectorXd& w, const VectorXd& x, const VectorXd& xi) const {
  if (w.size() != w_dim() || x.size() != x_dim() || xi.size() != xi_dim()) {
    throw DimensionError("closed-loop state blocks have wrong dimensions");
  }
  VectorXd s(state_dim());
  s << w, x, xi;
  return s;
}

LoopSignals ClosedLoop::signals(const VectorXd& state) const {
  if (state.size() != state_dim()) throw DimensionError("closed-loop state has wrong dimension");
  const VectorXd w = w_of(state);
  LoopSignals sig;
  sig.y = plant_.output(x_of(state), w);
  sig.z = lift_.transpose() * sig.y;
  sig.v = -sig.z;
  sig.lambda = controller_.output(xi_of(state), sig.v);
  sig.u = lift_ * sig.lambda;
  return sig;
}

VectorXd ClosedLoop::vector_field(const VectorXd& state, double& z_energy) const {
  const LoopSignals sig = signals(state);
  z_energy = sig.z.squaredNorm();
  const VectorXd w = w_of(state);
  VectorXd d(state_dim());
  d << exo_.drift(w), plant_.dynamics(x_of(state), sig.u, w),
      controller_.dynamics(xi_of(state), sig.v);
  return d;
}

VectorXd ClosedLoop::vector_field(const VectorXd& state) const {
  double ignored = 0.0;
  return vector_field(state, ignored);
}

std::optional<SteadyReference> ClosedLoop::steady_reference(const VectorXd& initial_state) const {
  const VectorXd w0 = w_of(initial_state);
  const VectorXd x0 = x_of(initial_state);
  const int n = graph_.node_count();
  const bool inventory = plant_.kind() == PlantKind::Inventory;

  if (controller_.kind() == ControllerKind::StaticBregman) {
    if (!inventory || !controller_.cost()) return std::nullopt;
    try {
      const KktPoint kkt = solve_static(graph_, *controller_.cost(), plant_.supply_matrix() * w0);
      SteadyReference ref;
      ref.Pi = MatrixXd::Zero(n, w_dim());
      ref.offset = VectorXd::Constant(n, x0.mean());
      ref.sigma = graph_.incidence().transpose() * kkt.zeta;
      return ref;
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  if (!regulator_) return std::nullopt;
  const auto flow = controller_flow_map(controller_, lift_);
  if (!flow || inf_norm(*flow - regulator_->Gamma) > 1e-8 * std::max(1.0, inf_norm(regulator_->Gamma))) {
    // The controller's feedforward does not reproduce this steady input.
    return std::nullopt;
  }
  SteadyReference ref;
  ref.Pi = regulator_->Pi;
  ref.Gamma = regulator_->Gamma;
  ref.offset = VectorXd::Zero(x_dim());
  if (inventory && n > 0) {
    ref.offset = VectorXd::Constant(n, (x0 - ref.Pi * w0).mean());
  }
  return ref;
}

double ClosedLoop::lyapunov(const VectorXd& state, const SteadyReference& reference) const {
  const VectorXd w = w_of(state);
  const VectorXd x_ref = reference.Pi * w + reference.offset;
  VectorXd xi_ref;
  if (reference.sigma) {
    xi_ref = *reference.sigma;
  } else {
    xi_ref = w.replicate(xi_dim() / std::max(w_dim(), 1), 1);
  }
  return plant_.incremental_storage(x_of(state), x_ref) + controller_.storage(xi_of(state), xi_ref);
}

double ClosedLoop::routing_error(const VectorXd& state, const LoopSignals& sig,
                                 const std::optional<SteadyReference>& reference) const {
  const VectorXd w = w_of(state);
  if (plant_.kind() == PlantKind::Inventory) {
    return (graph_.incidence() * sig.lambda + plant_.supply_matrix() * w).norm();
  }
  if (reference && reference->Gamma.size() > 0) return (sig.u - reference->Gamma * w).norm();
  return kNaN;
}

double ClosedLoop::gamma_dist(const VectorXd& state, const LoopSignals& sig) const {
  if (!cost_ || plant_.kind() != PlantKind::Inventory) return kNaN;
  return gamma_distance(sig.lambda, w_of(state), graph_, *cost_, plant_.supply_matrix());
}

ClosedLoop assemble(Graph graph, Exosystem exo, Plant plant, Controller controller,
                    std::optional<CostFunction> cost) {
  const int n = graph.node_count();
  const int q = exo.dim();
  if (plant.node_count() != n) {
    mismatch("plant/graph", "plant has " + std::to_string(plant.node_count()) +
                                " nodes, graph has " + std::to_string(n));
  }
  if (plant.disturbance_dim() != q) {
    mismatch("plant/exosystem", "plant disturbance dimension " +
                                    std::to_string(plant.disturbance_dim()) +
                                    ", exosystem dimension " + std::to_string(q));
  }
  if (!(controller.graph() == graph)) mismatch("controller/graph", "different topology");
  if (controller.output_dim() != plant.output_dim()) {
    mismatch("controller/plant", "controller flow dimension p = " +
                                     std::to_string(controller.output_dim()) +
                                     ", plant output dimension p = " +
                                     std::to_string(plant.output_dim()));
  }
  const int p = plant.output_dim();

  switch (controller.kind()) {
    case ControllerKind::StaticBregman:
      if (exo.kind() != ExosystemKind::Constant) {
        mismatch("controller/exosystem", std::string("bregman controller requires a constant "
                                                     "exosystem, got ") +
                                             to_string(exo.kind()));
      }
      break;
    case ControllerKind::InventoryRouting:
    case ControllerKind::DualNodeLQ:
      if (plant.kind() != PlantKind::Inventory) {
        mismatch("controller/plant", std::string(to_string(controller.kind())) +
                                         " controller requires an inventory plant");
      }
      [[fallthrough]];
    case ControllerKind::EdgeInternalModel:
      if (!same_matrix(controller.internal_model(), exo.linear_part())) {
        mismatch("controller/exosystem", "internal model does not match the exosystem drift");
      }
      break;
  }

  if (cost && cost->edge_count() != graph.edge_count()) {
    mismatch("cost/graph", "cost has " + std::to_string(cost->edge_count()) +
                               " components, graph has " + std::to_string(graph.edge_count()) +
                               " edges");
  }
  if (!cost) {
    if (controller.cost()) {
      cost = controller.cost();
    } else if (controller.kind() == ControllerKind::DualNodeLQ) {
      cost = CostFunction::quadratic(controller.weights());
    }
  }

  ClosedLoop loop(std::move(graph), std::move(exo), std::move(plant), std::move(controller));
  loop.p_ = p;
  loop.cost_ = std::move(cost);
  loop.lift_ = kron_identity(loop.graph_.incidence(), p);

  if (loop.controller_.kind() != ControllerKind::StaticBregman) {
    if (const auto model = loop.plant_.linear_model()) {
      try {
        loop.regulator_ = solve_sylvester(model->A, model->G, model->C, model->P,
                                          loop.exo_.linear_part(), loop.graph_, p);
      } catch (const InfeasibleError&) {
      } catch (const DimensionError&) {
      }
    }
  }
  return loop;
}

namespace {

struct StepResult {
  VectorXd state;
  double dissipated = 0.0;  // integral of |z|^2 over the step
  bool finite = true;
};

StepResult rk4(const ClosedLoop& loop, const VectorXd& s, double dt) {
  StepResult out;
  double e1 = 0, e2 = 0, e3 = 0, e4 = 0;
  const VectorXd k1 = loop.vector_field(s, e1);
  VectorXd stage = s + 0.5 * dt * k1;
  if (!stage.allFinite()) return {stage, 0.0, false};
  const VectorXd k2 = loop.vector_field(stage, e2);
  stage = s + 0.5 * dt * k2;
  if (!stage.allFinite()) return {stage, 0.0, false};
  const VectorXd k3 = loop.vector_field(stage, e3);
  stage = s + dt * k3;
  if (!stage.allFinite()) return {stage, 0.0, false};
  const VectorXd k4 = loop.vector_field(stage, e4);
  out.state = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.dissipated = (dt / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
  out.finite = out.state.allFinite() && std::isfinite(out.dissipated);
  return out;
}

}  // namespace

VectorXd step_rk4(const ClosedLoop& loop, double t, const VectorXd& state, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("step size must be positive");
  StepResult r = rk4(loop, state, dt);
  if (!r.finite) throw DivergenceError("non-finite state during RK4 step", t + dt);
  return r.state;
}

Trajectory run(const ClosedLoop& loop, const VectorXd& initial_state, const SimOptions& options) {
  if (!(options.dt > 0.0)) throw PreconditionError("dt must be positive");
  if (!(options.horizon >= 0.0)) throw PreconditionError("horizon must be nonnegative");
  if (options.record_every < 1) throw PreconditionError("record_every must be at least 1");
  if (initial_state.size() != loop.state_dim()) {
    throw DimensionError("initial state has dimension " + std::to_string(initial_state.size()) +
                         ", closed loop expects " + std::to_string(loop.state_dim()));
  }
  if (!initial_state.allFinite()) throw PreconditionError("initial state is not finite");

  const auto reference = loop.steady_reference(initial_state);
  const long steps = std::lround(options.horizon / options.dt);

  Trajectory traj;
  const std::size_t expected = static_cast<std::size_t>(steps / options.record_every + 1);
  traj.times.reserve(expected);

  double dissipated = 0.0;
  auto record = [&](double t, const VectorXd& s) {
    const LoopSignals sig = loop.signals(s);
    traj.times.push_back(t);
    traj.w.push_back(loop.w_of(s));
    traj.x.push_back(loop.x_of(s));
    traj.xi.push_back(loop.xi_of(s));
    traj.lambda.push_back(sig.lambda);
    traj.z.push_back(sig.z);
    traj.agreement_error.push_back(sig.z.norm());
    traj.routing_error.push_back(loop.routing_error(s, sig, reference));
    traj.gamma_dist.push_back(loop.gamma_dist(s, sig));
    traj.lyapunov.push_back(reference ? loop.lyapunov(s, *reference) : kNaN);
    traj.dissipated.push_back(dissipated);
  };

  VectorXd state = initial_state;
  traj.max_state_norm = state.norm();
  record(0.0, state);
  for (long k = 1; k <= steps; ++k) {
    StepResult r = rk4(loop, state, options.dt);
    if (!r.finite) {
      traj.diverged = true;
      traj.divergence_time = static_cast<double>(k) * options.dt;
      break;
    }
    state = std::move(r.state);
    dissipated += r.dissipated;
    traj.max_state_norm = std::max(traj.max_state_norm, state.norm());
    if (k % options.record_every == 0) record(static_cast<double>(k) * options.dt, state);
  }
  return traj;
}

std::optional<double> dissipation_check(const Trajectory& traj) {
  if (traj.size() < 2) return std::nullopt;
  for (double u : traj.lyapunov) {
    if (std::isnan(u)) return std::nullopt;
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double dt = traj.times[k + 1] - traj.times[k];
    const double rate = (traj.lyapunov[k + 1] - traj.lyapunov[k]) +
                        (traj.dissipated[k + 1] - traj.dissipated[k]);
    worst = std::max(worst, rate / dt);
  }
  return worst;
}

std::optional<double> max_storage_increase(const Trajectory& traj) {
  if (traj.size() < 2) return std::nullopt;
  for (double u : traj.lyapunov) {
    if (std::isnan(u)) return std::nullopt;
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    worst = std::max(worst, traj.lyapunov[k + 1] - traj.lyapunov[k]);
  }
  return worst;
}

}  // namespace flowagree
