#pragma once

#include "flowagree/controller.hpp"
#include "flowagree/cost.hpp"
#include "flowagree/exosystem.hpp"
#include "flowagree/graph.hpp"
#include "flowagree/plant.hpp"
#include "flowagree/regulator.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace flowagree {

/// Interconnection signals at one closed-loop state.
struct LoopSignals {
  Eigen::VectorXd y;       // plant output
  Eigen::VectorXd z;       // (B (x) I_p)^T y
  Eigen::VectorXd v;       // -z, fed to the controller (and nu = v)
  Eigen::VectorXd lambda;  // controller output
  Eigen::VectorXd u;       // (B (x) I_p) lambda
};

/// Steady trajectory (x^w, eta^w) used as the reference of U = V + W.
struct SteadyReference {
  Eigen::MatrixXd Pi;      // x^w = Pi w + offset
  Eigen::VectorXd offset;  // constant homogeneous part (inventory level)
  Eigen::MatrixXd Gamma;   // u^w = Gamma w; empty when unknown
  std::optional<Eigen::VectorXd> sigma;  // constant Bregman reference
};

/// Plant, controller and exosystem wired through z = (B (x) I_p)^T y,
/// v = -z, u = (B (x) I_p) lambda. The combined state is (w, x, controller).
class ClosedLoop {
 public:
  const Graph& graph() const { return graph_; }
  const Exosystem& exosystem() const { return exo_; }
  const Plant& plant() const { return plant_; }
  const Controller& controller() const { return controller_; }
  const std::optional<CostFunction>& cost() const { return cost_; }
  const std::optional<RegulatorSolution>& regulator() const { return regulator_; }
  int output_dim() const { return p_; }

  int state_dim() const { return w_dim() + x_dim() + xi_dim(); }
  int w_dim() const { return exo_.dim(); }
  int x_dim() const { return plant_.state_dim(); }
  int xi_dim() const { return controller_.state_dim(); }

  Eigen::VectorXd pack(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& xi) const;
  Eigen::VectorXd w_of(const Eigen::VectorXd& s) const { return s.head(w_dim()); }
  Eigen::VectorXd x_of(const Eigen::VectorXd& s) const { return s.segment(w_dim(), x_dim()); }
  Eigen::VectorXd xi_of(const Eigen::VectorXd& s) const { return s.tail(xi_dim()); }

  LoopSignals signals(const Eigen::VectorXd& state) const;
  Eigen::VectorXd vector_field(const Eigen::VectorXd& state) const;
  /// Vector field together with |z|^2 at the same state.
  Eigen::VectorXd vector_field(const Eigen::VectorXd& state, double& z_energy) const;

  /// Steady reference for the trajectory starting at initial_state, when the
  /// configuration makes one explicit (linear maps, or constant supply).
  std::optional<SteadyReference> steady_reference(const Eigen::VectorXd& initial_state) const;

  /// U = V(x, x^w) + W(xi, xi^w).
  double lyapunov(const Eigen::VectorXd& state, const SteadyReference& reference) const;

  double routing_error(const Eigen::VectorXd& state, const LoopSignals& signals,
                       const std::optional<SteadyReference>& reference) const;
  /// Distance to the optimal routing set; NaN without a cost or for
  /// non-inventory plants.
  double gamma_dist(const Eigen::VectorXd& state, const LoopSignals& signals) const;

 private:
  friend ClosedLoop assemble(Graph, Exosystem, Plant, Controller, std::optional<CostFunction>);
  ClosedLoop(Graph graph, Exosystem exo, Plant plant, Controller controller)
      : graph_(std::move(graph)),
        exo_(std::move(exo)),
        plant_(std::move(plant)),
        controller_(std::move(controller)) {}

  Graph graph_;
  Exosystem exo_;
  Plant plant_;
  Controller controller_;
  std::optional<CostFunction> cost_;
  std::optional<RegulatorSolution> regulator_;
  int p_ = 1;
  Eigen::MatrixXd lift_;
};

/// Wires the components, checking every dimensional and structural pairing.
/// Throws AssemblyError naming the mismatched pair.
ClosedLoop assemble(Graph graph, Exosystem exo, Plant plant, Controller controller,
                    std::optional<CostFunction> cost = std::nullopt);

/// One classical fourth-order Runge-Kutta step. Throws DivergenceError on a
/// non-finite result.
Eigen::VectorXd step_rk4(const ClosedLoop& loop, double t, const Eigen::VectorXd& state,
                         double dt);

struct SimOptions {
  double dt = 1e-3;
  double horizon = 100.0;
  long record_every = 1;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> w, x, xi, lambda, z;
  std::vector<double> agreement_error;
  std::vector<double> routing_error;
  std::vector<double> gamma_dist;
  std::vector<double> lyapunov;    // NaN when no steady reference exists
  std::vector<double> dissipated;  // integral of |z|^2 from 0 to t
  double max_state_norm = 0.0;
  bool diverged = false;
  double divergence_time = 0.0;

  std::size_t size() const { return times.size(); }
};

/// Integrates over [0, horizon] and records every record_every-th step
/// (plus the initial state). Divergence stops the run and is flagged.
Trajectory run(const ClosedLoop& loop, const Eigen::VectorXd& initial_state,
               const SimOptions& options);

/// Largest discrete violation of dU/dt <= -|z|^2 between consecutive
/// samples: max_k [(U_{k+1} - U_k) + integral_{t_k}^{t_{k+1}} |z|^2] / (t_{k+1} - t_k).
/// Empty when the trajectory carries no Lyapunov series.
std::optional<double> dissipation_check(const Trajectory& trajectory);

/// Largest increase U_{k+1} - U_k between consecutive samples.
std::optional<double> max_storage_increase(const Trajectory& trajectory);

}  // namespace flowagree
