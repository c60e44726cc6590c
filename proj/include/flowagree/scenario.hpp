#pragma once

#include "flowagree/controller.hpp"
#include "flowagree/cost.hpp"
#include "flowagree/exosystem.hpp"
#include "flowagree/graph.hpp"
#include "flowagree/plant.hpp"
#include "flowagree/sim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

namespace flowagree {

struct ControllerSpec {
  std::string type;           // edge_im | inventory_routing | dual_lq | bregman
  std::string init = "zero";  // zero | matched
  std::optional<Eigen::MatrixXd> H;
  BregmanMode mode = BregmanMode::DualSigma;
};

struct OutputSpec {
  std::string csv;     // empty: <out dir>/<name>.csv
  std::string report;  // empty: <out dir>/<name>.json
};

/// A fully parsed scenario file. Missing w0 / x0 are sampled from their boxes
/// with the scenario seed (w0 first, then x0).
struct Scenario {
  std::string name;
  Graph graph;
  std::optional<Eigen::VectorXd> weights;
  Exosystem exosystem;
  Eigen::VectorXd w0;
  Plant plant;
  Eigen::VectorXd x0;
  ControllerSpec controller;
  std::optional<CostFunction> cost;
  SimOptions sim;
  std::uint64_t seed = 42;
  OutputSpec outputs;

  Eigen::VectorXd edge_weights() const;
};

/// Parses scenario JSON. Syntax errors, unknown keys, missing fields and
/// wrong value types raise ParseError; inconsistent dimensions raise the
/// corresponding model errors.
Scenario parse_scenario(const std::string& json_text, const std::string& name = "scenario");
Scenario load_scenario(const std::string& path);

/// Controller described by the scenario; feedforward maps that are not given
/// explicitly are computed from the plant and graph.
Controller build_controller(const Scenario& scenario);

/// Assembled closed loop, with the cost used for the optimality metric.
ClosedLoop build_loop(const Scenario& scenario);

/// (w0, x0, controller state) honoring the requested initialization.
Eigen::VectorXd initial_state(const Scenario& scenario, const ClosedLoop& loop);

}  // namespace flowagree
