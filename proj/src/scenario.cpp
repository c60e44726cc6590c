#include "flowagree/scenario.hpp"

#include "flowagree/errors.hpp"
#include "flowagree/optimizer.hpp"
#include "flowagree/regulator.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>

namespace flowagree {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) throw ParseError("unknown key '" + it.key() + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + " is missing '" + key + "'");
  return obj.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + " must be a number");
  return j.get<double>();
}

VectorXd vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + " must be a list of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

// Row-major nested lists. A flat list of numbers is read as a column.
MatrixXd matrix_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + " must be a list of rows");
  if (j.empty()) return MatrixXd(0, 0);
  if (!j[0].is_array()) return vector_of(j, where);
  const std::size_t cols = j[0].size();
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string row = where + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) throw ParseError(row + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], row + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

std::string string_of(const json& j, const std::string& where) {
  if (!j.is_string()) throw ParseError(where + " must be a string");
  return j.get<std::string>();
}

Graph parse_graph(const json& j, std::optional<VectorXd>& weights) {
  check_keys(j, {"nodes", "edges", "weights"}, "graph");
  const json& nodes = require(j, "nodes", "graph");
  if (!nodes.is_number_integer()) throw ParseError("graph.nodes must be an integer");
  const json& edges = require(j, "edges", "graph");
  if (!edges.is_array()) throw ParseError("graph.edges must be a list of [tail, head] pairs");
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const json& e = edges[k];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
        !e[1].is_number_integer()) {
      throw ParseError("graph.edges[" + std::to_string(k) + "] must be [tail, head]");
    }
    pairs.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  if (j.contains("weights")) weights = vector_of(j.at("weights"), "graph.weights");
  return Graph::from_one_based(nodes.get<int>(), pairs);
}

Box parse_box(const json& j, int dim, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + " must be a list");
  // [lo, hi] applies to every component; [[lo, hi], ...] is per component.
  if (j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return Box::uniform(dim, j[0].get<double>(), j[1].get<double>());
  }
  Box box{VectorXd(static_cast<Eigen::Index>(j.size())), VectorXd(static_cast<Eigen::Index>(j.size()))};
  for (std::size_t i = 0; i < j.size(); ++i) {
    const VectorXd pair = vector_of(j[i], where + "[" + std::to_string(i) + "]");
    if (pair.size() != 2) throw ParseError(where + " entries must be [lower, upper]");
    box.lower(static_cast<Eigen::Index>(i)) = pair(0);
    box.upper(static_cast<Eigen::Index>(i)) = pair(1);
  }
  return box;
}

struct ExosystemSection {
  Exosystem exo;
  std::optional<VectorXd> w0;
};

ExosystemSection parse_exosystem(const json& j) {
  check_keys(j, {"type", "S", "M", "dim", "w0", "box"}, "exosystem");
  const std::string type = string_of(require(j, "type", "exosystem"), "exosystem.type");
  std::optional<VectorXd> w0;
  if (j.contains("w0")) w0 = vector_of(j.at("w0"), "exosystem.w0");

  MatrixXd matrix;
  int dim = -1;
  if (type == "skew") {
    matrix = matrix_of(require(j, "S", "exosystem"), "exosystem.S");
    dim = static_cast<int>(matrix.rows());
  } else if (type == "gradient") {
    matrix = matrix_of(require(j, "M", "exosystem"), "exosystem.M");
    dim = static_cast<int>(matrix.rows());
  } else if (type == "constant") {
    if (j.contains("dim")) {
      if (!j.at("dim").is_number_integer()) throw ParseError("exosystem.dim must be an integer");
      dim = j.at("dim").get<int>();
    } else if (w0) {
      dim = static_cast<int>(w0->size());
    } else {
      throw ParseError("constant exosystem needs 'dim' or 'w0'");
    }
  } else {
    throw ParseError("unknown exosystem type '" + type + "'");
  }
  if (dim < 0) throw ParseError("exosystem dimension must be nonnegative");

  const Box box = j.contains("box") ? parse_box(j.at("box"), dim, "exosystem.box")
                                    : Box::uniform(dim, -1.0, 1.0);
  if (type == "skew") return {Exosystem::skew(matrix, box), w0};
  if (type == "gradient") return {Exosystem::gradient(matrix, box), w0};
  return {Exosystem::constant(dim, box), w0};
}

ConcaveGradient parse_drift(const json& j, const std::string& where) {
  check_keys(j, {"type", "M", "scale"}, where);
  const std::string type = string_of(require(j, "type", where), where + ".type");
  ConcaveGradient drift;
  if (type == "quadratic") {
    drift.kind = ConcaveGradient::Kind::Quadratic;
    drift.M = matrix_of(require(j, "M", where), where + ".M");
  } else if (type == "cubic") {
    drift.kind = ConcaveGradient::Kind::Cubic;
  } else if (type == "tanh") {
    drift.kind = ConcaveGradient::Kind::Tanh;
    if (j.contains("scale")) drift.scale = number(j.at("scale"), where + ".scale");
  } else {
    throw ParseError(where + ": unknown drift type '" + type + "'");
  }
  return drift;
}

struct PlantSection {
  Plant plant;
  std::optional<VectorXd> x0;
  Box x0_box;
};

PlantSection parse_plant(const json& j) {
  check_keys(j, {"type", "P", "nodes", "x0", "x0_box"}, "plant");
  const std::string type = string_of(require(j, "type", "plant"), "plant.type");
  std::optional<VectorXd> x0;
  if (j.contains("x0")) x0 = vector_of(j.at("x0"), "plant.x0");

  std::optional<Plant> plant;
  if (type == "inventory") {
    plant = Plant::inventory(matrix_of(require(j, "P", "plant"), "plant.P"));
  } else if (type == "linear" || type == "gradient") {
    const json& nodes = require(j, "nodes", "plant");
    if (!nodes.is_array()) throw ParseError("plant.nodes must be a list");
    if (type == "linear") {
      std::vector<LinearNode> list;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "plant.nodes[" + std::to_string(i) + "]";
        check_keys(nodes[i], {"A", "G", "P", "C", "Q"}, where);
        LinearNode node;
        node.A = matrix_of(require(nodes[i], "A", where), where + ".A");
        node.G = matrix_of(require(nodes[i], "G", where), where + ".G");
        node.P = matrix_of(require(nodes[i], "P", where), where + ".P");
        node.C = matrix_of(require(nodes[i], "C", where), where + ".C");
        node.Q = matrix_of(require(nodes[i], "Q", where), where + ".Q");
        list.push_back(std::move(node));
      }
      plant = Plant::linear(std::move(list));
    } else {
      std::vector<GradientNode> list;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "plant.nodes[" + std::to_string(i) + "]";
        check_keys(nodes[i], {"drift", "C", "P", "G"}, where);
        GradientNode node;
        node.drift = parse_drift(require(nodes[i], "drift", where), where + ".drift");
        node.C = matrix_of(require(nodes[i], "C", where), where + ".C");
        node.P = matrix_of(require(nodes[i], "P", where), where + ".P");
        if (nodes[i].contains("G")) node.G = matrix_of(nodes[i].at("G"), where + ".G");
        list.push_back(std::move(node));
      }
      plant = Plant::gradient(std::move(list));
    }
  } else {
    throw ParseError("unknown plant type '" + type + "'");
  }
  const int dim = plant->state_dim();
  const Box box = j.contains("x0_box") ? parse_box(j.at("x0_box"), dim, "plant.x0_box")
                                       : Box::uniform(dim, 0.0, 1.0);
  return {*plant, x0, box};
}

ControllerSpec parse_controller(const json& j) {
  check_keys(j, {"type", "init", "H", "mode"}, "controller");
  ControllerSpec spec;
  spec.type = string_of(require(j, "type", "controller"), "controller.type");
  if (spec.type != "edge_im" && spec.type != "inventory_routing" && spec.type != "dual_lq" &&
      spec.type != "bregman") {
    throw ParseError("unknown controller type '" + spec.type + "'");
  }
  if (j.contains("init")) spec.init = string_of(j.at("init"), "controller.init");
  if (spec.init != "zero" && spec.init != "matched") {
    throw ParseError("controller.init must be 'zero' or 'matched'");
  }
  if (j.contains("H")) spec.H = matrix_of(j.at("H"), "controller.H");
  if (j.contains("mode")) {
    const std::string mode = string_of(j.at("mode"), "controller.mode");
    if (mode == "dual_sigma") {
      spec.mode = BregmanMode::DualSigma;
    } else if (mode == "edge_potential") {
      spec.mode = BregmanMode::EdgePotential;
    } else {
      throw ParseError("controller.mode must be 'dual_sigma' or 'edge_potential'");
    }
  }
  return spec;
}

CostFunction parse_cost(const json& j) {
  check_keys(j, {"type", "q", "a", "b"}, "cost");
  const std::string type = string_of(require(j, "type", "cost"), "cost.type");
  if (type == "quadratic") return CostFunction::quadratic(vector_of(require(j, "q", "cost"), "cost.q"));
  if (type == "quartic") {
    return CostFunction::quartic(vector_of(require(j, "a", "cost"), "cost.a"),
                                 vector_of(require(j, "b", "cost"), "cost.b"));
  }
  throw ParseError("unknown cost type '" + type + "'");
}

}  // namespace

VectorXd Scenario::edge_weights() const {
  return weights ? *weights : VectorXd::Ones(graph.edge_count());
}

Scenario parse_scenario(const std::string& text, const std::string& name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(name + ": " + e.what());
  }
  check_keys(root, {"graph", "exosystem", "plant", "controller", "cost", "sim", "outputs"},
             "scenario");

  std::optional<VectorXd> weights;
  Graph graph = parse_graph(require(root, "graph", "scenario"), weights);
  ExosystemSection exo = parse_exosystem(require(root, "exosystem", "scenario"));
  PlantSection plant = parse_plant(require(root, "plant", "scenario"));
  ControllerSpec controller = parse_controller(require(root, "controller", "scenario"));
  std::optional<CostFunction> cost;
  if (root.contains("cost")) cost = parse_cost(root.at("cost"));

  SimOptions sim;
  std::uint64_t seed = 42;
  if (root.contains("sim")) {
    const json& s = root.at("sim");
    check_keys(s, {"dt", "horizon", "record_every", "seed"}, "sim");
    if (s.contains("dt")) sim.dt = number(s.at("dt"), "sim.dt");
    if (s.contains("horizon")) sim.horizon = number(s.at("horizon"), "sim.horizon");
    if (s.contains("record_every")) {
      if (!s.at("record_every").is_number_integer()) throw ParseError("sim.record_every must be an integer");
      sim.record_every = s.at("record_every").get<long>();
    }
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) throw ParseError("sim.seed must be a nonnegative integer");
      seed = s.at("seed").get<std::uint64_t>();
    }
  }
  if (!(sim.dt > 0.0)) throw ParseError("sim.dt must be positive");
  if (!(sim.horizon >= 0.0)) throw ParseError("sim.horizon must be nonnegative");
  if (sim.record_every < 1) throw ParseError("sim.record_every must be at least 1");

  OutputSpec outputs;
  if (root.contains("outputs")) {
    const json& o = root.at("outputs");
    check_keys(o, {"csv", "report"}, "outputs");
    if (o.contains("csv")) outputs.csv = string_of(o.at("csv"), "outputs.csv");
    if (o.contains("report")) outputs.report = string_of(o.at("report"), "outputs.report");
  }

  std::mt19937_64 rng(seed);
  VectorXd w0 = exo.w0 ? *exo.w0 : exo.exo.box().sample(rng);
  VectorXd x0 = plant.x0 ? *plant.x0 : plant.x0_box.sample(rng);
  if (w0.size() != exo.exo.dim()) {
    throw DimensionError("exosystem.w0 has " + std::to_string(w0.size()) +
                         " entries, exosystem dimension is " + std::to_string(exo.exo.dim()));
  }
  if (x0.size() != plant.plant.state_dim()) {
    throw DimensionError("plant.x0 has " + std::to_string(x0.size()) +
                         " entries, plant state dimension is " +
                         std::to_string(plant.plant.state_dim()));
  }

  return Scenario{name,       std::move(graph),       std::move(weights), std::move(exo.exo),
                  std::move(w0), std::move(plant.plant), std::move(x0),   std::move(controller),
                  std::move(cost), sim,                 seed,               std::move(outputs)};
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), std::filesystem::path(path).stem().string());
}

Controller build_controller(const Scenario& sc) {
  const ControllerSpec& spec = sc.controller;
  const Plant& plant = sc.plant;
  const MatrixXd S = sc.exosystem.linear_part();
  const bool inventory = plant.kind() == PlantKind::Inventory;

  if (spec.type == "bregman") {
    if (!sc.cost) throw ParseError("bregman controller needs a cost section");
    return Controller::static_bregman(sc.graph, *sc.cost, spec.mode);
  }
  if (spec.type == "inventory_routing" || spec.type == "dual_lq") {
    if (!inventory) {
      throw AssemblyError("controller/plant mismatch: " + spec.type +
                          " controller requires an inventory plant");
    }
    const bool routing = spec.type == "inventory_routing";
    MatrixXd H;
    if (spec.H) {
      H = *spec.H;
    } else {
      const FeedforwardMaps maps = compute_H(sc.graph, sc.edge_weights(), plant.supply_matrix());
      H = routing ? maps.flow : maps.dual;
    }
    if (routing) return Controller::inventory_routing(sc.graph, S, H);
    return Controller::dual_node_lq(sc.graph, S, H, sc.edge_weights());
  }

  // edge_im
  const int p = plant.output_dim();
  MatrixXd M;
  if (spec.H) {
    M = *spec.H;
  } else if (const auto model = plant.linear_model()) {
    M = solve_sylvester(model->A, model->G, model->C, model->P, S, sc.graph, p).H;
  } else if (plant.supply_matrix().size() == 0 ||
             plant.supply_matrix().cwiseAbs().maxCoeff() == 0.0) {
    M = MatrixXd::Zero(sc.graph.edge_count() * p, sc.exosystem.dim());
  } else {
    throw AssemblyError(
        "controller/plant mismatch: edge_im with a nonlinear plant and nonzero supply needs an "
        "explicit controller.H");
  }
  return Controller::edge_internal_model(sc.graph, sc.exosystem, M, p);
}

ClosedLoop build_loop(const Scenario& sc) {
  std::optional<CostFunction> cost = sc.cost;
  if (!cost && sc.controller.type == "inventory_routing" && !sc.controller.H) {
    // The computed feedforward routes optimally for the weighted quadratic cost.
    cost = CostFunction::quadratic(sc.edge_weights());
  }
  return assemble(sc.graph, sc.exosystem, sc.plant, build_controller(sc), cost);
}

VectorXd initial_state(const Scenario& sc, const ClosedLoop& loop) {
  const Controller& controller = loop.controller();
  if (sc.controller.init == "zero") {
    return loop.pack(sc.w0, sc.x0, VectorXd::Zero(controller.state_dim()));
  }
  VectorXd xi;
  if (controller.kind() == ControllerKind::StaticBregman) {
    if (sc.plant.kind() != PlantKind::Inventory) {
      throw PreconditionError("matched bregman initialization needs an inventory plant");
    }
    const KktPoint kkt =
        solve_static(sc.graph, *controller.cost(), sc.plant.supply_matrix() * sc.w0);
    xi = controller.init_matched(sc.w0, kkt.zeta);
  } else {
    xi = controller.init_matched(sc.w0);
  }
  VectorXd state = loop.pack(sc.w0, sc.x0, xi);
  // Start the plant on the steady manifold as well, keeping the inventory level.
  if (const auto ref = loop.steady_reference(state)) {
    state = loop.pack(sc.w0, ref->Pi * sc.w0 + ref->offset, xi);
  }
  return state;
}

}  // namespace flowagree
