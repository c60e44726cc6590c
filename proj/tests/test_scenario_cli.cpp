#include "flowagree/cli.hpp"
#include "flowagree/csv.hpp"
#include "flowagree/errors.hpp"
#include "flowagree/scenario.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sstream>

using namespace flowagree;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = FLOWAGREE_SCENARIO_DIR;

std::string ring3(const std::string& exosystem, const std::string& plant,
                  const std::string& controller, const std::string& extra = "") {
  return R"({"graph": {"nodes": 3, "edges": [[1, 2], [2, 3], [3, 1]]},
             "exosystem": )" + exosystem + R"(, "plant": )" + plant + R"(,
             "controller": )" + controller + extra + "}";
}

const std::string kHarmonic = R"({"type": "skew", "S": [[0, 1], [-1, 0]], "w0": [1, 0]})";
const std::string kInventory = R"({"type": "inventory", "P": [[1, 0], [-1, 1], [0, -1]]})";
const std::string kRouting = R"({"type": "inventory_routing"})";

int invoke(const std::vector<std::string>& args, std::string* output = nullptr) {
  std::ostringstream out, err;
  const int code = flowagree::cli::run_cli(args, out, err);
  if (output) *output = out.str() + err.str();
  return code;
}

}  // namespace

TEST_CASE("scenario parsing") {
  const Scenario sc = parse_scenario(ring3(kHarmonic, kInventory, kRouting));
  CHECK(sc.graph.edge_count() == 3);
  CHECK(sc.exosystem.kind() == ExosystemKind::LinearSkew);
  CHECK(sc.w0 == fixture::vec({1, 0}));
  CHECK(sc.sim.dt == 1e-3);
  CHECK(sc.sim.horizon == 100.0);
  CHECK(sc.controller.init == "zero");
  CHECK(sc.edge_weights() == Eigen::VectorXd::Ones(3));

  SUBCASE("sampled initial conditions are seeded and boxed") {
    const std::string plant =
        R"({"type": "inventory", "P": [[1, 0], [-1, 1], [0, -1]], "x0_box": [2, 3]})";
    const std::string exo = R"({"type": "skew", "S": [[0, 1], [-1, 0]], "box": [[0, 1], [5, 6]]})";
    const std::string text = ring3(exo, plant, kRouting, R"(, "sim": {"seed": 9})");
    const Scenario a = parse_scenario(text);
    const Scenario b = parse_scenario(text);
    CHECK(a.x0 == b.x0);
    CHECK(a.w0 == b.w0);
    CHECK(a.x0.minCoeff() >= 2.0);
    CHECK(a.x0.maxCoeff() <= 3.0);
    CHECK(a.w0(1) >= 5.0);
    const Scenario c = parse_scenario(ring3(exo, plant, kRouting, R"(, "sim": {"seed": 10})"));
    CHECK(c.x0 != a.x0);
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_scenario(ring3(kHarmonic, kInventory, kRouting, R"(, "extra": 1)")),
                    ParseError);
    CHECK_THROWS_AS(parse_scenario(ring3(kHarmonic, kInventory,
                                         R"({"type": "inventory_routing", "gain": 2})")),
                    ParseError);
  }
  SUBCASE("malformed input") {
    CHECK_THROWS_AS(parse_scenario("{"), ParseError);
    CHECK_THROWS_AS(parse_scenario(R"({"graph": {"nodes": 3, "edges": []}})"), ParseError);
    CHECK_THROWS_AS(parse_scenario(ring3(kHarmonic, kInventory, R"({"type": "pid"})")),
                    ParseError);
    CHECK_THROWS_AS(parse_scenario(ring3(R"({"type": "skew", "S": [[0, 1], [-1]]})", kInventory,
                                         kRouting)),
                    ParseError);
    CHECK_THROWS_AS(parse_scenario(ring3(kHarmonic, kInventory, kRouting,
                                         R"(, "sim": {"dt": -1})")),
                    ParseError);
  }
  SUBCASE("model errors keep their type") {
    CHECK_THROWS_AS(parse_scenario(ring3(kHarmonic, kInventory, kRouting).replace(
                        ring3(kHarmonic, kInventory, kRouting).find("[3, 1]"), 6, "[3, 3]")),
                    InvalidGraphError);
  }
}

TEST_CASE("scenario building") {
  const Scenario sc = load_scenario(kScenarios + "/ring3_bregman.json");
  const ClosedLoop loop = build_loop(sc);
  CHECK(loop.controller().kind() == ControllerKind::StaticBregman);
  REQUIRE(loop.cost());

  Scenario matched = sc;
  matched.controller.init = "matched";
  const Eigen::VectorXd s0 = initial_state(matched, loop);
  const LoopSignals sig = loop.signals(s0);
  CHECK(sig.z.norm() <= 1e-12);
  CHECK((sig.lambda - fixture::vec({-2.0 / 3, 1.0 / 3, 1.0 / 3})).cwiseAbs().maxCoeff() <= 1e-12);

  Scenario nonlinear = load_scenario(kScenarios + "/gradient_tanh_edge_im.json");
  nonlinear.plant = Plant::gradient({[] {
    GradientNode node;
    node.drift = {ConcaveGradient::Kind::Cubic, Eigen::MatrixXd(), 1.0};
    node.C = Eigen::MatrixXd::Identity(1, 1);
    node.P = Eigen::MatrixXd::Ones(1, 1);
    return node;
  }()});
  CHECK_THROWS_AS(build_controller(nonlinear), AssemblyError);
}

TEST_CASE("validate subcommand") {
  const fs::path dir = fixture::temp_dir("validate");
  CHECK(invoke({"validate", kScenarios + "/ring3_routing.json"}) == 0);
  CHECK(invoke({"validate", kScenarios + "/linear_passive_edge_im.json"}) == 0);

  std::string output;
  const auto unbalanced = fixture::write_file(
      dir / "unbalanced.json",
      ring3(kHarmonic, R"({"type": "inventory", "P": [[1, 0], [-1, 1], [0, 0]]})", kRouting));
  CHECK(invoke({"validate", unbalanced.string()}, &output) == 1);
  CHECK(output.find("supply not balanced") != std::string::npos);

  const auto not_skew = fixture::write_file(
      dir / "not_skew.json",
      ring3(R"({"type": "skew", "S": [[0, 1], [-1, 0.5]], "w0": [1, 0]})", kInventory, kRouting));
  CHECK(invoke({"validate", not_skew.string()}, &output) == 1);
  CHECK(output.find("skew") != std::string::npos);

  const auto broken = fixture::write_file(dir / "broken.json", "{\"graph\": ");
  CHECK(invoke({"validate", broken.string()}) == 2);
  CHECK(invoke({"validate", (dir / "missing.json").string()}) == 2);

  const auto disconnected = fixture::write_file(
      dir / "disconnected.json",
      R"({"graph": {"nodes": 3, "edges": [[1, 2], [2, 1]]},
          "exosystem": {"type": "constant", "w0": [1]},
          "plant": {"type": "inventory", "P": [[1], [-1], [0]]},
          "controller": {"type": "bregman"},
          "cost": {"type": "quadratic", "q": [1, 1]}})");
  CHECK(invoke({"validate", disconnected.string()}) == 1);
}

TEST_CASE("run subcommand writes CSV and report") {
  const fs::path dir = fixture::temp_dir("run");
  const fs::path out = dir / "nested" / "out";
  std::string output;
  REQUIRE(invoke({"run", kScenarios + "/ring3_routing.json", "--out", out.string()}, &output) == 0);
  const CsvTable table = read_csv((out / "ring3_routing.csv").string());
  // T = 100, dt = 1e-3, every 1000th step
  CHECK(table.rows.size() == 101);
  CHECK(table.header.front() == "t");
  CHECK(table.header.size() == 1 + 2 + 3 + 6 + 3 + 4);
  CHECK(table.column("agreement_error").back() <= 1e-3);
  CHECK(fs::exists(out / "ring3_routing.json"));

  SUBCASE("CSV round trip is exact") {
    const Scenario sc = load_scenario(kScenarios + "/ring3_routing.json");
    const ClosedLoop loop = build_loop(sc);
    const Trajectory traj = run(loop, initial_state(sc, loop), sc.sim);
    CHECK(table.column("agreement_error") == traj.agreement_error);
    CHECK(table.column("routing_error") == traj.routing_error);
    CHECK(table.column("gamma_dist") == traj.gamma_dist);
    CHECK(table.column("lyapunov") == traj.lyapunov);
    CHECK(table.column("t") == traj.times);
    CHECK(table.column("x_2") == std::vector<double>{[&] {
            std::vector<double> v;
            for (const auto& x : traj.x) v.push_back(x(1));
            return v;
          }()});
  }
  SUBCASE("overrides") {
    REQUIRE(invoke({"run", kScenarios + "/ring3_routing.json", "--out", out.string(), "--horizon",
                 "2", "--dt", "0.01"}) == 0);
    const CsvTable shorter = read_csv((out / "ring3_routing.csv").string());
    // 200 steps, every 1000th: only the initial sample
    CHECK(shorter.rows.size() == 1);
  }
  SUBCASE("environment default directory") {
    const fs::path env_dir = dir / "from_env";
    setenv("FLOWAGREE_OUT_DIR", env_dir.c_str(), 1);
    CHECK(invoke({"run", kScenarios + "/ring3_bregman.json", "--horizon", "1"}) == 0);
    unsetenv("FLOWAGREE_OUT_DIR");
    CHECK(fs::exists(env_dir / "ring3_bregman.csv"));
    CHECK(fs::exists(env_dir / "ring3_bregman.json"));
  }
  SUBCASE("usage errors") {
    CHECK(invoke({"run"}) == 2);
    CHECK(invoke({"frobnicate"}) == 2);
    CHECK(invoke({"run", kScenarios + "/ring3_routing.json", "--dt", "0"}) == 2);
  }
}

TEST_CASE("run subcommand reports divergence") {
  const fs::path dir = fixture::temp_dir("diverge");
  const auto file = fixture::write_file(
      dir / "blowup.json",
      R"({"graph": {"nodes": 2, "edges": [[1, 2]]},
          "exosystem": {"type": "gradient", "M": [[-10]], "w0": [1]},
          "plant": {"type": "inventory", "P": [[0], [0]], "x0": [0, 0]},
          "controller": {"type": "edge_im", "H": [[0]]},
          "sim": {"dt": 0.01, "horizon": 100, "record_every": 100}})");
  std::string output;
  CHECK(invoke({"run", file.string(), "--out", (dir / "out").string()}, &output) == 3);
  CHECK(output.find("diverged") != std::string::npos);
}

TEST_CASE("batch runs every scenario") {
  const fs::path dir = fixture::temp_dir("batch");
  const fs::path in = dir / "in";
  fs::create_directories(in);
  for (const char* name : {"ring3_bregman", "path4_tree_oracle"}) {
    fs::copy_file(kScenarios + "/" + name + ".json", in / (std::string(name) + ".json"));
  }
  CHECK(invoke({"run", "--batch", in.string(), "--out", (dir / "out").string(), "--horizon", "2"}) ==
        0);
  CHECK(fs::exists(dir / "out" / "ring3_bregman.csv"));
  CHECK(fs::exists(dir / "out" / "path4_tree_oracle.csv"));
}

TEST_CASE("oracle subcommand") {
  std::string output;
  CHECK(invoke({"oracle", kScenarios + "/ring3_bregman.json"}, &output) == 0);
  CHECK(output.find("oracle agrees") != std::string::npos);
  CHECK(invoke({"oracle", kScenarios + "/ring3_bregman_quartic.json"}) == 0);
  CHECK(invoke({"oracle", kScenarios + "/path4_tree_oracle.json"}) == 0);
  CHECK(invoke({"oracle", kScenarios + "/linear_passive_edge_im.json"}) == 2);
  // inventory but no cost section
  CHECK(invoke({"oracle", kScenarios + "/ring3_routing.json"}) == 2);
}

TEST_CASE("regulator subcommand") {
  std::string output;
  CHECK(invoke({"regulator", kScenarios + "/ring3_routing.json"}, &output) == 0);
  CHECK(output.find("rank condition    holds") != std::string::npos);
  CHECK(invoke({"regulator", kScenarios + "/linear_passive_edge_im.json"}) == 0);
  CHECK(invoke({"regulator", kScenarios + "/gradient_tanh_edge_im.json"}) == 2);
}
