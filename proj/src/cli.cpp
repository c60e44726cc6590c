#include "flowagree/cli.hpp"

#include "flowagree/csv.hpp"
#include "flowagree/errors.hpp"
#include "flowagree/optimizer.hpp"
#include "flowagree/regulator.hpp"
#include "flowagree/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

namespace flowagree::cli {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

const Eigen::IOFormat kMatrixFormat(6, 0, ", ", "\n", "  [", "]");

json number_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& item : items) s += (s.empty() ? "" : "; ") + item;
  return s;
}

class Table {
 public:
  explicit Table(std::ostream& out) : out_(out) {}

  void row(const std::string& check, bool pass, const std::string& detail = "") {
    failed_ = failed_ || !pass;
    print(check, pass ? "PASS" : "FAIL", detail);
  }
  void skip(const std::string& check, const std::string& detail) { print(check, "SKIP", detail); }
  bool failed() const { return failed_; }

 private:
  void print(const std::string& check, const char* verdict, const std::string& detail) {
    char head[64];
    if (detail.empty()) {
      std::snprintf(head, sizeof head, "%-22s %s", check.c_str(), verdict);
      out_ << head << '\n';
      return;
    }
    std::snprintf(head, sizeof head, "%-22s %-5s", check.c_str(), verdict);
    out_ << head << ' ' << detail << '\n';
  }
  std::ostream& out_;
  bool failed_ = false;
};

// Loads a scenario, mapping failures onto exit codes.
std::optional<Scenario> load(const std::string& path, std::ostream& out, int& code) {
  try {
    return load_scenario(path);
  } catch (const ParseError& e) {
    out << "parse error: " << e.what() << '\n';
    code = kParseError;
  } catch (const Error& e) {
    out << "invalid scenario: " << e.what() << '\n';
    code = kValidationFailed;
  }
  return std::nullopt;
}

fs::path default_out_dir() {
  if (const char* env = std::getenv("FLOWAGREE_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "flowagree_out";
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

}  // namespace

int validate_command(const std::string& path, std::ostream& out) {
  int code = kOk;
  const auto sc = load(path, out, code);
  if (!sc) return code;

  Table table(out);
  table.row("graph.connected", sc->graph.is_connected(),
            sc->graph.is_connected() ? "" : "graph has more than one component");
  if (sc->weights) {
    try {
      weighted_laplacian(sc->graph, *sc->weights);
      table.row("graph.weights", true);
    } catch (const Error& e) {
      table.row("graph.weights", false, e.what());
    }
  }
  const auto exo_issues = validate(sc->exosystem, sc->seed);
  table.row("exosystem", exo_issues.empty(), join(exo_issues));
  const auto plant_issues = validate(sc->plant, sc->seed);
  table.row("plant", plant_issues.empty(), join(plant_issues));
  if (sc->cost) {
    const bool sized = sc->cost->edge_count() == sc->graph.edge_count();
    table.row("cost", sized, sized ? "" : "cost needs one component per edge");
  }

  std::optional<Controller> controller;
  try {
    controller = build_controller(*sc);
    const auto issues = validate(*controller);
    table.row("controller", issues.empty(), join(issues));
  } catch (const Error& e) {
    table.row("controller", false, e.what());
  }

  const auto model = sc->plant.linear_model();
  if (model && sc->controller.type != "bregman") {
    try {
      const auto rank = rank_feasibility(model->A, model->G, model->C,
                                         sc->exosystem.linear_part(), sc->graph,
                                         sc->plant.output_dim());
      std::string detail;
      for (const auto& mu : rank.failing) {
        detail += (detail.empty() ? "fails at eigenvalue " : ", ") + format_double(mu.real()) +
                  (mu.imag() < 0 ? "" : "+") + format_double(mu.imag()) + "i";
      }
      table.row("regulator.rank", rank.feasible, detail);
    } catch (const Error& e) {
      table.row("regulator.rank", false, e.what());
    }
  } else {
    table.skip("regulator.rank", "no linear regulator problem for this plant/controller");
  }

  if (controller) {
    try {
      const ClosedLoop loop = build_loop(*sc);
      initial_state(*sc, loop);
      table.row("assembly", true);
    } catch (const Error& e) {
      table.row("assembly", false, e.what());
    }
  } else {
    table.skip("assembly", "controller could not be built");
  }
  out << (table.failed() ? "validation failed" : "all checks passed") << '\n';
  return table.failed() ? kValidationFailed : kOk;
}

int run_command(const std::string& path, const RunOverrides& overrides, std::ostream& out) {
  int code = kOk;
  auto sc = load(path, out, code);
  if (!sc) return code;
  if (overrides.dt) sc->sim.dt = *overrides.dt;
  if (overrides.horizon) sc->sim.horizon = *overrides.horizon;
  if (!(sc->sim.dt > 0.0) || !(sc->sim.horizon >= 0.0)) {
    out << "invalid overrides: dt must be positive and horizon nonnegative\n";
    return kParseError;
  }

  std::optional<ClosedLoop> loop;
  Trajectory traj;
  try {
    loop = build_loop(*sc);
    traj = run(*loop, initial_state(*sc, *loop), sc->sim);
  } catch (const Error& e) {
    out << sc->name << ": " << e.what() << '\n';
    return kValidationFailed;
  }

  fs::path csv_path, report_path;
  if (!overrides.out_dir.empty()) {
    csv_path = fs::path(overrides.out_dir) / (sc->name + ".csv");
    report_path = fs::path(overrides.out_dir) / (sc->name + ".json");
  } else {
    csv_path = sc->outputs.csv.empty() ? default_out_dir() / (sc->name + ".csv")
                                       : fs::path(sc->outputs.csv);
    report_path = sc->outputs.report.empty() ? default_out_dir() / (sc->name + ".json")
                                             : fs::path(sc->outputs.report);
  }

  const auto violation = dissipation_check(traj);
  const std::size_t last = traj.size() - 1;
  json report = {
      {"scenario", sc->name},
      {"dt", sc->sim.dt},
      {"horizon", sc->sim.horizon},
      {"samples", traj.size()},
      {"initial", {{"agreement_error", number_or_null(traj.agreement_error.front())}}},
      {"final",
       {{"t", traj.times[last]},
        {"agreement_error", number_or_null(traj.agreement_error[last])},
        {"routing_error", number_or_null(traj.routing_error[last])},
        {"gamma_dist", number_or_null(traj.gamma_dist[last])},
        {"lyapunov", number_or_null(traj.lyapunov[last])}}},
      {"max_state_norm", number_or_null(traj.max_state_norm)},
      {"dissipation_max_violation", violation ? number_or_null(*violation) : json(nullptr)},
      {"diverged", traj.diverged},
      {"divergence_time", traj.diverged ? json(traj.divergence_time) : json(nullptr)},
      {"csv", csv_path.string()},
  };
  try {
    ensure_parent(csv_path);
    ensure_parent(report_path);
    write_trajectory_csv(csv_path.string(), *loop, traj);
    std::ofstream rep(report_path);
    if (!rep) throw Error("cannot open " + report_path.string());
    rep << report.dump(2) << '\n';
  } catch (const std::exception& e) {
    out << sc->name << ": " << e.what() << '\n';
    return kValidationFailed;
  }

  out << sc->name << ": " << traj.size() << " samples, t = " << traj.times[last]
      << ", agreement_error = " << format_double(traj.agreement_error[last])
      << ", routing_error = " << format_double(traj.routing_error[last]);
  if (violation) out << ", dissipation violation = " << format_double(*violation);
  out << '\n';
  if (traj.diverged) {
    out << sc->name << ": diverged at t = " << traj.divergence_time << '\n';
    return kDiverged;
  }
  out << "wrote " << csv_path.string() << " and " << report_path.string() << '\n';
  return kOk;
}

int batch_command(const std::string& dir, const RunOverrides& overrides, std::ostream& out) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  if (ec) {
    out << "cannot read directory " << dir << ": " << ec.message() << '\n';
    return kParseError;
  }
  std::sort(files.begin(), files.end());

  struct Outcome {
    int code;
    std::string log;
  };
  std::vector<std::future<Outcome>> jobs;
  for (const auto& file : files) {
    jobs.push_back(std::async(std::launch::async, [file, &overrides] {
      std::ostringstream log;
      const int code = run_command(file.string(), overrides, log);
      return Outcome{code, log.str()};
    }));
  }
  int worst = kOk;
  for (auto& job : jobs) {
    const Outcome outcome = job.get();
    out << outcome.log;
    worst = std::max(worst, outcome.code);
  }
  out << files.size() << " scenario(s), worst exit code " << worst << '\n';
  return worst;
}

int oracle_command(const std::string& path, std::ostream& out) {
  int code = kOk;
  const auto sc = load(path, out, code);
  if (!sc) return code;
  if (sc->plant.kind() != PlantKind::Inventory) {
    out << "oracle comparison needs an inventory plant\n";
    return kParseError;
  }
  if (!sc->cost) {
    out << "oracle comparison needs a cost section\n";
    return kParseError;
  }
  try {
    const VectorXd supply = sc->plant.supply_matrix() * sc->w0;
    const KktPoint kkt = solve_static(sc->graph, *sc->cost, supply);
    const VectorXd reference = oracle_projected_gradient(sc->graph, *sc->cost, supply);
    const double gap = sc->graph.edge_count() ? (kkt.lambda - reference).cwiseAbs().maxCoeff() : 0.0;
    const KktResidual res = kkt_residual(kkt, sc->graph, *sc->cost);
    const Eigen::IOFormat row(Eigen::FullPrecision, Eigen::DontAlignCols, ", ", ", ", "", "", "[", "]");
    out << "supply            " << supply.transpose().format(row) << '\n'
        << "solve_static      " << kkt.lambda.transpose().format(row) << '\n'
        << "projected_grad    " << reference.transpose().format(row) << '\n'
        << "gap_inf           " << format_double(gap) << '\n'
        << "kkt_stationarity  " << format_double(res.stationarity) << '\n'
        << "kkt_feasibility   " << format_double(res.feasibility) << '\n';
    out << (gap <= 1e-5 ? "oracle agrees" : "oracle gap exceeds 1e-5") << '\n';
    return gap <= 1e-5 ? kOk : kValidationFailed;
  } catch (const Error& e) {
    out << "static problem failed: " << e.what() << '\n';
    return kValidationFailed;
  }
}

int regulator_command(const std::string& path, std::ostream& out) {
  int code = kOk;
  const auto sc = load(path, out, code);
  if (!sc) return code;
  const auto model = sc->plant.linear_model();
  if (!model) {
    out << "regulator equations need a linear plant\n";
    return kParseError;
  }
  const MatrixXd S = sc->exosystem.linear_part();
  const int p = sc->plant.output_dim();
  try {
    const RankFeasibility rank = rank_feasibility(model->A, model->G, model->C, S, sc->graph, p);
    out << "rank condition    " << (rank.feasible ? "holds" : "fails") << '\n';
    const RegulatorSolution sol = solve_sylvester(model->A, model->G, model->C, model->P, S,
                                                  sc->graph, p);
    out << "Pi =\n" << sol.Pi.format(kMatrixFormat) << '\n'
        << "Gamma =\n" << sol.Gamma.format(kMatrixFormat) << '\n'
        << "H =\n" << sol.H.format(kMatrixFormat) << '\n'
        << "sylvester residual  " << format_double(sol.sylvester_residual) << '\n'
        << "agreement residual  " << format_double(sol.agreement_residual) << '\n'
        << "flow residual       " << format_double(sol.flow_residual) << '\n'
        << "flow constrained    " << (sol.flow_constrained ? "yes" : "no") << '\n';
    if (sc->plant.kind() == PlantKind::Inventory) {
      const FeedforwardMaps maps = compute_H(sc->graph, sc->edge_weights(), sc->plant.supply_matrix());
      out << "H_flow (weighted) =\n" << maps.flow.format(kMatrixFormat) << '\n'
          << "H_dual (weighted) =\n" << maps.dual.format(kMatrixFormat) << '\n';
    }
    return kOk;
  } catch (const Error& e) {
    out << "regulator: " << e.what() << '\n';
    return kValidationFailed;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed flow-agreement controllers on networks", "flowagree"};
  app.require_subcommand(1);

  std::string file;
  RunOverrides overrides;
  std::string batch_dir;
  double dt = 0.0, horizon = 0.0;

  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario and print a pass/fail table");
  validate_cmd->add_option("file", file, "Scenario JSON")->required();
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario, write CSV and report");
  run_cmd->add_option("file", file, "Scenario JSON");
  auto* dt_opt = run_cmd->add_option("--dt", dt, "Override the step size");
  auto* horizon_opt = run_cmd->add_option("--horizon", horizon, "Override the horizon");
  run_cmd->add_option("--out", overrides.out_dir, "Output directory");
  run_cmd->add_option("--batch", batch_dir, "Run every scenario in a directory");
  auto* oracle_cmd = app.add_subcommand("oracle", "Compare the static solver with projected gradient");
  oracle_cmd->add_option("file", file, "Scenario JSON")->required();
  auto* regulator_cmd = app.add_subcommand("regulator", "Solve and report the regulator equations");
  regulator_cmd->add_option("file", file, "Scenario JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kParseError;
  }

  if (*dt_opt) overrides.dt = dt;
  if (*horizon_opt) overrides.horizon = horizon;

  if (*validate_cmd) return validate_command(file, out);
  if (*oracle_cmd) return oracle_command(file, out);
  if (*regulator_cmd) return regulator_command(file, out);
  if (*run_cmd) {
    if (file.empty() == batch_dir.empty()) {
      err << "run needs either a scenario file or --batch <dir>\n";
      return kParseError;
    }
    return batch_dir.empty() ? run_command(file, overrides, out)
                             : batch_command(batch_dir, overrides, out);
  }
  return kParseError;
}

}  // namespace flowagree::cli
