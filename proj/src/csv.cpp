#include "flowagree/csv.hpp"

#include "flowagree/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace flowagree {

namespace {

void append_numbered(std::vector<std::string>& header, const std::string& prefix, int count) {
  for (int i = 1; i <= count; ++i) header.push_back(prefix + std::to_string(i));
}

void put(std::string& line, double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  if (!line.empty()) line += ',';
  line += buf;
}

}  // namespace

std::vector<std::string> trajectory_header(const ClosedLoop& loop) {
  std::vector<std::string> header{"t"};
  append_numbered(header, "w_", loop.w_dim());
  append_numbered(header, "x_", loop.x_dim());
  append_numbered(header, "eta_", loop.xi_dim());
  append_numbered(header, "lambda_", loop.controller().input_dim());
  for (const char* name : {"agreement_error", "routing_error", "gamma_dist", "lyapunov"}) {
    header.emplace_back(name);
  }
  return header;
}

void write_trajectory_csv(const std::string& path, const ClosedLoop& loop,
                          const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  const auto header = trajectory_header(loop);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  std::string line;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    line.clear();
    put(line, traj.times[k]);
    for (const auto* block : {&traj.w[k], &traj.x[k], &traj.xi[k], &traj.lambda[k]}) {
      for (Eigen::Index i = 0; i < block->size(); ++i) put(line, (*block)(i));
    }
    put(line, traj.agreement_error[k]);
    put(line, traj.routing_error[k]);
    put(line, traj.gamma_dist[k]);
    put(line, traj.lyapunov[k]);
    out << line << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ParseError("CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t j = column_index(name);
  std::vector<double> values;
  values.reserve(rows.size());
  for (const auto& row : rows) values.push_back(row[j]);
  return values;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      row.push_back(value);
    }
    if (row.size() != table.header.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " fields");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace flowagree
