#pragma once

#include "flowagree/sim.hpp"

#include <string>
#include <vector>

namespace flowagree {

/// Column names of the trajectory CSV for this loop.
std::vector<std::string> trajectory_header(const ClosedLoop& loop);

/// Writes one row per recorded sample, numbers with 17 significant digits
/// so that parsing the file back reproduces every value exactly.
void write_trajectory_csv(const std::string& path, const ClosedLoop& loop,
                          const Trajectory& trajectory);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws ParseError if absent.
  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace flowagree
