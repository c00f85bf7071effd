#pragma once

// Dependency-free SVG rendering for the report command.

#include <string>
#include <utility>
#include <vector>

namespace dyngen {

struct Series {
  std::string name;
  std::vector<double> values;  // y at x = 1, 2, ...
};

/// Line chart of one or more series sharing the x axis. Non-finite points are skipped.
std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series);

/// Two-column table of (name, formatted value) rows.
std::string table_svg(const std::string& title, const std::vector<std::pair<std::string, std::string>>& rows);

}  // namespace dyngen
