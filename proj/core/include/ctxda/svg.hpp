#pragma once

#include <span>
#include <string>
#include <vector>

namespace ctxda {

/// Standalone SVG bar chart, one bar per value.
std::string bar_chart_svg(const std::string& title, std::span<const std::string> labels,
                          std::span<const double> values);

struct LineSeries {
  std::string name;
  std::vector<double> values;
};

/// Standalone SVG line chart; all series share the x axis (point index).
std::string line_chart_svg(const std::string& title, std::span<const LineSeries> series);

}  // namespace ctxda
