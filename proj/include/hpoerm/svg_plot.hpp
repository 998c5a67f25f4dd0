#pragma once

// Dependency-free SVG line charts with optional logarithmic axes.

#include <string>
#include <vector>

namespace hpoerm {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_err;  // empty, or one half-width per point
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = true;
  bool log_y = true;
  int width = 640;
  int height = 420;
};

// Points that cannot be drawn (non-finite, or non-positive on a log axis)
// are skipped. A series with one drawable point becomes a single marker.
std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace hpoerm
