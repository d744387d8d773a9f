#pragma once

#include <string>
#include <vector>

#include "mcua/errors.hpp"

namespace mcua {

struct SvgSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

// Self-contained SVG line chart (axes, ticks, legend). log_x plots x on a
// log10 axis, which suits threshold grids spanning decades.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgSeries>& series,
                              bool log_x = false);

}  // namespace mcua
