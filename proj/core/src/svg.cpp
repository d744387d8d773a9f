#include "mcua/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcua/csv.hpp"

namespace mcua {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string escape_text(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgSeries>& series,
                              bool log_x) {
  if (series.empty()) throw ValidationError("render_line_chart: no series");

  const double width = 760, height = 460;
  const double ml = 70, mr = 20, mt = 48, mb = 56;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;

  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) {
      throw ValidationError("render_line_chart: series '" + s.label + "' xs/ys length mismatch");
    }
    for (size_t i = 0; i < s.xs.size(); ++i) {
      double x = s.xs[i];
      if (log_x) {
        if (!(x > 0.0)) throw ValidationError("render_line_chart: log axis needs positive x");
        x = std::log10(x);
      }
      const double y = s.ys[i];
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw ValidationError("render_line_chart: non-finite data point");
      }
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (first) throw ValidationError("render_line_chart: all series empty");
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  } else {
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
  }

  auto sx = [&](double x) {
    if (log_x) x = std::log10(x);
    return ml + (x - xmin) / (xmax - xmin) * plot_w;
  };
  auto sy = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
      << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << escape_text(title) << "</text>\n";

  // frame
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";

  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double fx = xmin + (xmax - xmin) * t / ticks;
    const double px = ml + plot_w * t / ticks;
    const double label_val = log_x ? std::pow(10.0, fx) : fx;
    out << "<line x1=\"" << px << "\" y1=\"" << mt + plot_h << "\" x2=\"" << px << "\" y2=\""
        << mt + plot_h + 5 << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << mt + plot_h + 20
        << "\" text-anchor=\"middle\">" << num(label_val) << "</text>\n";

    const double fy = ymin + (ymax - ymin) * t / ticks;
    const double py = mt + plot_h * (1.0 - static_cast<double>(t) / ticks);
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << py << "\" x2=\"" << ml << "\" y2=\"" << py
        << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << num(fy)
        << "</text>\n";
  }
  out << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << escape_text(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << mt + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << mt + plot_h / 2 << ")\">" << escape_text(y_label) << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.xs.empty()) continue;
    const char* color = kPalette[si % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < s.xs.size(); ++i) {
      if (i) out << " ";
      out << num(sx(s.xs[i])) << "," << num(sy(s.ys[i]));
    }
    out << "\"/>\n";
    for (size_t i = 0; i < s.xs.size(); ++i) {
      out << "<circle cx=\"" << num(sx(s.xs[i])) << "\" cy=\"" << num(sy(s.ys[i]))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    // legend
    const double ly = mt + 16 + 18 * static_cast<double>(si);
    out << "<line x1=\"" << ml + plot_w - 150 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << ml + plot_w - 126 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + plot_w - 120 << "\" y=\"" << ly << "\">" << escape_text(s.label)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace mcua
