#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ncs/error.hpp"

// Minimal hand-rolled SVG line/scatter plots. Output is deterministic: all
// numbers go through fixed printf formats.

namespace ncs {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool line = true;  // false: markers only
};

inline std::string render_svg_plot(const std::string& title, const std::string& xlabel,
                                   const std::string& ylabel,
                                   const std::vector<PlotSeries>& series) {
  require(!series.empty(), "plot needs at least one series");

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  require(!first, "plot needs at least one point");
  if (xmax - xmin < 1e-300) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (ymax - ymin < 1e-300) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double xpad = 0.04 * (xmax - xmin), ypad = 0.06 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;

  const double w = 860, h = 520, l = 78, r = 840, top = 46, bot = 470;
  auto px = [&](double x) { return l + (x - xmin) / (xmax - xmin) * (r - l); };
  auto py = [&](double y) { return bot - (y - ymin) / (ymax - ymin) * (bot - top); };

  char buf[160];
  std::ostringstream os;
  auto f2 = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto g4 = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"16\">" << title << "</text>\n";

  const int nx = 6, ny = 5;
  for (int i = 0; i <= nx; ++i) {
    const double x = xmin + (xmax - xmin) * i / nx;
    os << "<line x1=\"" << f2(px(x)) << "\" y1=\"" << f2(top) << "\" x2=\"" << f2(px(x))
       << "\" y2=\"" << f2(bot) << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << f2(px(x)) << "\" y=\"" << f2(bot + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << g4(x)
       << "</text>\n";
  }
  for (int i = 0; i <= ny; ++i) {
    const double y = ymin + (ymax - ymin) * i / ny;
    os << "<line x1=\"" << f2(l) << "\" y1=\"" << f2(py(y)) << "\" x2=\"" << f2(r)
       << "\" y2=\"" << f2(py(y)) << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << f2(l - 6) << "\" y=\"" << f2(py(y) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << g4(y)
       << "</text>\n";
  }
  os << "<rect x=\"" << l << "\" y=\"" << top << "\" width=\"" << r - l << "\" height=\""
     << bot - top << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (l + r) / 2 << "\" y=\"" << h - 14
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xlabel
     << "</text>\n";
  os << "<text x=\"20\" y=\"" << (top + bot) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
     << " transform=\"rotate(-90 20 " << (top + bot) / 2 << ")\">" << ylabel << "</text>\n";

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 6];
    if (series[s].line && series[s].points.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : series[s].points) os << f2(px(x)) << "," << f2(py(y)) << " ";
      os << "\"/>\n";
    } else {
      for (const auto& [x, y] : series[s].points)
        os << "<circle cx=\"" << f2(px(x)) << "\" cy=\"" << f2(py(y))
           << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    }
    if (series.size() > 1) {
      const double ly = top + 16 + 16 * static_cast<double>(s);
      os << "<line x1=\"" << r - 150 << "\" y1=\"" << f2(ly - 4) << "\" x2=\"" << r - 126
         << "\" y2=\"" << f2(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << r - 120 << "\" y=\"" << f2(ly)
         << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[s].label
         << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ncs
