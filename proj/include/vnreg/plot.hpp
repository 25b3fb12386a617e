#pragma once

#include <string>
#include <vector>

namespace vnreg {

struct PlotSeries {
  std::vector<double> y;  // plotted at x = 1, 2, ...
  std::string color = "#000000";
  double width = 1.5;
  double opacity = 1.0;
};

struct LinePlot {
  std::string title;
  std::string x_label = "k";
  std::string y_label;
  std::vector<PlotSeries> series;  // drawn in order
  bool zero_line = false;
};

// Self-contained SVG document.
std::string RenderSvg(const LinePlot& plot);

}  // namespace vnreg
