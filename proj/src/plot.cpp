#include "vnreg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace vnreg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round tick spacing covering [lo, hi] with about `target` intervals.
double TickStep(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string RenderSvg(const LinePlot& plot) {
  double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
  std::size_t x_max = 1;
  for (const auto& s : plot.series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
    x_max = std::max(x_max, s.y.size());
  }
  if (!std::isfinite(y_lo)) y_lo = 0, y_hi = 1;
  if (plot.zero_line) y_lo = std::min(y_lo, 0.0), y_hi = std::max(y_hi, 0.0);
  if (y_hi - y_lo < 1e-12) y_lo -= 0.5, y_hi += 0.5;
  const double y_step = TickStep(y_lo, y_hi, 6);
  y_lo = std::floor(y_lo / y_step) * y_step;
  y_hi = std::ceil(y_hi / y_step) * y_step;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x_max > 1 ? (x - 1) / (x_max - 1) : 0.5) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::ostringstream svg;
  svg << fmt::format(R"svg(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">)svg",
                     kWidth, kHeight, kWidth, kHeight)
      << '\n';
  svg << fmt::format(R"svg(<rect width="{}" height="{}" fill="white"/>)svg", kWidth, kHeight) << '\n';
  svg << fmt::format(R"svg(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)svg", kWidth / 2,
                     Escape(plot.title))
      << '\n';

  // Axes and ticks.
  svg << fmt::format(R"svg(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>)svg", kLeft, kTop, pw, ph)
      << '\n';
  for (double y = y_lo; y <= y_hi + y_step * 1e-9; y += y_step) {
    svg << fmt::format(R"svg(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="#ddd"/>)svg", kLeft, py(y),
                       kLeft + pw, py(y))
        << '\n';
    svg << fmt::format(R"svg(<text x="{:.2f}" y="{:.2f}" text-anchor="end">{:g}</text>)svg", kLeft - 6, py(y) + 4, y)
        << '\n';
  }
  const double x_step = TickStep(1, static_cast<double>(std::max<std::size_t>(x_max, 2)), 8);
  for (double x = x_step; x <= static_cast<double>(x_max) + 1e-9; x += x_step)
    svg << fmt::format(R"svg(<text x="{:.2f}" y="{:.2f}" text-anchor="middle">{:g}</text>)svg", px(x), kTop + ph + 18, x)
        << '\n';
  svg << fmt::format(R"svg(<text x="{}" y="{}" text-anchor="middle">{}</text>)svg", kLeft + pw / 2, kHeight - 12,
                     Escape(plot.x_label))
      << '\n';
  svg << fmt::format(R"svg(<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>)svg",
                     kTop + ph / 2, kTop + ph / 2, Escape(plot.y_label))
      << '\n';
  if (plot.zero_line && y_lo < 0 && y_hi > 0)
    svg << fmt::format(R"svg(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="#888" stroke-dasharray="4 3"/>)svg",
                       kLeft, py(0), kLeft + pw, py(0))
        << '\n';

  for (const auto& s : plot.series) {
    if (s.y.empty()) continue;
    svg << fmt::format(R"svg(<polyline fill="none" stroke="{}" stroke-width="{}" stroke-opacity="{}" points=")svg", s.color,
                       s.width, s.opacity);
    for (std::size_t i = 0; i < s.y.size(); ++i)
      svg << fmt::format("{}{:.2f},{:.2f}", i ? " " : "", px(static_cast<double>(i + 1)), py(s.y[i]));
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace vnreg
