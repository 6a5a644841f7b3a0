#include "msfair/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "msfair/format.hpp"

namespace msfair {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 460.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 180.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string px(double v) { return format_fixed(v, 1); }

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

int tick_digits(double span) {
  if (span >= 10) return 0;
  if (span >= 1) return 1;
  if (span >= 0.1) return 2;
  return 3;
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_svg_plot(std::ostream& out, const PlotSpec& plot) {
  Range xr, yr;
  for (const auto& s : plot.series) {
    for (const auto& [x, y] : s.points) {
      if (std::isfinite(x) && std::isfinite(y)) {
        xr.add(x);
        yr.add(y);
      }
    }
  }
  xr.finish();
  yr.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(kWidth) << "\" height=\"" << px(kHeight)
      << "\" viewBox=\"0 0 " << px(kWidth) << ' ' << px(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << px(kWidth) << "\" height=\"" << px(kHeight) << "\" fill=\"white\"/>\n";
  out << "  <text x=\"" << px(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(plot.title) << "</text>\n";

  // Axes, ticks and grid.
  out << "  <g stroke=\"#333\" fill=\"none\">\n";
  out << "    <rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\"" << px(pw) << "\" height=\"" << px(ph)
      << "\"/>\n";
  out << "  </g>\n  <g font-size=\"11\">\n";
  const int xd = tick_digits(xr.hi - xr.lo), yd = tick_digits(yr.hi - yr.lo);
  for (int t = 0; t <= 4; ++t) {
    const double xv = xr.lo + (xr.hi - xr.lo) * t / 4.0, yv = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    out << "    <line x1=\"" << px(sx(xv)) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(sx(xv)) << "\" y2=\""
        << px(kTop + ph) << "\" stroke=\"#ddd\"/>\n";
    out << "    <text x=\"" << px(sx(xv)) << "\" y=\"" << px(kTop + ph + 16) << "\" text-anchor=\"middle\">"
        << format_fixed(xv, xd) << "</text>\n";
    out << "    <line x1=\"" << px(kLeft) << "\" y1=\"" << px(sy(yv)) << "\" x2=\"" << px(kLeft + pw) << "\" y2=\""
        << px(sy(yv)) << "\" stroke=\"#ddd\"/>\n";
    out << "    <text x=\"" << px(kLeft - 6) << "\" y=\"" << px(sy(yv) + 4) << "\" text-anchor=\"end\">"
        << format_fixed(yv, yd) << "</text>\n";
  }
  out << "  </g>\n";
  out << "  <text x=\"" << px(kLeft + pw / 2) << "\" y=\"" << px(kHeight - 14) << "\" text-anchor=\"middle\">"
      << xml_escape(plot.x_label) << "</text>\n";
  out << "  <text transform=\"translate(18," << px(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(plot.y_label) << "</text>\n";

  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const auto& s = plot.series[i];
    const char* colour = kPalette[i % kPalette.size()];
    out << "  <g>\n    <title>" << xml_escape(s.label) << "</title>\n";
    if (s.style == PlotSeries::Style::Markers) {
      // Points that land on the same half pixel are drawn once.
      std::set<std::pair<long, long>> seen;
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        const double cx = sx(x), cy = sy(y);
        if (!seen.emplace(std::lround(cx * 2), std::lround(cy * 2)).second) continue;
        out << "    <circle cx=\"" << px(cx) << "\" cy=\"" << px(cy) << "\" r=\"2\" fill=\"" << colour
            << "\" fill-opacity=\"0.5\"/>\n";
      }
    } else if (!s.points.empty()) {
      std::string d;
      double last_x = 0.0, last_y = 0.0;
      bool first = true;
      const auto move = [&](double x, double y) {
        const double cx = sx(x), cy = sy(y);
        if (!first && std::abs(cx - last_x) < 0.25 && std::abs(cy - last_y) < 0.25) return;
        d += (first ? "M" : " L") + px(cx) + "," + px(cy);
        first = false;
        last_x = cx;
        last_y = cy;
      };
      double prev_y = s.style == PlotSeries::Style::Step ? 0.0 : s.points.front().second;
      if (s.style == PlotSeries::Style::Step) move(s.points.front().first, 0.0);
      for (const auto& [x, y] : s.points) {
        if (s.style == PlotSeries::Style::Step) move(x, prev_y);
        move(x, y);
        prev_y = y;
      }
      out << "    <path d=\"" << d << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kTop + 12 + 18.0 * static_cast<double>(i);
    const double lx = kLeft + pw + 14;
    out << "    <rect x=\"" << px(lx) << "\" y=\"" << px(ly - 9) << "\" width=\"12\" height=\"12\" fill=\"" << colour
        << "\"/>\n";
    out << "    <text x=\"" << px(lx + 18) << "\" y=\"" << px(ly + 1) << "\">" << xml_escape(s.label) << "</text>\n";
    out << "  </g>\n";
  }
  out << "</svg>\n";
}

}  // namespace msfair
