#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace msfair {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  enum class Style { Line, Step, Markers } style = Style::Line;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

/// Static SVG with axes, five ticks per axis, a legend and one colour per series.
void write_svg_plot(std::ostream& out, const PlotSpec& plot);

std::string xml_escape(const std::string& text);

}  // namespace msfair
