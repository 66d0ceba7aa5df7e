#pragma once

// Dependency-free SVG line charts with credible-interval ribbons.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epinuts::svg {

struct Band {
  std::vector<double> lower;
  std::vector<double> upper;
  std::string color = "#4c72b0";
  double opacity = 0.25;
  std::string label;
};

struct Line {
  std::vector<double> y;
  std::string color = "#1f3d7a";
  double width = 1.5;
  bool dashed = false;
  std::string label;
};

// Vertical bars, one per x position (observed counts).
struct Bars {
  std::vector<double> y;
  std::string color = "#b0b0b0";
  std::string label;
};

struct Marker {
  double x;
  std::string label;
};

struct Chart {
  std::string title;
  std::string y_label;
  // x positions; x_labels (same length, may be empty) label the ticks.
  std::vector<double> x;
  std::vector<std::string> x_labels;
  std::vector<Bars> bars;
  std::vector<Band> bands;
  std::vector<Line> lines;
  std::vector<Marker> markers;
  std::optional<double> reference_y;
  double width = 720.0;
  double height = 360.0;
};

std::string escape(std::string_view text);

// Evenly spaced round tick values covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

// Throws UsageError when series lengths disagree with x.
std::string render(const Chart& chart);

}  // namespace epinuts::svg
