#include "epinuts/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "epinuts/error.hpp"

namespace epinuts::svg {

namespace {

constexpr double kLeft = 64.0;
constexpr double kRight = 16.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 48.0;

struct Frame {
  double x_lo, x_hi, y_lo, y_hi;
  double width, height;

  double px(double x) const {
    const double span = x_hi > x_lo ? x_hi - x_lo : 1.0;
    return kLeft + (x - x_lo) / span * (width - kLeft - kRight);
  }
  double py(double y) const {
    const double span = y_hi > y_lo ? y_hi - y_lo : 1.0;
    return height - kBottom - (y - y_lo) / span * (height - kTop - kBottom);
  }
};

void check_length(std::size_t n, std::size_t expected, const char* what) {
  if (n != expected) {
    throw UsageError(fmt::format("chart {} has {} values for {} x positions", what, n, expected));
  }
}

std::string label_number(double v) {
  if (v == 0.0) return "0";
  const double a = std::abs(v);
  if (a >= 1e5 || a < 1e-3) return fmt::format("{:.1e}", v);
  return fmt::format("{:g}", v);
}

std::string polyline(const Frame& f, const std::vector<double>& x, const std::vector<double>& y) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(y[i])) continue;
    pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", f.px(x[i]), f.py(y[i]));
  }
  return pts;
}

}  // namespace

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        // Control characters are not allowed in XML 1.0 text.
        if (static_cast<unsigned char>(c) >= 0x20 || c == '\t' || c == '\n') out.push_back(c);
    }
  }
  return out;
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / std::max(target, 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return ticks;
}

std::string render(const Chart& c) {
  const std::size_t n = c.x.size();
  if (n == 0) throw UsageError("chart has no x positions");
  if (!c.x_labels.empty()) check_length(c.x_labels.size(), n, "x labels");
  double y_lo = 0.0;
  double y_hi = -std::numeric_limits<double>::infinity();
  auto extend = [&](const std::vector<double>& ys) {
    for (double v : ys) {
      if (!std::isfinite(v)) continue;
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  };
  for (const auto& b : c.bars) {
    check_length(b.y.size(), n, "bars");
    extend(b.y);
  }
  for (const auto& b : c.bands) {
    check_length(b.lower.size(), n, "band");
    check_length(b.upper.size(), n, "band");
    extend(b.lower);
    extend(b.upper);
  }
  for (const auto& l : c.lines) {
    check_length(l.y.size(), n, "line");
    extend(l.y);
  }
  if (c.reference_y) extend({*c.reference_y});
  if (!std::isfinite(y_hi) || y_hi <= y_lo) y_hi = y_lo + 1.0;
  const std::vector<double> y_ticks = nice_ticks(y_lo, y_hi * 1.05);
  y_hi = std::max(y_hi, y_ticks.back());

  const auto [x_min, x_max] = std::minmax_element(c.x.begin(), c.x.end());
  const Frame f{*x_min, *x_max, y_lo, y_hi, c.width, c.height};

  std::string s = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{3}</text>\n",
      c.width, c.height, c.width / 2.0, escape(c.title));

  // Grid and y axis.
  for (double t : y_ticks) {
    const double y = f.py(t);
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#e5e5e5\"/>\n",
                     kLeft, y, c.width - kRight, y);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6.0,
                     y + 4.0, escape(label_number(t)));
  }
  s += fmt::format("<text x=\"14\" y=\"{:.2f}\" transform=\"rotate(-90 14 {:.2f})\" text-anchor=\"middle\">{}</text>\n",
                   c.height / 2.0, c.height / 2.0, escape(c.y_label));

  // x ticks: about eight labels spread over the axis.
  const std::size_t stride = std::max<std::size_t>(1, n / 8);
  for (std::size_t i = 0; i < n; i += stride) {
    const double x = f.px(c.x[i]);
    const std::string label = c.x_labels.empty() ? label_number(c.x[i]) : c.x_labels[i];
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#555\"/>\n", x,
                     c.height - kBottom, c.height - kBottom + 4.0);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x,
                     c.height - kBottom + 16.0, escape(label));
  }

  // Bars sit under everything else.
  const double bar_w = std::max(1.0, (c.width - kLeft - kRight) / static_cast<double>(n) * 0.8);
  for (const auto& b : c.bars) {
    s += fmt::format("<g fill=\"{}\"><title>{}</title>\n", escape(b.color), escape(b.label));
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(b.y[i]) || b.y[i] <= 0.0) continue;
      const double top = f.py(b.y[i]);
      s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\"/>\n",
                       f.px(c.x[i]) - bar_w / 2.0, top, bar_w, f.py(0.0) - top);
    }
    s += "</g>\n";
  }
  for (const auto& b : c.bands) {
    std::string pts = polyline(f, c.x, b.upper);
    for (std::size_t i = n; i-- > 0;) {
      if (std::isfinite(b.lower[i])) pts += fmt::format(" {:.2f},{:.2f}", f.px(c.x[i]), f.py(b.lower[i]));
    }
    s += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"><title>{}</title></polygon>\n",
                     pts, escape(b.color), b.opacity, escape(b.label));
  }
  if (c.reference_y) {
    const double y = f.py(*c.reference_y);
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#888\" stroke-dasharray=\"2,3\"/>\n",
                     kLeft, y, c.width - kRight, y);
  }
  for (const auto& l : c.lines) {
    s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}><title>{}</title></polyline>\n",
                     polyline(f, c.x, l.y), escape(l.color), l.width,
                     l.dashed ? " stroke-dasharray=\"6,4\"" : "", escape(l.label));
  }
  for (const auto& m : c.markers) {
    if (m.x < f.x_lo || m.x > f.x_hi) continue;
    const double x = f.px(m.x);
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#c44e52\" stroke-dasharray=\"4,3\"/>\n",
                     x, kTop, c.height - kBottom);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" fill=\"#c44e52\" transform=\"rotate(-90 {:.2f} {:.2f})\" text-anchor=\"end\">{}</text>\n",
                     x + 10.0, kTop + 2.0, x + 10.0, kTop + 2.0, escape(m.label));
  }
  // Axes last so they stay on top.
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2:.2f}\" stroke=\"#222\"/>\n", kLeft, kTop,
                   c.height - kBottom);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#222\"/>\n", kLeft,
                   c.height - kBottom, c.width - kRight);
  s += "</svg>\n";
  return s;
}

}  // namespace epinuts::svg
