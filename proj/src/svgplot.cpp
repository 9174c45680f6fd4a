#include "anomaly/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace anomaly {

namespace {

constexpr double kWidth = 960.0;
constexpr double kPanelHeight = 150.0;
constexpr double kPanelGap = 34.0;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 28.0;

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Panel {
  double top;
  double lo, hi;  // value range

  double x(std::size_t i, std::size_t n) const {
    double span = kWidth - kMarginLeft - kMarginRight;
    if (n <= 1) return kMarginLeft + span / 2.0;
    return kMarginLeft + span * static_cast<double>(i) / static_cast<double>(n - 1);
  }

  double y(double v) const {
    double clamped = std::clamp(v, lo, hi);
    return top + kPanelHeight - kPanelHeight * (clamped - lo) / (hi - lo);
  }
};

Panel make_panel(double top, double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {top, lo, hi};
}

void draw_frame(std::string& svg, const Panel& p, const std::string& title) {
  svg += "<rect x=\"" + num(kMarginLeft) + "\" y=\"" + num(p.top) + "\" width=\"" +
         num(kWidth - kMarginLeft - kMarginRight) + "\" height=\"" + num(kPanelHeight) +
         "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
  svg += "<text x=\"" + num(kMarginLeft) + "\" y=\"" + num(p.top - 6.0) +
         "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">" + title +
         "</text>\n";
  svg += "<text x=\"" + num(kMarginLeft - 6.0) + "\" y=\"" + num(p.top + 10.0) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" "
         "fill=\"#666666\">" +
         label(p.hi) + "</text>\n";
  svg += "<text x=\"" + num(kMarginLeft - 6.0) + "\" y=\"" + num(p.top + kPanelHeight) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" "
         "fill=\"#666666\">" +
         label(p.lo) + "</text>\n";
}

template <typename Get>
void draw_line(std::string& svg, const Panel& p, std::size_t n, Get&& get,
               const std::string& color) {
  if (n == 1) {
    svg += "<circle cx=\"" + num(p.x(0, n)) + "\" cy=\"" + num(p.y(get(0))) +
           "\" r=\"3\" fill=\"" + color + "\"/>\n";
    return;
  }
  svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    svg += num(p.x(i, n)) + "," + num(p.y(get(i)));
    if (i + 1 < n) svg += ' ';
  }
  svg += "\"/>\n";
}

}  // namespace

std::string render_detection_svg(const DetectionTable& detections, double threshold) {
  const auto& records = detections.records;
  const std::size_t n = records.size();
  if (n == 0) {
    throw std::invalid_argument("render_detection_svg: no records");
  }
  const std::size_t dims = detections.dim_names.size();
  const std::size_t panels = dims + 1;
  const double height = kMarginTop + panels * (kPanelHeight + kPanelGap);

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
                    "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(kWidth) + " " +
                    num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t d = 0; d < dims; ++d) {
    double lo = records[0].raw_values[d];
    double hi = lo;
    for (const auto& r : records) {
      lo = std::min(lo, r.raw_values[d]);
      hi = std::max(hi, r.raw_values[d]);
    }
    Panel p = make_panel(kMarginTop + static_cast<double>(d) * (kPanelHeight + kPanelGap),
                         lo, hi);
    draw_frame(svg, p, detections.dim_names[d]);
    draw_line(
        svg, p, n, [&](std::size_t i) { return records[i].raw_values[d]; }, "#1f77b4");
  }

  // Combined panel: error rescaled to its own range, likelihood on [0, 1].
  double err_lo = records[0].error;
  double err_hi = err_lo;
  for (const auto& r : records) {
    err_lo = std::min(err_lo, r.error);
    err_hi = std::max(err_hi, r.error);
  }
  Panel err_panel = make_panel(
      kMarginTop + static_cast<double>(dims) * (kPanelHeight + kPanelGap), err_lo, err_hi);
  Panel lik_panel = make_panel(err_panel.top, 0.0, 1.0);
  draw_frame(svg, err_panel,
             "reconstruction error (orange), anomaly likelihood (green), flags (red)");
  draw_line(
      svg, err_panel, n, [&](std::size_t i) { return records[i].error; }, "#ff7f0e");
  draw_line(
      svg, lik_panel, n, [&](std::size_t i) { return records[i].likelihood; }, "#2ca02c");

  double ty = lik_panel.y(threshold);
  svg += "<line x1=\"" + num(kMarginLeft) + "\" y1=\"" + num(ty) + "\" x2=\"" +
         num(kWidth - kMarginRight) + "\" y2=\"" + num(ty) +
         "\" stroke=\"#999999\" stroke-dasharray=\"4,3\"/>\n";

  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].flagged) {
      svg += "<circle cx=\"" + num(lik_panel.x(i, n)) + "\" cy=\"" +
             num(lik_panel.y(records[i].likelihood)) + "\" r=\"3\" fill=\"#d62728\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace anomaly
