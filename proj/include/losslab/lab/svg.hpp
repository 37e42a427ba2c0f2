#pragma once

// Plain SVG charts for exported records. Output is a pure function of the
// record, so re-exporting gives identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "losslab/lab/record.hpp"

namespace losslab::lab {

namespace svg_detail {

inline constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 150, kTop = 30, kBottom = 40;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
}

inline std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n" +
         "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n" +
         "<text x=\"" + num(kLeft) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" + escape(title) +
         "</text>\n";
}

inline std::string axes(const Frame& f, const std::string& xlabel) {
  std::string out;
  const double xa = kLeft, xb = kWidth - kRight, ya = kHeight - kBottom, yb = kTop;
  out += "<path d=\"M" + num(xa) + " " + num(yb) + " L" + num(xa) + " " + num(ya) + " L" + num(xb) + " " + num(ya) +
         "\" stroke=\"black\" fill=\"none\"/>\n";
  auto text = [&](double x, double y, const std::string& anchor, const std::string& s) {
    out += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + escape(s) + "</text>\n";
  };
  text(xa, ya + 14, "middle", label_num(f.x0));
  text(xb, ya + 14, "middle", label_num(f.x1));
  text(xa - 4, ya, "end", label_num(f.y0));
  text(xa - 4, yb + 8, "end", label_num(f.y1));
  text((xa + xb) / 2, ya + 30, "middle", xlabel);
  return out;
}

inline const char* colour(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  return palette[i % 7];
}

inline std::string histogram_body(const Table& t) {
  const auto lefts = t.values("bin_left");
  const auto rights = t.values("bin_right");
  const auto counts = t.values("count");
  Frame f{lefts.empty() ? 0.0 : lefts.front(), rights.empty() ? 1.0 : rights.back(), 0.0, 0.0};
  for (double c : counts) f.y1 = std::max(f.y1, c);
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);
  std::string out = axes(f, "loss");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] <= 0) continue;
    const double x = f.px(lefts[i]), w = std::max(f.px(rights[i]) - x, 0.5), y = f.py(counts[i]);
    out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
           num(f.py(0.0) - y) + "\" fill=\"#1f77b4\"/>\n";
  }
  return out;
}

inline std::string lines_body(const Table& t, std::vector<std::string> series) {
  if (series.empty())
    for (std::size_t c = 1; c < t.columns.size(); ++c) series.push_back(t.columns[c]);
  Frame f{INFINITY, -INFINITY, INFINITY, -INFINITY};
  const auto xs = t.values(t.columns.front());
  for (double x : xs)
    if (std::isfinite(x)) f.x0 = std::min(f.x0, x), f.x1 = std::max(f.x1, x);
  for (const auto& s : series)
    for (double y : t.values(s))
      if (std::isfinite(y)) f.y0 = std::min(f.y0, y), f.y1 = std::max(f.y1, y);
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);
  std::string out = axes(f, t.columns.front());
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto ys = t.values(series[k]);
    std::string d;
    bool pen_down = false;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
        pen_down = false;  // NaN breaks the line
        continue;
      }
      d += (pen_down ? " L" : (d.empty() ? "M" : " M")) + num(f.px(xs[i])) + " " + num(f.py(ys[i]));
      pen_down = true;
    }
    if (!d.empty())
      out += "<path d=\"" + d + "\" stroke=\"" + colour(k) + "\" stroke-width=\"1.5\" fill=\"none\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k) + 8.0;
    out += "<text x=\"" + num(kWidth - kRight + 10) + "\" y=\"" + num(ly) + "\" fill=\"" + colour(k) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + escape(series[k]) + "</text>\n";
  }
  return out;
}

}  // namespace svg_detail

inline std::string render_svg(const ExperimentRecord& r) {
  std::string title(to_string(r.kind));
  if (!r.label.empty()) title += " " + r.label;
  title += " (seed " + std::to_string(r.seed) + ")";
  std::string out = svg_detail::header(title);
  if (r.results.rows.empty() || r.results.columns.empty()) {
    out += "<text x=\"320\" y=\"200\" text-anchor=\"middle\" font-family=\"sans-serif\">no data</text>\n";
  } else if (r.kind == RecordKind::histogram) {
    out += svg_detail::histogram_body(r.results);
  } else {
    out += svg_detail::lines_body(r.results, r.plot_columns);
  }
  return out + "</svg>\n";
}

}  // namespace losslab::lab
