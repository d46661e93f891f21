// Copyright 2026 The histoexpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "histoexpr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace histoexpr {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;

  void cover(std::span<const double> v) {
    for (double x : v) {
      if (!std::isfinite(x)) continue;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

Range span_of(std::span<const double> a, std::span<const double> b) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  r.cover(a);
  r.cover(b);
  if (!(r.lo < r.hi)) {
    const double c = std::isfinite(r.lo) ? r.lo : 0.0;
    r = {c - 1.0, c + 1.0};
  }
  const double pad = 0.05 * (r.hi - r.lo);
  return {r.lo - pad, r.hi + pad};
}

}  // namespace

std::string scatter_grid_svg(std::span<const ScatterPanel> panels, int columns) {
  columns = std::max(1, columns);
  constexpr double kCell = 200.0, kMargin = 30.0;
  const int rows = static_cast<int>((panels.size() + static_cast<std::size_t>(columns) - 1) / static_cast<std::size_t>(columns));
  const int used_cols = std::min<int>(columns, static_cast<int>(std::max<std::size_t>(panels.size(), 1)));
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(used_cols * kCell) + "\" height=\"" +
                  fmt(std::max(rows, 1) * kCell) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const auto& p = panels[i];
    const double ox = static_cast<double>(i % static_cast<std::size_t>(columns)) * kCell;
    const double oy = static_cast<double>(i / static_cast<std::size_t>(columns)) * kCell;
    const double x0 = ox + kMargin, x1 = ox + kCell - 10.0, y0 = oy + kCell - kMargin, y1 = oy + 20.0;
    const Range r = span_of(p.x, p.y);
    s += "<g class=\"panel\">\n";
    s += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y1) + "\" width=\"" + fmt(x1 - x0) + "\" height=\"" + fmt(y0 - y1) +
         "\" fill=\"none\" stroke=\"#888\"/>\n";
    s += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x1) + "\" y2=\"" + fmt(y1) +
         "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
    s += "<text x=\"" + fmt(x0) + "\" y=\"" + fmt(oy + 14.0) + "\"" +
         (p.highlighted ? " font-weight=\"bold\" fill=\"#d62728\"" : "") + ">" + escape(p.title) + "</text>\n";
    const std::string color = p.highlighted ? "#d62728" : "#1f77b4";
    for (std::size_t k = 0; k < std::min(p.x.size(), p.y.size()); ++k) {
      if (!std::isfinite(p.x[k]) || !std::isfinite(p.y[k])) continue;
      s += "<circle cx=\"" + fmt(r.map(p.x[k], x0, x1)) + "\" cy=\"" + fmt(r.map(p.y[k], y0, y1)) +
           "\" r=\"2\" fill=\"" + color + "\" fill-opacity=\"0.6\"/>\n";
    }
    s += "<text x=\"" + fmt(0.5 * (x0 + x1)) + "\" y=\"" + fmt(oy + kCell - 12.0) +
         "\" text-anchor=\"middle\">actual</text>\n";
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string km_svg(std::span<const KmSeries> series, const std::string& title) {
  constexpr double kW = 480.0, kH = 320.0, x0 = 50.0, x1 = 460.0, y0 = 280.0, y1 = 30.0;
  double t_max = 0.0;
  for (const auto& k : series)
    if (!k.curve.event_times.empty()) t_max = std::max(t_max, k.curve.event_times.back());
  if (t_max <= 0.0) t_max = 1.0;
  auto px = [&](double t) { return x0 + t / t_max * (x1 - x0); };
  auto py = [&](double sv) { return y0 - sv * (y0 - y1); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" + fmt(kH) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<text x=\"" + fmt(x0) + "\" y=\"18\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x1) + "\" y2=\"" + fmt(y0) +
       "\" stroke=\"#000\"/>\n";
  s += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x0) + "\" y2=\"" + fmt(y1) +
       "\" stroke=\"#000\"/>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& c = series[i].curve;
    std::string d = "M" + fmt(px(0.0)) + "," + fmt(py(1.0));
    double prev = 1.0;
    for (std::size_t k = 0; k < c.event_times.size(); ++k) {
      const double x = px(c.event_times[k]);
      d += " L" + fmt(x) + "," + fmt(py(prev));
      d += " L" + fmt(x) + "," + fmt(py(c.survival_prob[k]));
      prev = c.survival_prob[k];
    }
    d += " L" + fmt(x1) + "," + fmt(py(prev));
    const char* color = kPalette[i % 4];
    s += "<path class=\"km\" data-label=\"" + escape(series[i].label) + "\" d=\"" + d + "\" fill=\"none\" stroke=\"" +
         color + "\" stroke-width=\"1.5\"/>\n";
    s += "<text x=\"" + fmt(x1 - 100.0) + "\" y=\"" + fmt(y1 + 16.0 * static_cast<double>(i + 1)) + "\" fill=\"" +
         color + "\">" + escape(series[i].label) + " (n=" + std::to_string(c.n) + ")</text>\n";
  }
  s += "<text x=\"" + fmt(0.5 * (x0 + x1)) + "\" y=\"" + fmt(kH - 8.0) +
       "\" text-anchor=\"middle\">months</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace histoexpr
