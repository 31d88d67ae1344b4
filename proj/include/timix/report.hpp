/**
 * Copyright 2026 The timix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TIMIX_REPORT_HPP_
#define TIMIX_REPORT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "timix/csv.hpp"
#include "timix/error.hpp"
#include "timix/toytrain.hpp"

namespace timix {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label = "epoch";
  std::string y_label;
  int width = 640;
  int height = 400;
  std::optional<std::string> timestamp;  ///< written as <metadata> when set
};

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
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

inline constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace detail

/// Self-contained SVG line chart; output depends only on the inputs.
inline std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& opt) {
  if (series.empty()) raise(ErrorKind::InvalidArgument, "chart needs at least one series");
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) raise(ErrorKind::LengthMismatch, "series x and y differ in length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 70, right = 160, top = 40, bottom = 50;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  using detail::fixed2;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  if (opt.timestamp) o << "  <metadata>generated " << detail::xml_escape(*opt.timestamp) << "</metadata>\n";
  o << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "  <text x=\"" << fixed2(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::xml_escape(opt.title) << "</text>\n";
  o << "  <rect x=\"" << fixed2(left) << "\" y=\"" << fixed2(top) << "\" width=\"" << fixed2(pw) << "\" height=\""
    << fixed2(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0;
    const double xv = x0 + (x1 - x0) * k / 4.0;
    o << "  <line x1=\"" << fixed2(left) << "\" y1=\"" << fixed2(sy(yv)) << "\" x2=\"" << fixed2(left + pw)
      << "\" y2=\"" << fixed2(sy(yv)) << "\" stroke=\"#ddd\"/>\n";
    o << "  <text x=\"" << fixed2(left - 6) << "\" y=\"" << fixed2(sy(yv) + 4) << "\" text-anchor=\"end\">"
      << detail::tick_label(yv) << "</text>\n";
    o << "  <text x=\"" << fixed2(sx(xv)) << "\" y=\"" << fixed2(top + ph + 18) << "\" text-anchor=\"middle\">"
      << detail::tick_label(xv) << "</text>\n";
  }
  o << "  <text x=\"" << fixed2(left + pw / 2) << "\" y=\"" << opt.height - 10 << "\" text-anchor=\"middle\">"
    << detail::xml_escape(opt.x_label) << "</text>\n";
  o << "  <text x=\"16\" y=\"" << fixed2(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << fixed2(top + ph / 2) << ")\">" << detail::xml_escape(opt.y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = detail::kPalette[s % detail::kPalette.size()];
    o << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
      if (!first) o << ' ';
      o << fixed2(sx(series[s].x[i])) << ',' << fixed2(sy(series[s].y[i]));
      first = false;
    }
    o << "\"/>\n";
    const double ly = top + 16 + 18 * static_cast<double>(s);
    o << "  <line x1=\"" << fixed2(left + pw + 12) << "\" y1=\"" << fixed2(ly) << "\" x2=\"" << fixed2(left + pw + 32)
      << "\" y2=\"" << fixed2(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "  <text x=\"" << fixed2(left + pw + 38) << "\" y=\"" << fixed2(ly + 4) << "\">"
      << detail::xml_escape(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// One metric plotted per run.
struct MetricChart {
  std::string file;
  std::string title;
  std::string y_label;
  std::function<double(const EpochMetrics&)> get;
};

inline std::vector<MetricChart> default_charts() {
  return {
      {"loss_itc.svg", "Contrastive loss (held-out)", "loss", [](const EpochMetrics& e) { return e.loss_itc; }},
      {"loss_total.svg", "Training loss", "loss", [](const EpochMetrics& e) { return e.loss_total; }},
      {"acc.svg", "Retrieval accuracy@1", "acc@1", [](const EpochMetrics& e) { return e.acc_at_1; }},
      {"modality_gap.svg", "Modality gap", "gap", [](const EpochMetrics& e) { return e.modality_gap; }},
  };
}

inline std::vector<Series> metric_series(const std::vector<std::pair<std::string, RunMetrics>>& runs,
                                         const MetricChart& chart) {
  std::vector<Series> out;
  for (const auto& [name, m] : runs) {
    Series s{name, {}, {}};
    for (const auto& e : m.epochs) {
      s.x.push_back(e.epoch);
      s.y.push_back(chart.get(e));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Plain-text table of final-epoch metrics with best-run markers.
inline std::string render_summary(const std::vector<std::pair<std::string, RunMetrics>>& runs) {
  if (runs.empty()) raise(ErrorKind::InvalidArgument, "summary needs at least one run");
  std::ostringstream o;
  o << "run,epochs,final_loss_itc,final_loss_total,final_acc@1,final_modality_gap\n";
  std::size_t best_loss = 0, best_acc = 0, best_gap = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& f = runs[i].second.final();
    o << runs[i].first << ',' << runs[i].second.epochs.size() << ',' << format_real(f.loss_itc) << ','
      << format_real(f.loss_total) << ',' << format_real(f.acc_at_1) << ',' << format_real(f.modality_gap) << '\n';
    if (f.loss_itc < runs[best_loss].second.final().loss_itc) best_loss = i;
    if (f.acc_at_1 > runs[best_acc].second.final().acc_at_1) best_acc = i;
    if (f.modality_gap < runs[best_gap].second.final().modality_gap) best_gap = i;
  }
  o << "\nlowest final contrastive loss: " << runs[best_loss].first << '\n';
  o << "highest final acc@1: " << runs[best_acc].first << '\n';
  o << "smallest final modality gap: " << runs[best_gap].first << '\n';
  return o.str();
}

}  // namespace timix

#endif  // TIMIX_REPORT_HPP_
