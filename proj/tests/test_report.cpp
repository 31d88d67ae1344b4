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

#include <gtest/gtest.h>

#include "timix/report.hpp"

namespace timix {
namespace {

RunMetrics run(double loss, double acc, double gap, int epochs = 3) {
  RunMetrics m;
  for (int e = 1; e <= epochs; ++e) {
    EpochMetrics x;
    x.epoch = e;
    x.loss_itc = loss + (epochs - e);
    x.loss_total = 2 * loss;
    x.acc_at_1 = acc;
    x.modality_gap = gap;
    m.epochs.push_back(x);
  }
  return m;
}

std::size_t count(const std::string& s, const std::string& what) {
  std::size_t n = 0;
  for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
  return n;
}

TEST(LineChart, DeterministicAndSelfContained) {
  const std::vector<Series> s{{"a", {1, 2, 3}, {0.5, 0.25, 0.125}}, {"b<&>", {1, 2}, {1, 2}}};
  ChartOptions opt;
  opt.title = "t";
  const auto svg = render_line_chart(s, opt);
  EXPECT_EQ(svg, render_line_chart(s, opt));
  EXPECT_EQ(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0), 0u);
  EXPECT_EQ(svg.substr(svg.size() - 7), "</svg>\n");
  EXPECT_EQ(count(svg, "<polyline"), 2u);
  EXPECT_NE(svg.find("b&lt;&amp;&gt;"), std::string::npos);
  EXPECT_EQ(svg.find("<metadata>"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);
}

TEST(LineChart, TimestampOnlyInMetadata) {
  const std::vector<Series> s{{"a", {1, 2}, {3, 4}}};
  ChartOptions plain, stamped;
  stamped.timestamp = "2026-01-01T00:00:00Z";
  const auto a = render_line_chart(s, plain);
  const auto b = render_line_chart(s, stamped);
  const std::string meta = "  <metadata>generated 2026-01-01T00:00:00Z</metadata>\n";
  ASSERT_NE(b.find(meta), std::string::npos);
  auto stripped = b;
  stripped.erase(b.find(meta), meta.size());
  EXPECT_EQ(stripped, a);
}

TEST(LineChart, PointsStayInsidePlotArea) {
  const std::vector<Series> s{{"a", {0, 10}, {-5, 5}}, {"flat", {3, 4}, {1, 1}}};
  ChartOptions opt;
  const auto svg = render_line_chart(s, opt);
  const auto p = svg.find("points=\"") + 8;
  const auto q = svg.find('"', p);
  std::istringstream pts(svg.substr(p, q - p));
  std::string pair;
  while (pts >> pair) {
    const double x = std::stod(pair.substr(0, pair.find(',')));
    const double y = std::stod(pair.substr(pair.find(',') + 1));
    EXPECT_GE(x, 70.0);
    EXPECT_LE(x, opt.width - 160.0);
    EXPECT_GE(y, 40.0);
    EXPECT_LE(y, opt.height - 50.0);
  }
}

TEST(LineChart, NonFiniteAndDegenerateInputs) {
  EXPECT_NO_THROW(render_line_chart({{"a", {1}, {NAN}}}, {}));
  EXPECT_NO_THROW(render_line_chart({{"a", {1, 1}, {2, 2}}}, {}));
  EXPECT_THROW(render_line_chart({}, {}), Error);
  EXPECT_THROW(render_line_chart({{"a", {1, 2}, {1}}}, {}), Error);
}

TEST(MetricSeries, OneSeriesPerRun) {
  const std::vector<std::pair<std::string, RunMetrics>> runs{{"x", run(1, 0.5, 0.2)}, {"y", run(2, 0.1, 0.3, 2)}};
  const auto charts = default_charts();
  ASSERT_EQ(charts.size(), 4u);
  const auto s = metric_series(runs, charts[0]);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].name, "x");
  EXPECT_EQ(s[0].x, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(s[0].y, (std::vector<double>{3, 2, 1}));
  EXPECT_EQ(s[1].y.size(), 2u);
}

TEST(Summary, MarksBestRuns) {
  const std::vector<std::pair<std::string, RunMetrics>> runs{
      {"base", run(1.0, 0.3, 0.1)}, {"mix", run(0.5, 0.2, 0.4)}, {"tpp", run(0.7, 0.9, 0.3)}};
  const auto s = render_summary(runs);
  EXPECT_NE(s.find("lowest final contrastive loss: mix\n"), std::string::npos);
  EXPECT_NE(s.find("highest final acc@1: tpp\n"), std::string::npos);
  EXPECT_NE(s.find("smallest final modality gap: base\n"), std::string::npos);
  EXPECT_NE(s.find("mix,3,0.5,1,0.2,0.4\n"), std::string::npos);
}

TEST(Summary, FirstRunWinsTies) {
  const auto s = render_summary({{"a", run(1, 0.5, 0.5)}, {"b", run(1, 0.5, 0.5)}});
  EXPECT_NE(s.find("loss: a\n"), std::string::npos);
  EXPECT_NE(s.find("acc@1: a\n"), std::string::npos);
}

TEST(Summary, Errors) {
  EXPECT_THROW(render_summary({}), Error);
  EXPECT_THROW(render_summary({{"empty", RunMetrics{}}}), Error);
}

}  // namespace
}  // namespace timix
