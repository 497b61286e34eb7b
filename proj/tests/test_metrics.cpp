#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "atvs/eval/metrics.hpp"

using namespace atvs;
using namespace atvs::eval;

namespace {

struct Oracle {
  double l1 = 0, l1_inv = 0, l1_rel = 0, sc_inv = 0;
  std::array<double, 4> inlier{};
  int64_t n = 0;
};

Oracle reference_metrics(const torch::Tensor& pred, const torch::Tensor& gt, double thr) {
  Oracle o;
  double g1 = 0, g2 = 0;
  const auto p = pred.flatten().to(torch::kFloat64), g = gt.flatten().to(torch::kFloat64);
  for (int64_t i = 0; i < g.numel(); ++i) {
    const double d = p[i].item<double>(), t = g[i].item<double>();
    if (!std::isfinite(t) || t <= 0 || !std::isfinite(d) || d <= 0) continue;
    const double z = 1 / d, zt = 1 / t;
    o.l1 += std::abs(z - zt);
    o.l1_inv += std::abs(d - t);
    o.l1_rel += std::abs(z - zt) / zt;
    const double lg = std::log(z) - std::log(zt);
    g1 += lg;
    g2 += lg * lg;
    for (int k = 0; k < 4; ++k)
      if (std::abs(d - t) < kInlierThresholds[k] * thr) o.inlier[k] += 1;
    ++o.n;
  }
  o.l1 /= o.n;
  o.l1_inv /= o.n;
  o.l1_rel /= o.n;
  o.sc_inv = std::sqrt(std::max(0.0, g2 / o.n - (g1 / o.n) * (g1 / o.n)));
  for (auto& v : o.inlier) v = 100.0 * v / o.n;
  return o;
}

}  // namespace

TEST(Metrics, MatchScalarOracleOnRandomPairs) {
  torch::manual_seed(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto gt = torch::rand({2, 9, 7}, torch::kFloat64) * 0.4 + 0.05;
    auto pred = gt + torch::randn_like(gt) * 0.03;
    gt[0][0][0] = 0.0;
    gt[1][3][3] = std::nan("");
    pred[0][4][4] = -0.2;
    pred[1][1][1] = std::numeric_limits<double>::infinity();
    const auto r = compute_metrics(pred, gt, 0.025);
    const auto o = reference_metrics(pred, gt, 0.025);
    EXPECT_EQ(r.pixel_count, o.n);
    EXPECT_FALSE(r.empty);
    EXPECT_NEAR(r.l1, o.l1, 1e-9 * std::max(1.0, o.l1));
    EXPECT_NEAR(r.l1_inv, o.l1_inv, 1e-12);
    EXPECT_NEAR(r.l1_rel, o.l1_rel, 1e-10);
    EXPECT_NEAR(r.sc_inv, o.sc_inv, 1e-9);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(r.inlier[k], o.inlier[k], 1e-9);
  }
}

TEST(Metrics, PerfectPrediction) {
  const auto gt = torch::rand({16, 16}) * 0.3 + 0.1;
  const auto r = compute_metrics(gt, gt, 0.025);
  EXPECT_EQ(r.l1, 0.0);
  EXPECT_EQ(r.l1_inv, 0.0);
  EXPECT_EQ(r.l1_rel, 0.0);
  EXPECT_NEAR(r.sc_inv, 0.0, 1e-12);
  for (double v : r.inlier) EXPECT_EQ(v, 100.0);
  EXPECT_EQ(r.pixel_count, 256);
}

TEST(Metrics, ScaleInvariantErrorIgnoresGlobalScale) {
  const auto gt = torch::rand({12, 12}, torch::kFloat64) * 0.3 + 0.1;
  const auto noisy = gt * (1 + 0.05 * torch::randn_like(gt));
  const auto base = compute_metrics(noisy, gt, 0.025).sc_inv;
  for (double s : {0.5, 1.7, 3.0}) EXPECT_NEAR(compute_metrics(noisy * s, gt, 0.025).sc_inv, base, 1e-9);
  // uniform depth scaling gives a constant relative error
  EXPECT_NEAR(compute_metrics(gt / 1.7, gt, 0.025).l1_rel, 0.7, 1e-12);
}

TEST(Metrics, EmptyAndInvalidArguments) {
  const auto r = compute_metrics(torch::ones({4, 4}), torch::zeros({4, 4}), 0.025);
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.pixel_count, 0);
  EXPECT_TRUE(std::isnan(r.l1));
  EXPECT_THROW(compute_metrics(torch::ones({4, 4}), torch::ones({4, 5}), 0.025), std::invalid_argument);
  EXPECT_THROW(compute_metrics(torch::ones({4, 4}), torch::ones({4, 4}), 0.0), std::invalid_argument);
}

TEST(Metrics, MeanReportSkipsEmpty) {
  MetricReport a, b, e;
  a.l1 = 1.0;
  a.inlier = {10, 20, 30, 40};
  a.pixel_count = 5;
  b.l1 = 3.0;
  b.inlier = {30, 40, 50, 60};
  b.pixel_count = 7;
  e.empty = true;
  e.l1 = std::nan("");
  const auto m = mean_report({a, e, b});
  EXPECT_DOUBLE_EQ(m.l1, 2.0);
  EXPECT_DOUBLE_EQ(m.inlier[3], 50.0);
  EXPECT_EQ(m.pixel_count, 12);
  EXPECT_FALSE(m.empty);
  EXPECT_TRUE(mean_report({e}).empty);
}

TEST(Upsample, BilinearWithClampedBorder) {
  const auto low = torch::rand({2, 3, 4}, torch::kFloat64);
  const int s = 4;
  const auto up = upsample_disparity(low, s, 12, 16);
  ASSERT_EQ(up.sizes(), (std::vector<int64_t>{2, 12, 16}));
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t y = 0; y < 12; ++y)
      for (int64_t x = 0; x < 16; ++x) {
        const double fx = std::min(double(x) / s, 3.0), fy = std::min(double(y) / s, 2.0);
        const int64_t x0 = int64_t(fx), y0 = int64_t(fy);
        const int64_t x1 = std::min<int64_t>(x0 + 1, 3), y1 = std::min<int64_t>(y0 + 1, 2);
        const double ax = fx - x0, ay = fy - y0;
        const auto v = [&](int64_t yy, int64_t xx) { return low[b][yy][xx].item<double>(); };
        const double e = (1 - ay) * ((1 - ax) * v(y0, x0) + ax * v(y0, x1)) + ay * ((1 - ax) * v(y1, x0) + ax * v(y1, x1));
        ASSERT_NEAR(up[b][y][x].item<double>(), e, 1e-12) << b << " " << y << " " << x;
      }
  const auto c = torch::full({1, 2, 2}, 0.3);
  EXPECT_LT((upsample_disparity(c, 4, 8, 8) - 0.3).abs().max().item<float>(), 1e-7);
}

TEST(Table, PrintsHeaderAndRows) {
  MetricReport r;
  r.l1 = 0.125;
  std::ostringstream out;
  print_table(out, {{"refined", r}, {"initial", r}});
  const auto text = out.str();
  EXPECT_NE(text.find("L1-inv"), std::string::npos);
  EXPECT_NE(text.find("refined"), std::string::npos);
  EXPECT_NE(text.find("initial"), std::string::npos);
  EXPECT_NE(text.find("0.1250"), std::string::npos);
}
