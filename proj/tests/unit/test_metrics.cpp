#include <gtest/gtest.h>

#include <random>

#include "../support/metric_oracle.hpp"
#include "rm3d/errors.hpp"
#include "rm3d/metrics.hpp"

namespace rm3d {
namespace {

FieldView view(const reference::Field& f) { return {f.v, f.dims}; }

reference::Field random_field(std::mt19937_64& rng, const Index3& dims) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  reference::Field f{dims, std::vector<double>(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2])};
  for (auto& x : f.v) x = u(rng);
  return f;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

TEST(Metrics, HandComputedValues) {
  const reference::Field truth{{1, 1, 2}, {1.0, 1.0}};
  const reference::Field pred{{1, 1, 2}, {2.0, 1.0}};
  EXPECT_DOUBLE_EQ(nmse(view(pred), view(truth)), 0.5);
  EXPECT_DOUBLE_EQ(rmse(view(pred), view(truth)), std::sqrt(0.5));
  EXPECT_NEAR(psnr(view(pred), view(truth)), 10.0 * std::log10(2.0), 1e-12);
}

TEST(Metrics, SsimSingleVoxelWindowIsLuminanceTerm) {
  const reference::Field a{{1, 1, 1}, {0.5}};
  const reference::Field b{{1, 1, 1}, {0.25}};
  const double c1 = 1e-4, c2 = 9e-4;
  const double expected = (2 * 0.5 * 0.25 + c1) * c2 / ((0.25 + 0.0625 + c1) * c2);
  EXPECT_NEAR(ssim3d(view(a), view(b), {1}), expected, 1e-15);
}

TEST(Metrics, SsimDefaultWindowOnEightCube) {
  std::mt19937_64 rng(3);
  const auto p = random_field(rng, {8, 8, 8});
  const auto t = random_field(rng, {8, 8, 8});
  EXPECT_LT(rel(ssim3d(view(p), view(t)), reference::ssim(p, t, 7)), 1e-10);
}

TEST(Metrics, FixedPointsAreExact) {
  std::mt19937_64 rng(5);
  const auto t = random_field(rng, {4, 5, 3});
  const auto r = evaluate_pair(view(t), view(t), {3});
  EXPECT_EQ(r.nmse, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.ssim, 1.0);
  EXPECT_EQ(r.psnr, kPsnrInfinity);
  EXPECT_EQ(to_json(r)["psnr"], "inf");
}

TEST(Metrics, MatchBruteForceOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> side(3, 5);
  for (int n = 0; n < 200; ++n) {
    const Index3 dims{side(rng), side(rng), side(rng)};
    const auto p = random_field(rng, dims);
    const auto t = random_field(rng, dims);
    EXPECT_LT(rel(nmse(view(p), view(t)), reference::nmse(p, t)), 1e-10);
    EXPECT_LT(rel(rmse(view(p), view(t)), reference::rmse(p, t)), 1e-10);
    EXPECT_LT(rel(psnr(view(p), view(t)), reference::psnr(p, t)), 1e-10);
    EXPECT_LT(rel(ssim3d(view(p), view(t), {3}), reference::ssim(p, t, 3)), 1e-10);
  }
}

TEST(Metrics, ZeroTruthNmseIsUndefined) {
  const reference::Field z{{2, 2, 2}, std::vector<double>(8, 0.0)};
  const reference::Field p{{2, 2, 2}, std::vector<double>(8, 0.1)};
  EXPECT_THROW(nmse(view(p), view(z)), UndefinedMetricError);
}

TEST(Metrics, RejectsBadShapesAndWindows) {
  const reference::Field a{{2, 2, 2}, std::vector<double>(8, 0.5)};
  const reference::Field b{{2, 2, 1}, std::vector<double>(4, 0.5)};
  EXPECT_THROW(rmse(view(a), view(b)), ShapeError);
  EXPECT_THROW(ssim3d(view(a), view(a), {3}), ParameterError);
  EXPECT_THROW(ssim3d(view(a), view(a), {2}), ParameterError);
}

TEST(Metrics, AverageIsArithmeticMean) {
  const std::vector<MetricReport> rs{{0.1, 0.2, 0.5, 10.0, 1}, {0.3, 0.4, 0.7, 20.0, 1}};
  const auto m = average(rs);
  EXPECT_DOUBLE_EQ(m.nmse, 0.2);
  EXPECT_DOUBLE_EQ(m.rmse, 0.30000000000000004);
  EXPECT_DOUBLE_EQ(m.ssim, 0.6);
  EXPECT_DOUBLE_EQ(m.psnr, 15.0);
  EXPECT_EQ(m.sample_count, 2u);
}

}  // namespace
}  // namespace rm3d
