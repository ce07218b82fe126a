#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rm3d/oracle.hpp"

using namespace rm3d;

namespace {

double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

// Midpoint-rule point sampling of the indicator along the segment.
double sampled_obstruction(const std::vector<Box>& boxes, const Vec3& a, const Vec3& b, int samples) {
  int inside = 0;
  for (int n = 0; n < samples; ++n) {
    const double t = (n + 0.5) / samples;
    const Vec3 p{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
    for (const auto& box : boxes) {
      if (box.contains(p)) {
        ++inside;
        break;
      }
    }
  }
  return dist(a, b) * inside / samples;
}

}  // namespace

TEST(Obstruction, HandComputedCases) {
  const std::vector<Box> unit{Box{{0, 0, 0}, {1, 1, 1}}};
  EXPECT_DOUBLE_EQ(segment_obstruction_length(unit, {-1, 0.5, 0.5}, {2, 0.5, 0.5}), 1.0);
  EXPECT_DOUBLE_EQ(segment_obstruction_length(unit, {-1, 2, 0.5}, {2, 2, 0.5}), 0.0);
  const std::vector<Box> two{Box{{0, 0, 0}, {1, 1, 1}}, Box{{3, 0, 0}, {4, 1, 1}}};
  EXPECT_DOUBLE_EQ(segment_obstruction_length(two, {-1, 0.5, 0.5}, {5, 0.5, 0.5}), 2.0);
  // Overlapping boxes are counted once.
  const std::vector<Box> overlap{Box{{0, 0, 0}, {2, 1, 1}}, Box{{1, 0, 0}, {3, 1, 1}}};
  EXPECT_DOUBLE_EQ(segment_obstruction_length(overlap, {-1, 0.5, 0.5}, {5, 0.5, 0.5}), 3.0);
  // Diagonal through the unit cube.
  EXPECT_NEAR(segment_obstruction_length(unit, {-1, -1, -1}, {2, 2, 2}), std::sqrt(3.0), 1e-12);
  // Segment ending inside.
  EXPECT_DOUBLE_EQ(segment_obstruction_length(unit, {-1, 0.5, 0.5}, {0.25, 0.5, 0.5}), 0.25);
  EXPECT_EQ(segment_obstruction_length(unit, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}), 0.0);
}

TEST(Obstruction, SymmetricAndMatchesSampling) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Box> boxes;
    for (int n = 0; n < 4; ++n) {
      Box b;
      for (int ax = 0; ax < 3; ++ax) {
        const double x = u(rng), y = u(rng);
        b.min[ax] = std::min(x, y);
        b.max[ax] = std::max(x, y);
      }
      boxes.push_back(b);
    }
    const Vec3 a{u(rng), u(rng), u(rng)};
    const Vec3 b{u(rng), u(rng), u(rng)};
    const double ab = segment_obstruction_length(boxes, a, b);
    EXPECT_EQ(ab, segment_obstruction_length(boxes, b, a));
    const double mc = sampled_obstruction(boxes, a, b, 100000);
    EXPECT_NEAR(ab, mc, 1e-3 * std::max(1.0, dist(a, b)));
  }
}

TEST(PathLoss, EmpiricalReference) {
  EmpiricalPathLossParams p;
  EXPECT_NEAR(empirical_path_loss(p, 100.0), 83.3, 1e-12);
  EXPECT_DOUBLE_EQ(empirical_path_loss(p, 1.0), 43.3);
  EXPECT_NEAR(empirical_path_loss(p, 50.0) - empirical_path_loss(p, 5.0), 20.0, 1e-12);
  EXPECT_DOUBLE_EQ(empirical_path_loss(p, 0.0), 43.3);
  EXPECT_DOUBLE_EQ(empirical_path_loss(p, 0.3), 43.3);
  EXPECT_NEAR(free_space_constant_db(3.5e9), 43.3, 0.05);
  OraclePropagationParams o;
  EXPECT_EQ(o.tx_power_dbm, 23.0);
  EXPECT_EQ(o.carrier_hz, 3.5e9);
}

TEST(PathLoss, WallPenalty) {
  Scene scene;
  scene.size = {200, 200, 200};
  OraclePropagationParams params;
  params.beta_db_per_m = 2.0;
  const Vec3 tx{10, 50, 50};
  const Vec3 rx{110, 50, 50};
  const double clear = path_loss_at(scene, params, tx, rx);
  EXPECT_NEAR(clear, 83.3, 1e-12);
  scene.boxes.push_back(Box{{40, 0, 0}, {45, 200, 200}});
  EXPECT_NEAR(path_loss_at(scene, params, tx, rx) - clear, 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(path_loss_at(scene, params, tx, tx), 43.3);
}

TEST(PathLoss, MonotoneInBetaAndExponentAndClipped) {
  Scene scene;
  scene.boxes.push_back(Box{{10, 10, 0}, {14, 14, 20}});
  const Vec3 tx{2, 12, 5};
  const Vec3 rx{30, 12, 5};
  OraclePropagationParams p;
  double prev = 0.0;
  for (double beta : {0.0, 0.5, 1.5, 3.0}) {
    p.beta_db_per_m = beta;
    const double v = path_loss_at(scene, p, tx, rx);
    EXPECT_GE(v, prev);
    prev = v;
  }
  p = {};
  prev = 0.0;
  for (double g : {1.0, 2.0, 3.0}) {
    p.empirical.exponent = g;
    const double v = path_loss_at(scene, p, tx, rx);
    EXPECT_GE(v, prev);
    prev = v;
  }
  p = {};
  p.beta_db_per_m = 100.0;
  EXPECT_EQ(path_loss_at(scene, p, tx, rx), 160.0);
}

TEST(SceneGen, DeterministicAndWellFormed) {
  SceneGenConfig cfg;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene a = generate_scene(cfg, seed);
    const Scene b = generate_scene(cfg, seed);
    ASSERT_EQ(a.boxes.size(), b.boxes.size());
    for (std::size_t n = 0; n < a.boxes.size(); ++n) {
      EXPECT_EQ(a.boxes[n].min, b.boxes[n].min);
      EXPECT_EQ(a.boxes[n].max, b.boxes[n].max);
    }
    EXPECT_GE(a.boxes.size(), 4u);
    EXPECT_LE(a.boxes.size(), 8u);
    for (std::size_t n = 0; n < a.boxes.size(); ++n) {
      const Box& x = a.boxes[n];
      const double h = x.max[2] - x.min[2];
      EXPECT_GE(h, 10.0);
      EXPECT_LE(h, 25.0);
      EXPECT_EQ(x.min[2], 0.0);
      for (int ax = 0; ax < 2; ++ax) {
        EXPECT_EQ(x.min[ax], std::floor(x.min[ax]));
        EXPECT_EQ(x.max[ax], std::floor(x.max[ax]));
        EXPECT_GE(x.max[ax] - x.min[ax], 4.0);
        EXPECT_LE(x.max[ax] - x.min[ax], 10.0);
      }
      for (std::size_t m = 0; m < n; ++m) {
        const Box& y = a.boxes[m];
        const bool apart = x.max[0] + 1.0 <= y.min[0] || y.max[0] + 1.0 <= x.min[0] ||
                           x.max[1] + 1.0 <= y.min[1] || y.max[1] + 1.0 <= x.min[1];
        EXPECT_TRUE(apart);
      }
    }
    EXPECT_NO_THROW(a.validate());
  }
}

TEST(SceneGen, EmptyAndCrowded) {
  SceneGenConfig cfg;
  cfg.min_boxes = cfg.max_boxes = 0;
  EXPECT_TRUE(generate_scene(cfg, 1).boxes.empty());
  cfg.min_boxes = cfg.max_boxes = 60;
  cfg.max_attempts_per_box = 50;
  EXPECT_THROW(generate_scene(cfg, 1), PlacementError);
}

TEST(SceneGen, TransmitterOutsideBuildings) {
  const Scene s = generate_scene({}, 9);
  std::mt19937_64 rng(9);
  for (int n = 0; n < 100; ++n) {
    const Vec3 p = sample_transmitter(s, {}, rng);
    EXPECT_FALSE(s.occupied(p));
    EXPECT_GE(p[2], 7.5);
    EXPECT_LE(p[2], 20.0);
  }
}

TEST(RadioMap, BetaZeroMatchesEmpirical) {
  const Scene s = generate_scene({}, 4);
  OraclePropagationParams p;
  p.beta_db_per_m = 0.0;
  const auto g = s.grid(4.0);
  const Vec3 tx{13.3, 17.1, 9.0};
  const auto raw = generate_raw_radio_map(s, p, tx, g);
  for (std::size_t n = 0; n < g.voxel_count(); ++n) {
    const double e = std::clamp(empirical_path_loss(p.empirical, dist(tx, g.centroid(g.unflat(n)))), 40.0, 160.0);
    EXPECT_EQ(raw.data()[n], static_cast<float>(e));
  }
}

TEST(RadioMap, CoincidentCentroidsAgreeAcrossResolutions) {
  // At an odd ratio the coarse centroids coincide with fine centroids.
  Scene s = generate_scene({}, 8);
  s.size = {33, 33, 33};
  OraclePropagationParams p;
  const Vec3 tx{16.2, 3.3, 12.0};
  const auto fine = generate_raw_radio_map(s, p, tx, s.grid(1.0));
  const auto coarse = generate_raw_radio_map(s, p, tx, s.grid(3.0));
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j)
      for (int k = 0; k < 11; ++k) {
        EXPECT_EQ(coarse.at(i, j, k), fine.at(3 * i + 1, 3 * j + 1, 3 * k + 1));
      }
}

TEST(RadioMap, DeterministicAndNormalized) {
  const Scene s = generate_scene({}, 2);
  const auto g = s.grid(2.0);
  const auto a = generate_radio_map(s, {}, {5, 5, 10}, g, {});
  const auto b = generate_radio_map(s, {}, {5, 5, 10}, g, {});
  EXPECT_TRUE(a.normalized());
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end()));
}

TEST(SceneJson, RoundTrip) {
  const Scene s = generate_scene({}, 31);
  OraclePropagationParams p;
  p.beta_db_per_m = 0.75;
  const auto j = scene_to_json(s, p);
  const Scene back = scene_from_json(j);
  ASSERT_EQ(back.boxes.size(), s.boxes.size());
  EXPECT_EQ(back.seed, 31u);
  for (std::size_t n = 0; n < s.boxes.size(); ++n) EXPECT_EQ(back.boxes[n].max, s.boxes[n].max);
  EXPECT_EQ(params_from_json(j.at("params")).beta_db_per_m, 0.75);
}
