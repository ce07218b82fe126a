#include "rm3d/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rm3d/strings.hpp"

namespace rm3d {

bool Box::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= min[a] && p[a] <= max[a])) return false;
  }
  return true;
}

Box Box::inflated(double margin) const {
  Box b = *this;
  for (int a = 0; a < 3; ++a) {
    b.min[a] -= margin;
    b.max[a] += margin;
  }
  return b;
}

bool Scene::inside_region(const Vec3& p) const {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= origin[a] && p[a] <= origin[a] + size[a])) return false;
  }
  return true;
}

bool Scene::occupied(const Vec3& p) const {
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(p); });
}

void Scene::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(size[a] > 0.0)) throw ParameterError("scene region must have positive size");
  }
  for (std::size_t n = 0; n < boxes.size(); ++n) {
    const Box& b = boxes[n];
    for (int a = 0; a < 3; ++a) {
      if (!(b.max[a] > b.min[a])) throw ParameterError(cat("box ", n, " has non-positive extent"));
      if (b.min[a] < origin[a] || b.max[a] > origin[a] + size[a]) {
        throw ParameterError(cat("box ", n, " leaves the scene region"));
      }
    }
  }
}

namespace {

double snap_down(double v, double snap) { return snap > 0.0 ? std::floor(v / snap) * snap : v; }
double snap_near(double v, double snap) { return snap > 0.0 ? std::max(snap, std::round(v / snap) * snap) : v; }

bool footprints_clash(const Box& a, const Box& b, double gap) {
  for (int ax = 0; ax < 2; ++ax) {
    if (a.max[ax] + gap <= b.min[ax] || b.max[ax] + gap <= a.min[ax]) return false;
  }
  return true;
}

}  // namespace

Scene generate_scene(const SceneGenConfig& config, std::uint64_t seed) {
  if (config.min_boxes < 0 || config.max_boxes < config.min_boxes) {
    throw ParameterError("scene config requires 0 <= min_boxes <= max_boxes");
  }
  if (!(config.min_footprint > 0.0) || config.max_footprint < config.min_footprint) {
    throw ParameterError("scene config footprint range is invalid");
  }
  if (!(config.min_height > 0.0) || config.max_height < config.min_height ||
      config.max_height > config.region_size[2]) {
    throw ParameterError("scene config height range is invalid");
  }
  Scene scene;
  scene.origin = config.region_origin;
  scene.size = config.region_size;
  scene.seed = seed;

  std::mt19937_64 rng(seed);
  const int count = std::uniform_int_distribution<int>(config.min_boxes, config.max_boxes)(rng);
  std::uniform_real_distribution<double> footprint(config.min_footprint, config.max_footprint);
  std::uniform_real_distribution<double> height(config.min_height, config.max_height);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_attempts_per_box && !placed; ++attempt) {
      Box b;
      for (int ax = 0; ax < 2; ++ax) {
        const double w = std::min(snap_near(footprint(rng), config.footprint_snap), config.region_size[ax]);
        const double lo = snap_down(config.region_origin[ax] + unit(rng) * (config.region_size[ax] - w),
                                    config.footprint_snap);
        b.min[ax] = std::max(lo, config.region_origin[ax]);
        b.max[ax] = b.min[ax] + w;
      }
      b.min[2] = config.region_origin[2];
      b.max[2] = config.region_origin[2] + height(rng);
      const bool clash = std::any_of(scene.boxes.begin(), scene.boxes.end(),
                                     [&](const Box& o) { return footprints_clash(b, o, config.footprint_gap); });
      if (!clash) {
        scene.boxes.push_back(b);
        placed = true;
      }
    }
    if (!placed) {
      throw PlacementError(cat("could not place box ", n + 1, " of ", count, " after ",
                               config.max_attempts_per_box, " attempts (seed ", seed, ")"));
    }
  }
  scene.validate();
  return scene;
}

Vec3 sample_transmitter(const Scene& scene, const TransmitterGenConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> height(config.min_height, config.max_height);
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Vec3 p{};
    for (int ax = 0; ax < 2; ++ax) {
      const double span = scene.size[ax] - 2.0 * config.edge_margin;
      p[ax] = scene.origin[ax] + config.edge_margin + unit(rng) * span;
    }
    p[2] = scene.origin[2] + height(rng);
    if (scene.inside_region(p) && !scene.occupied(p)) return p;
  }
  throw PlacementError("could not place a transmitter outside the buildings");
}

EnvironmentTensor voxelize(const Scene& scene, const GridSpec& grid) {
  std::vector<std::uint8_t> data(grid.voxel_count(), 0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    data[n] = scene.occupied(grid.centroid(grid.unflat(n))) ? 1 : 0;
  }
  return EnvironmentTensor(grid, std::move(data));
}

double segment_obstruction_length(std::span<const Box> boxes, const Vec3& a_in, const Vec3& b_in) {
  // Canonical endpoint order makes the result independent of argument order.
  const bool swap = std::lexicographical_compare(b_in.begin(), b_in.end(), a_in.begin(), a_in.end());
  const Vec3& a = swap ? b_in : a_in;
  const Vec3& b = swap ? a_in : b_in;
  const Vec3 d{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const double length = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  if (length == 0.0) return 0.0;

  std::vector<std::pair<double, double>> spans;
  for (const Box& box : boxes) {
    double t0 = 0.0;
    double t1 = 1.0;
    bool hit = true;
    for (int ax = 0; ax < 3 && hit; ++ax) {
      if (d[ax] == 0.0) {
        hit = a[ax] >= box.min[ax] && a[ax] <= box.max[ax];
        continue;
      }
      double lo = (box.min[ax] - a[ax]) / d[ax];
      double hi = (box.max[ax] - a[ax]) / d[ax];
      if (lo > hi) std::swap(lo, hi);
      t0 = std::max(t0, lo);
      t1 = std::min(t1, hi);
      hit = t0 < t1;
    }
    if (hit) spans.emplace_back(t0, t1);
  }
  if (spans.empty()) return 0.0;
  std::sort(spans.begin(), spans.end());
  double total = 0.0;
  double cur_lo = spans.front().first;
  double cur_hi = spans.front().second;
  for (std::size_t n = 1; n < spans.size(); ++n) {
    if (spans[n].first > cur_hi) {
      total += cur_hi - cur_lo;
      cur_lo = spans[n].first;
      cur_hi = spans[n].second;
    } else {
      cur_hi = std::max(cur_hi, spans[n].second);
    }
  }
  total += cur_hi - cur_lo;
  return total * length;
}

double segment_obstruction_length(const Scene& scene, const Vec3& a, const Vec3& b) {
  return segment_obstruction_length(std::span<const Box>(scene.boxes), a, b);
}

void EmpiricalPathLossParams::validate() const {
  if (!(exponent > 0.0)) throw ParameterError("path-loss exponent must be positive");
  if (!(d_min > 0.0)) throw ParameterError("d_min must be positive");
}

void OraclePropagationParams::validate() const {
  empirical.validate();
  if (!(beta_db_per_m >= 0.0)) throw ParameterError("beta must be non-negative");
  if (!(loss_floor_db < loss_cap_db)) throw ParameterError("loss floor must be below loss cap");
}

double free_space_constant_db(double carrier_hz) {
  constexpr double kSpeedOfLight = 299792458.0;
  return 20.0 * std::log10(4.0 * std::numbers::pi * carrier_hz / kSpeedOfLight);
}

double empirical_path_loss(const EmpiricalPathLossParams& params, double distance) {
  return params.l_fc_db + 10.0 * params.exponent * std::log10(std::max(distance, params.d_min)) + params.kappa_db;
}

double path_loss_at(const Scene& scene, const OraclePropagationParams& params, const Vec3& tx, const Vec3& rx) {
  const double dx = rx[0] - tx[0];
  const double dy = rx[1] - tx[1];
  const double dz = rx[2] - tx[2];
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  double loss = empirical_path_loss(params.empirical, d);
  if (params.beta_db_per_m > 0.0) {
    loss += params.beta_db_per_m * segment_obstruction_length(scene, tx, rx);
  }
  return std::clamp(loss, params.loss_floor_db, params.loss_cap_db);
}

RadioMapTensor generate_raw_radio_map(const Scene& scene, const OraclePropagationParams& params, const Vec3& tx,
                                      const GridSpec& grid) {
  params.validate();
  std::vector<float> data(grid.voxel_count());
  for (std::size_t n = 0; n < data.size(); ++n) {
    data[n] = static_cast<float>(path_loss_at(scene, params, tx, grid.centroid(grid.unflat(n))));
  }
  return RadioMapTensor(grid, std::move(data), false);
}

RadioMapTensor generate_radio_map(const Scene& scene, const OraclePropagationParams& params, const Vec3& tx,
                                  const GridSpec& grid, const NormalizationWindow& window) {
  return normalize_rm(generate_raw_radio_map(scene, params, tx, grid), window);
}

nlohmann::json to_json(const Box& box) { return {{"min", box.min}, {"max", box.max}}; }

nlohmann::json to_json(const SceneGenConfig& c) {
  return {{"region_origin", c.region_origin}, {"region_size", c.region_size},   {"min_boxes", c.min_boxes},
          {"max_boxes", c.max_boxes},         {"min_height", c.min_height},     {"max_height", c.max_height},
          {"min_footprint", c.min_footprint}, {"max_footprint", c.max_footprint}, {"footprint_snap", c.footprint_snap},
          {"footprint_gap", c.footprint_gap}, {"max_attempts_per_box", c.max_attempts_per_box}};
}

nlohmann::json to_json(const OraclePropagationParams& p) {
  return {{"l_fc_db", p.empirical.l_fc_db},
          {"exponent", p.empirical.exponent},
          {"kappa_db", p.empirical.kappa_db},
          {"d_min", p.empirical.d_min},
          {"beta_db_per_m", p.beta_db_per_m},
          {"tx_power_dbm", p.tx_power_dbm},
          {"carrier_hz", p.carrier_hz},
          {"loss_floor_db", p.loss_floor_db},
          {"loss_cap_db", p.loss_cap_db}};
}

nlohmann::json scene_to_json(const Scene& scene, const OraclePropagationParams& params) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : scene.boxes) boxes.push_back(to_json(b));
  return {{"region", {{"origin", scene.origin}, {"size", scene.size}}},
          {"boxes", boxes},
          {"seed", scene.seed},
          {"params", to_json(params)}};
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  s.origin = j.at("region").at("origin").get<Vec3>();
  s.size = j.at("region").at("size").get<Vec3>();
  s.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& b : j.at("boxes")) {
    s.boxes.push_back(Box{b.at("min").get<Vec3>(), b.at("max").get<Vec3>()});
  }
  s.validate();
  return s;
}

OraclePropagationParams params_from_json(const nlohmann::json& j) {
  OraclePropagationParams p;
  p.empirical.l_fc_db = j.value("l_fc_db", p.empirical.l_fc_db);
  p.empirical.exponent = j.value("exponent", p.empirical.exponent);
  p.empirical.kappa_db = j.value("kappa_db", p.empirical.kappa_db);
  p.empirical.d_min = j.value("d_min", p.empirical.d_min);
  p.beta_db_per_m = j.value("beta_db_per_m", p.beta_db_per_m);
  p.tx_power_dbm = j.value("tx_power_dbm", p.tx_power_dbm);
  p.carrier_hz = j.value("carrier_hz", p.carrier_hz);
  p.loss_floor_db = j.value("loss_floor_db", p.loss_floor_db);
  p.loss_cap_db = j.value("loss_cap_db", p.loss_cap_db);
  p.validate();
  return p;
}

SceneGenConfig scene_config_from_json(const nlohmann::json& j) {
  SceneGenConfig c;
  c.region_origin = j.value("region_origin", c.region_origin);
  c.region_size = j.value("region_size", c.region_size);
  c.min_boxes = j.value("min_boxes", c.min_boxes);
  c.max_boxes = j.value("max_boxes", c.max_boxes);
  c.min_height = j.value("min_height", c.min_height);
  c.max_height = j.value("max_height", c.max_height);
  c.min_footprint = j.value("min_footprint", c.min_footprint);
  c.max_footprint = j.value("max_footprint", c.max_footprint);
  c.footprint_snap = j.value("footprint_snap", c.footprint_snap);
  c.footprint_gap = j.value("footprint_gap", c.footprint_gap);
  c.max_attempts_per_box = j.value("max_attempts_per_box", c.max_attempts_per_box);
  return c;
}

}  // namespace rm3d
