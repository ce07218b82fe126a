#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "rm3d/grid.hpp"
#include "rm3d/grid_ops.hpp"

namespace rm3d {

struct Box {
  Vec3 min{};
  Vec3 max{};

  bool contains(const Vec3& p) const;
  /// Box grown (margin > 0) or shrunk (margin < 0) on every face. Shrinking
  /// past zero extent yields an empty box (min > max).
  Box inflated(double margin) const;
};

/// Axis-aligned region with the obstacle boxes inside it.
struct Scene {
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 size{32.0, 32.0, 32.0};
  std::vector<Box> boxes;
  std::uint64_t seed = 0;

  GridSpec grid(double resolution) const { return GridSpec::from_extent(origin, size, resolution); }
  bool inside_region(const Vec3& p) const;
  bool occupied(const Vec3& p) const;
  /// Throws ParameterError unless every box is inside the region with
  /// strictly positive extent.
  void validate() const;
};

struct SceneGenConfig {
  Vec3 region_origin{0.0, 0.0, 0.0};
  Vec3 region_size{32.0, 32.0, 32.0};
  int min_boxes = 4;
  int max_boxes = 8;
  double min_height = 10.0;
  double max_height = 25.0;
  double min_footprint = 4.0;
  double max_footprint = 10.0;
  // Footprint corners snap to multiples of this (0 disables snapping).
  double footprint_snap = 1.0;
  // Minimum horizontal clearance between footprints.
  double footprint_gap = 1.0;
  int max_attempts_per_box = 500;
};

/// Random non-overlapping buildings standing on the ground plane z = origin.z.
/// Reproducible from seed; throws PlacementError when the region is too
/// crowded after bounded retries.
Scene generate_scene(const SceneGenConfig& config, std::uint64_t seed);

struct TransmitterGenConfig {
  double min_height = 7.5;
  double max_height = 20.0;
  // Horizontal distance kept from the region boundary.
  double edge_margin = 1.0;
  int max_attempts = 1000;
};

/// Uniform location outside every building.
Vec3 sample_transmitter(const Scene& scene, const TransmitterGenConfig& config, std::mt19937_64& rng);

/// Centroid-rule occupancy: voxel is 1 iff its centroid lies in some box.
EnvironmentTensor voxelize(const Scene& scene, const GridSpec& grid);

/// Length of segment ab inside the union of boxes (slab clipping per box,
/// then interval union). Bit-exactly symmetric in (a, b).
double segment_obstruction_length(std::span<const Box> boxes, const Vec3& a, const Vec3& b);
double segment_obstruction_length(const Scene& scene, const Vec3& a, const Vec3& b);

struct EmpiricalPathLossParams {
  double l_fc_db = 43.3;
  double exponent = 2.0;
  double kappa_db = 0.0;
  double d_min = 1.0;

  void validate() const;
};

struct OraclePropagationParams {
  EmpiricalPathLossParams empirical;
  double beta_db_per_m = 1.5;
  double tx_power_dbm = 23.0;
  double carrier_hz = 3.5e9;
  double loss_floor_db = 40.0;
  double loss_cap_db = 160.0;

  void validate() const;
};

/// 20 log10(4 pi f / c).
double free_space_constant_db(double carrier_hz);

/// L_fc + 10 gamma log10(max(d, d_min)) + kappa.
double empirical_path_loss(const EmpiricalPathLossParams& params, double distance);

/// Empirical loss plus beta per obstructed meter, clipped to the loss window.
double path_loss_at(const Scene& scene, const OraclePropagationParams& params, const Vec3& tx, const Vec3& rx);

/// Raw dB map: path_loss_at evaluated at every voxel centroid.
RadioMapTensor generate_raw_radio_map(const Scene& scene, const OraclePropagationParams& params, const Vec3& tx,
                                      const GridSpec& grid);
/// Raw map followed by normalize_rm.
RadioMapTensor generate_radio_map(const Scene& scene, const OraclePropagationParams& params, const Vec3& tx,
                                  const GridSpec& grid, const NormalizationWindow& window);

nlohmann::json to_json(const Box& box);
nlohmann::json to_json(const SceneGenConfig& config);
nlohmann::json to_json(const OraclePropagationParams& params);
nlohmann::json scene_to_json(const Scene& scene, const OraclePropagationParams& params);
Scene scene_from_json(const nlohmann::json& j);
OraclePropagationParams params_from_json(const nlohmann::json& j);
SceneGenConfig scene_config_from_json(const nlohmann::json& j);

}  // namespace rm3d
