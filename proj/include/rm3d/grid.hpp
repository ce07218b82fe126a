#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rm3d/errors.hpp"

namespace rm3d {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<int, 3>;

/// Uniform voxel discretization of an axis-aligned region.
///
/// Voxel (i,j,k) has centroid origin + ((i,j,k) + 0.5) * resolution. Flat
/// storage is row-major with i outermost and k innermost.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(Vec3 origin, double resolution, Index3 dims);

  /// Builds a grid from continuous side lengths; each side must be an integer
  /// multiple of the resolution.
  static GridSpec from_extent(Vec3 origin, Vec3 side_lengths, double resolution);

  const Vec3& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  const Index3& dims() const { return dims_; }
  Vec3 side_lengths() const;
  std::size_t voxel_count() const;

  Vec3 centroid(int i, int j, int k) const;
  Vec3 centroid(const Index3& idx) const { return centroid(idx[0], idx[1], idx[2]); }
  std::size_t flat(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
  }
  Index3 unflat(std::size_t n) const;
  bool in_bounds(const Index3& idx) const;
  bool contains(const Vec3& p) const;
  /// Voxel containing p (points on the upper boundary go to the last voxel).
  Index3 voxel_of(const Vec3& p) const;

  /// Coarser grid over the same region; throws ResolutionMismatchError when
  /// the ratio is not an integer or does not divide every dim.
  GridSpec coarsened(double coarse_resolution) const;
  /// Integer ratio coarse/this; throws ResolutionMismatchError otherwise.
  int ratio_to(double coarse_resolution) const;

  bool operator==(const GridSpec& other) const = default;
  std::string describe() const;

 private:
  Vec3 origin_{0.0, 0.0, 0.0};
  double resolution_ = 1.0;
  Index3 dims_{1, 1, 1};
};

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

/// Binary building occupancy (1 = centroid inside an obstacle).
class EnvironmentTensor {
 public:
  EnvironmentTensor(GridSpec grid, std::vector<std::uint8_t> data);
  static EnvironmentTensor empty(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::uint8_t at(int i, int j, int k) const { return data_[grid_.flat(i, j, k)]; }
  std::uint8_t at(const Index3& idx) const { return at(idx[0], idx[1], idx[2]); }
  std::size_t occupied_count() const;

 private:
  GridSpec grid_;
  std::vector<std::uint8_t> data_;
};

/// One-hot transmitter indicator plus the continuous transmitter location.
class TransmitterTensor {
 public:
  /// One-hot tensor for the voxel containing location (location must be in
  /// the region).
  TransmitterTensor(GridSpec grid, Vec3 location);
  /// Validates an externally supplied one-hot payload against location.
  TransmitterTensor(GridSpec grid, std::vector<std::uint8_t> data, Vec3 location);
  /// Recovers a tensor from a one-hot payload alone; location is the hot
  /// voxel's centroid.
  static TransmitterTensor from_one_hot(GridSpec grid, std::vector<std::uint8_t> data);

  const GridSpec& grid() const { return grid_; }
  std::span<const std::uint8_t> data() const { return data_; }
  const Vec3& location() const { return location_; }
  const Index3& voxel() const { return voxel_; }

 private:
  GridSpec grid_;
  std::vector<std::uint8_t> data_;
  Vec3 location_{};
  Index3 voxel_{};
};

/// Binary visibility from the transmitter voxel.
class LosTensor {
 public:
  LosTensor(GridSpec grid, std::vector<std::uint8_t> data);

  const GridSpec& grid() const { return grid_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::uint8_t at(int i, int j, int k) const { return data_[grid_.flat(i, j, k)]; }

 private:
  GridSpec grid_;
  std::vector<std::uint8_t> data_;
};

/// Real-valued path-loss grid, either raw dB or normalized to [0,1].
class RadioMapTensor {
 public:
  RadioMapTensor(GridSpec grid, std::vector<float> data, bool normalized);

  const GridSpec& grid() const { return grid_; }
  std::span<const float> data() const { return data_; }
  float at(int i, int j, int k) const { return data_[grid_.flat(i, j, k)]; }
  bool normalized() const { return normalized_; }

 private:
  GridSpec grid_;
  std::vector<float> data_;
  bool normalized_;
};

}  // namespace rm3d
