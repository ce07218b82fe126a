#include "rm3d/grid.hpp"
#include "rm3d/strings.hpp"

#include <algorithm>
#include <cmath>

namespace rm3d {

GridSpec::GridSpec(Vec3 origin, double resolution, Index3 dims)
    : origin_(origin), resolution_(resolution), dims_(dims) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw ParameterError(cat("grid resolution must be positive, got ", resolution));
  }
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) {
      throw ParameterError(cat("grid dims must be >= 1, got ", dims[a]));
    }
  }
}

GridSpec GridSpec::from_extent(Vec3 origin, Vec3 side_lengths, double resolution) {
  if (!(resolution > 0.0)) {
    throw ParameterError("grid resolution must be positive");
  }
  Index3 dims{};
  for (int a = 0; a < 3; ++a) {
    const double n = side_lengths[a] / resolution;
    const double r = std::round(n);
    if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, n)) {
      throw ResolutionMismatchError(cat("side length ", side_lengths[a], " is not a positive multiple of resolution ", resolution));
    }
    dims[a] = static_cast<int>(r);
  }
  return GridSpec(origin, resolution, dims);
}

Vec3 GridSpec::side_lengths() const {
  return {dims_[0] * resolution_, dims_[1] * resolution_, dims_[2] * resolution_};
}

std::size_t GridSpec::voxel_count() const {
  return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
}

Vec3 GridSpec::centroid(int i, int j, int k) const {
  return {origin_[0] + (i + 0.5) * resolution_, origin_[1] + (j + 0.5) * resolution_,
          origin_[2] + (k + 0.5) * resolution_};
}

Index3 GridSpec::unflat(std::size_t n) const {
  const int k = static_cast<int>(n % dims_[2]);
  n /= dims_[2];
  const int j = static_cast<int>(n % dims_[1]);
  const int i = static_cast<int>(n / dims_[1]);
  return {i, j, k};
}

bool GridSpec::in_bounds(const Index3& idx) const {
  for (int a = 0; a < 3; ++a) {
    if (idx[a] < 0 || idx[a] >= dims_[a]) return false;
  }
  return true;
}

bool GridSpec::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= origin_[a] && p[a] <= origin_[a] + dims_[a] * resolution_)) return false;
  }
  return true;
}

Index3 GridSpec::voxel_of(const Vec3& p) const {
  if (!contains(p)) {
    throw ParameterError(cat("point (", p[0], ", ", p[1], ", ", p[2], ") lies outside ", describe()));
  }
  Index3 idx{};
  for (int a = 0; a < 3; ++a) {
    const int v = static_cast<int>(std::floor((p[a] - origin_[a]) / resolution_));
    idx[a] = std::clamp(v, 0, dims_[a] - 1);
  }
  return idx;
}

int GridSpec::ratio_to(double coarse_resolution) const {
  const double q = coarse_resolution / resolution_;
  const double r = std::round(q);
  if (r < 1.0 || std::abs(q - r) > 1e-9 * q) {
    throw ResolutionMismatchError(cat("coarse resolution ", coarse_resolution, " is not an integer multiple of ", resolution_));
  }
  return static_cast<int>(r);
}

GridSpec GridSpec::coarsened(double coarse_resolution) const {
  const int s = ratio_to(coarse_resolution);
  Index3 dims{};
  for (int a = 0; a < 3; ++a) {
    if (dims_[a] % s != 0) {
      throw ResolutionMismatchError(
          cat("dim ", dims_[a], " is not divisible by resolution ratio ", s));
    }
    dims[a] = dims_[a] / s;
  }
  return GridSpec(origin_, resolution_ * s, dims);
}

std::string GridSpec::describe() const {
  return cat("grid[", dims_[0], "x", dims_[1], "x", dims_[2], " @ ", resolution_, " m, origin (", origin_[0], ", ", origin_[1], ", ", origin_[2], ")]");
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(cat(what, ": ", a.describe(), " vs ", b.describe()));
  }
}

namespace {

void require_binary(std::span<const std::uint8_t> data, std::size_t expected, const char* what) {
  if (data.size() != expected) {
    throw ShapeError(cat(what, ": payload has ", data.size(), " entries, grid needs ", expected));
  }
  if (std::any_of(data.begin(), data.end(), [](std::uint8_t v) { return v > 1; })) {
    throw ParameterError(cat(what, ": entries must be 0 or 1"));
  }
}

}  // namespace

EnvironmentTensor::EnvironmentTensor(GridSpec grid, std::vector<std::uint8_t> data)
    : grid_(grid), data_(std::move(data)) {
  require_binary(data_, grid_.voxel_count(), "environment tensor");
}

EnvironmentTensor EnvironmentTensor::empty(const GridSpec& grid) {
  return EnvironmentTensor(grid, std::vector<std::uint8_t>(grid.voxel_count(), 0));
}

std::size_t EnvironmentTensor::occupied_count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

TransmitterTensor::TransmitterTensor(GridSpec grid, Vec3 location)
    : grid_(grid), data_(grid.voxel_count(), 0), location_(location) {
  voxel_ = grid_.voxel_of(location_);
  data_[grid_.flat(voxel_[0], voxel_[1], voxel_[2])] = 1;
}

TransmitterTensor::TransmitterTensor(GridSpec grid, std::vector<std::uint8_t> data, Vec3 location)
    : grid_(grid), data_(std::move(data)), location_(location) {
  require_binary(data_, grid_.voxel_count(), "transmitter tensor");
  if (std::count(data_.begin(), data_.end(), std::uint8_t{1}) != 1) {
    throw ParameterError("transmitter tensor must be one-hot");
  }
  voxel_ = grid_.voxel_of(location_);
  if (data_[grid_.flat(voxel_[0], voxel_[1], voxel_[2])] != 1) {
    throw ParameterError("transmitter one-hot entry does not contain the transmitter location");
  }
}

TransmitterTensor TransmitterTensor::from_one_hot(GridSpec grid, std::vector<std::uint8_t> data) {
  require_binary(data, grid.voxel_count(), "transmitter tensor");
  const auto it = std::find(data.begin(), data.end(), std::uint8_t{1});
  if (it == data.end()) {
    throw ParameterError("transmitter tensor must be one-hot");
  }
  const Vec3 loc = grid.centroid(grid.unflat(static_cast<std::size_t>(it - data.begin())));
  return TransmitterTensor(grid, std::move(data), loc);
}

LosTensor::LosTensor(GridSpec grid, std::vector<std::uint8_t> data) : grid_(grid), data_(std::move(data)) {
  require_binary(data_, grid_.voxel_count(), "LoS tensor");
}

RadioMapTensor::RadioMapTensor(GridSpec grid, std::vector<float> data, bool normalized)
    : grid_(grid), data_(std::move(data)), normalized_(normalized) {
  if (data_.size() != grid_.voxel_count()) {
    throw ShapeError(cat("radio map payload has ", data_.size(), " entries, grid needs ", grid_.voxel_count()));
  }
  if (normalized_) {
    for (float v : data_) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw ParameterError(cat("normalized radio map entry ", v, " outside [0,1]"));
      }
    }
  }
}

}  // namespace rm3d
