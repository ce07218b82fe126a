#pragma once

#include <vector>

#include "rm3d/grid.hpp"

namespace rm3d {

/// Global clip window used to map dB path loss into [0,1].
struct NormalizationWindow {
  double lo_db = 40.0;
  double hi_db = 160.0;
};

/// Coarse voxel is occupied iff any constituent fine voxel is occupied.
EnvironmentTensor downscale_occupancy(const EnvironmentTensor& env, double coarse_resolution);

/// One-hot at the coarse voxel containing the transmitter location; the
/// location is carried through unchanged.
TransmitterTensor downscale_transmitter(const TransmitterTensor& tx, double coarse_resolution);

/// Voxels of the discrete 3D Bresenham line from `from` to `to`, both
/// endpoints included.
std::vector<Index3> bresenham_line(const Index3& from, const Index3& to);

/// Visibility of every voxel from the transmitter voxel. A voxel is visible
/// iff no intermediate voxel of its Bresenham line is occupied; the
/// transmitter voxel and the target voxel are not tested.
LosTensor bresenham_los(const EnvironmentTensor& env, const TransmitterTensor& tx);

/// (clip(x, lo, hi) - lo) / (hi - lo), entry-wise.
RadioMapTensor normalize_rm(const RadioMapTensor& rm, const NormalizationWindow& window);
double normalize_db(double db, const NormalizationWindow& window);
double denormalize(double value, const NormalizationWindow& window);

}  // namespace rm3d
