#pragma once

#include "rm3d/grid.hpp"

namespace rm3d {

// Trilinear interpolation of coarse centroid samples onto the centroids of
// an aligned fine grid. Points outside the outermost coarse centroids are
// linearly extrapolated from the nearest cell, so affine fields are
// reproduced exactly everywhere. A coarse axis with a single voxel is
// treated as constant.
RadioMapTensor trilinear_upsample(const RadioMapTensor& coarse, const GridSpec& fine);

}  // namespace rm3d
