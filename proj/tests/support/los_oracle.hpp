#pragma once

// Continuous-geometry reference for the voxel LoS test, restricted to rays
// whose classification cannot depend on discretization details.

#include <algorithm>
#include <cstdlib>
#include <vector>

#include "rm3d/oracle.hpp"

namespace rm3d::reference {

enum class RobustLos { kVisible, kBlocked, kAmbiguous };

inline Vec3 lerp(const Vec3& a, const Vec3& b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

// Boxes must be voxel-aligned on `grid`. n is the Bresenham step count, so
// step s sits at parameter s/n along the centroid-to-centroid segment and
// its voxel centroid is within half a voxel of it on the minor axes.
inline RobustLos classify_robust(const std::vector<Box>& boxes, const GridSpec& grid, const Index3& from,
                                 const Index3& to) {
  const int n = std::max({std::abs(to[0] - from[0]), std::abs(to[1] - from[1]), std::abs(to[2] - from[2])});
  if (n <= 1) return RobustLos::kVisible;
  const double half = 0.5 * grid.resolution();
  const Vec3 a = grid.centroid(from);
  const Vec3 b = grid.centroid(to);
  const Vec3 lo = lerp(a, b, 0.5 / n);
  const Vec3 hi = lerp(a, b, 1.0 - 0.5 / n);

  std::vector<Box> grown;
  std::vector<Box> shrunk;
  for (const Box& box : boxes) {
    grown.push_back(box.inflated(half));
    const Box s = box.inflated(-half);
    if (s.min[0] < s.max[0] && s.min[1] < s.max[1] && s.min[2] < s.max[2]) shrunk.push_back(s);
  }
  if (segment_obstruction_length(grown, lo, hi) == 0.0) return RobustLos::kVisible;
  if (segment_obstruction_length(shrunk, lo, hi) > 0.0) return RobustLos::kBlocked;
  return RobustLos::kAmbiguous;
}

// Small random scene of integer boxes on a Δ = 1 grid with `dim` voxels per
// axis; boxes may overlap.
template <typename Rng>
std::vector<Box> random_integer_boxes(Rng& rng, int dim, int max_boxes) {
  std::uniform_int_distribution<int> count(1, max_boxes);
  std::uniform_int_distribution<int> coord(0, dim - 1);
  std::uniform_int_distribution<int> extent(1, std::max(1, dim / 2));
  std::vector<Box> boxes;
  const int nb = count(rng);
  for (int n = 0; n < nb; ++n) {
    Box b;
    for (int ax = 0; ax < 3; ++ax) {
      const int lo = coord(rng);
      const int hi = std::min(dim, lo + extent(rng));
      b.min[ax] = lo;
      b.max[ax] = hi;
    }
    boxes.push_back(b);
  }
  return boxes;
}

}  // namespace rm3d::reference
