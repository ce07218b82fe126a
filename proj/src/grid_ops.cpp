#include "rm3d/grid_ops.hpp"

#include "rm3d/strings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace rm3d {

EnvironmentTensor downscale_occupancy(const EnvironmentTensor& env, double coarse_resolution) {
  const GridSpec& fine = env.grid();
  const GridSpec coarse = fine.coarsened(coarse_resolution);
  const int s = fine.ratio_to(coarse_resolution);
  std::vector<std::uint8_t> out(coarse.voxel_count(), 0);
  const Index3& fd = fine.dims();
  for (int i = 0; i < fd[0]; ++i) {
    for (int j = 0; j < fd[1]; ++j) {
      for (int k = 0; k < fd[2]; ++k) {
        if (env.at(i, j, k)) out[coarse.flat(i / s, j / s, k / s)] = 1;
      }
    }
  }
  return EnvironmentTensor(coarse, std::move(out));
}

TransmitterTensor downscale_transmitter(const TransmitterTensor& tx, double coarse_resolution) {
  const GridSpec coarse = tx.grid().coarsened(coarse_resolution);
  return TransmitterTensor(coarse, tx.location());
}

std::vector<Index3> bresenham_line(const Index3& from, const Index3& to) {
  std::vector<Index3> line;
  Index3 p = from;
  const Index3 d{std::abs(to[0] - from[0]), std::abs(to[1] - from[1]), std::abs(to[2] - from[2])};
  const Index3 step{to[0] >= from[0] ? 1 : -1, to[1] >= from[1] ? 1 : -1, to[2] >= from[2] ? 1 : -1};
  // Driving axis is the one with the largest extent; ties go to the lower axis.
  int major = 0;
  if (d[1] > d[major]) major = 1;
  if (d[2] > d[major]) major = 2;
  const int m1 = (major + 1) % 3;
  const int m2 = (major + 2) % 3;
  line.reserve(static_cast<std::size_t>(d[major]) + 1);
  line.push_back(p);
  int e1 = 2 * d[m1] - d[major];
  int e2 = 2 * d[m2] - d[major];
  for (int n = 0; n < d[major]; ++n) {
    p[major] += step[major];
    if (e1 >= 0) {
      p[m1] += step[m1];
      e1 -= 2 * d[major];
    }
    if (e2 >= 0) {
      p[m2] += step[m2];
      e2 -= 2 * d[major];
    }
    e1 += 2 * d[m1];
    e2 += 2 * d[m2];
    line.push_back(p);
  }
  return line;
}

LosTensor bresenham_los(const EnvironmentTensor& env, const TransmitterTensor& tx) {
  require_same_grid(env.grid(), tx.grid(), "bresenham_los grid mismatch");
  const GridSpec& g = env.grid();
  const Index3 src = tx.voxel();
  std::vector<std::uint8_t> out(g.voxel_count(), 0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    const Index3 dst = g.unflat(n);
    const auto line = bresenham_line(src, dst);
    bool visible = true;
    for (std::size_t s = 1; s + 1 < line.size(); ++s) {
      if (env.at(line[s])) {
        visible = false;
        break;
      }
    }
    out[n] = visible ? 1 : 0;
  }
  return LosTensor(g, std::move(out));
}

double normalize_db(double db, const NormalizationWindow& window) {
  const double c = std::clamp(db, window.lo_db, window.hi_db);
  return (c - window.lo_db) / (window.hi_db - window.lo_db);
}

double denormalize(double value, const NormalizationWindow& window) {
  return window.lo_db + value * (window.hi_db - window.lo_db);
}

RadioMapTensor normalize_rm(const RadioMapTensor& rm, const NormalizationWindow& window) {
  if (!(window.lo_db < window.hi_db)) {
    throw ParameterError(cat("normalization window requires lo < hi, got [", window.lo_db, ", ", window.hi_db, "]"));
  }
  if (rm.normalized()) {
    throw ParameterError("radio map is already normalized");
  }
  std::vector<float> out(rm.data().size());
  std::transform(rm.data().begin(), rm.data().end(), out.begin(),
                 [&](float v) { return static_cast<float>(normalize_db(v, window)); });
  return RadioMapTensor(rm.grid(), std::move(out), true);
}

}  // namespace rm3d
