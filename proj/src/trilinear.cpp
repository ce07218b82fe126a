#include "rm3d/trilinear.hpp"

#include <cmath>

#include "rm3d/strings.hpp"

namespace rm3d {

namespace {

struct AxisWeights {
  std::vector<int> lo;
  std::vector<double> t;
};

AxisWeights axis_weights(int fine_n, int coarse_n, int ratio) {
  AxisWeights w{std::vector<int>(fine_n), std::vector<double>(fine_n)};
  for (int x = 0; x < fine_n; ++x) {
    if (coarse_n == 1) {
      w.lo[x] = 0;
      w.t[x] = 0.0;
      continue;
    }
    // Fine centroid expressed in coarse index units.
    const double u = (x + 0.5) / ratio - 0.5;
    const int lo = std::clamp(static_cast<int>(std::floor(u)), 0, coarse_n - 2);
    w.lo[x] = lo;
    w.t[x] = u - lo;
  }
  return w;
}

}  // namespace

RadioMapTensor trilinear_upsample(const RadioMapTensor& coarse, const GridSpec& fine) {
  const GridSpec& cg = coarse.grid();
  const int s = fine.ratio_to(cg.resolution());
  if (!(fine.coarsened(cg.resolution()) == cg)) {
    throw ShapeError(cat("coarse ", cg.describe(), " is not aligned with fine ", fine.describe()));
  }
  const Index3& fd = fine.dims();
  const Index3& cd = cg.dims();
  const AxisWeights wi = axis_weights(fd[0], cd[0], s);
  const AxisWeights wj = axis_weights(fd[1], cd[1], s);
  const AxisWeights wk = axis_weights(fd[2], cd[2], s);
  auto c = [&](int i, int j, int k) -> double {
    return coarse.at(std::min(i, cd[0] - 1), std::min(j, cd[1] - 1), std::min(k, cd[2] - 1));
  };
  std::vector<float> out(fine.voxel_count());
  for (int i = 0; i < fd[0]; ++i) {
    const int i0 = wi.lo[i];
    const double ti = wi.t[i];
    for (int j = 0; j < fd[1]; ++j) {
      const int j0 = wj.lo[j];
      const double tj = wj.t[j];
      for (int k = 0; k < fd[2]; ++k) {
        const int k0 = wk.lo[k];
        const double tk = wk.t[k];
        double v = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int d = 0; d < 2; ++d) {
              const double w = (a ? ti : 1.0 - ti) * (b ? tj : 1.0 - tj) * (d ? tk : 1.0 - tk);
              if (w != 0.0) v += w * c(i0 + a, j0 + b, k0 + d);
            }
        out[fine.flat(i, j, k)] = static_cast<float>(v);
      }
    }
  }
  // Extrapolation can leave [0, 1] slightly; a normalized input stays
  // normalized.
  if (coarse.normalized()) {
    for (auto& v : out) v = std::clamp(v, 0.0f, 1.0f);
  }
  return RadioMapTensor(fine, std::move(out), coarse.normalized());
}

}  // namespace rm3d
