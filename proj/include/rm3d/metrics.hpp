#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rm3d/grid.hpp"

namespace rm3d {

// Read-only 3D field in row-major order (k innermost).
struct FieldView {
  std::span<const double> data;
  Index3 dims{};

  std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  double at(int i, int j, int k) const { return data[(static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k]; }
};

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

struct SsimOptions {
  int window = 7;
  double dynamic_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;
};

// ||pred - truth||^2 / ||truth||^2; UndefinedMetricError for an all-zero
// truth.
double nmse(FieldView pred, FieldView truth);
double rmse(FieldView pred, FieldView truth);
// 10 log10(N * max(truth)^2 / ||pred - truth||^2); +inf when identical.
double psnr(FieldView pred, FieldView truth);
// Mean SSIM over voxels whose cubic box window lies inside the grid.
double ssim3d(FieldView pred, FieldView truth, const SsimOptions& options = {});

struct MetricReport {
  double nmse = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
  std::size_t sample_count = 0;
};

MetricReport evaluate_pair(FieldView pred, FieldView truth, const SsimOptions& options = {});
MetricReport evaluate_pair(const RadioMapTensor& pred, const RadioMapTensor& truth, const SsimOptions& options = {});

// Arithmetic mean over per-sample reports (PSNR becomes +inf if any sample
// is exact).
MetricReport average(std::span<const MetricReport> samples);

nlohmann::json to_json(const MetricReport& r);

std::vector<double> to_doubles(std::span<const float> data);

}  // namespace rm3d
