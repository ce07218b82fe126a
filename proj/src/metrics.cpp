#include "rm3d/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rm3d/strings.hpp"

namespace rm3d {

namespace {

void require_match(const FieldView& a, const FieldView& b, const char* what) {
  if (a.dims != b.dims || a.data.size() != a.size() || b.data.size() != b.size()) {
    throw ShapeError(cat(what, ": field shapes differ"));
  }
  if (a.size() == 0) throw ShapeError(cat(what, ": empty field"));
}

double squared_error(const FieldView& pred, const FieldView& truth) {
  double s = 0.0;
  for (std::size_t n = 0; n < pred.data.size(); ++n) {
    const double e = pred.data[n] - truth.data[n];
    s += e * e;
  }
  return s;
}

// Summed-volume table with a zero border: S(i,j,k) = sum over [0,i)x[0,j)x[0,k).
class SummedVolume {
 public:
  SummedVolume(const Index3& dims, const std::vector<double>& v) : d_{dims[0] + 1, dims[1] + 1, dims[2] + 1} {
    s_.assign(static_cast<std::size_t>(d_[0]) * d_[1] * d_[2], 0.0);
    for (int i = 1; i < d_[0]; ++i)
      for (int j = 1; j < d_[1]; ++j)
        for (int k = 1; k < d_[2]; ++k) {
          const double x = v[(static_cast<std::size_t>(i - 1) * dims[1] + (j - 1)) * dims[2] + (k - 1)];
          at(i, j, k) = x + at(i - 1, j, k) + at(i, j - 1, k) + at(i, j, k - 1) - at(i - 1, j - 1, k) -
                        at(i - 1, j, k - 1) - at(i, j - 1, k - 1) + at(i - 1, j - 1, k - 1);
        }
  }

  // Sum over the box [i0, i1) x [j0, j1) x [k0, k1).
  double box(int i0, int j0, int k0, int i1, int j1, int k1) const {
    return get(i1, j1, k1) - get(i0, j1, k1) - get(i1, j0, k1) - get(i1, j1, k0) + get(i0, j0, k1) +
           get(i0, j1, k0) + get(i1, j0, k0) - get(i0, j0, k0);
  }

 private:
  double& at(int i, int j, int k) { return s_[(static_cast<std::size_t>(i) * d_[1] + j) * d_[2] + k]; }
  double get(int i, int j, int k) const { return s_[(static_cast<std::size_t>(i) * d_[1] + j) * d_[2] + k]; }

  Index3 d_;
  std::vector<double> s_;
};

}  // namespace

double nmse(FieldView pred, FieldView truth) {
  require_match(pred, truth, "nmse");
  double norm = 0.0;
  for (double t : truth.data) norm += t * t;
  if (norm == 0.0) throw UndefinedMetricError("nmse is undefined for an all-zero ground truth");
  return squared_error(pred, truth) / norm;
}

double rmse(FieldView pred, FieldView truth) {
  require_match(pred, truth, "rmse");
  return std::sqrt(squared_error(pred, truth) / static_cast<double>(pred.size()));
}

double psnr(FieldView pred, FieldView truth) {
  require_match(pred, truth, "psnr");
  const double err = squared_error(pred, truth);
  if (err == 0.0) return kPsnrInfinity;
  const double peak = *std::max_element(truth.data.begin(), truth.data.end());
  return 10.0 * std::log10(static_cast<double>(pred.size()) * peak * peak / err);
}

double ssim3d(FieldView pred, FieldView truth, const SsimOptions& o) {
  require_match(pred, truth, "ssim3d");
  if (o.window < 1 || o.window % 2 == 0) throw ParameterError(cat("SSIM window must be odd, got ", o.window));
  for (int d : pred.dims) {
    if (o.window > d) throw ParameterError(cat("SSIM window ", o.window, " exceeds grid dim ", d));
  }
  if (!(o.dynamic_range > 0.0)) throw ParameterError("SSIM dynamic range must be positive");

  const std::size_t n = pred.size();
  std::vector<double> x(pred.data.begin(), pred.data.end());
  std::vector<double> y(truth.data.begin(), truth.data.end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t m = 0; m < n; ++m) {
    xx[m] = x[m] * x[m];
    yy[m] = y[m] * y[m];
    xy[m] = x[m] * y[m];
  }
  const SummedVolume sx(pred.dims, x), sy(pred.dims, y), sxx(pred.dims, xx), syy(pred.dims, yy), sxy(pred.dims, xy);
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);
  const int r = o.window / 2;
  const double inv = 1.0 / (static_cast<double>(o.window) * o.window * o.window);
  const Index3& d = pred.dims;

  double total = 0.0;
  std::size_t count = 0;
  for (int i = r; i < d[0] - r; ++i)
    for (int j = r; j < d[1] - r; ++j)
      for (int k = r; k < d[2] - r; ++k) {
        const int i0 = i - r, j0 = j - r, k0 = k - r, i1 = i + r + 1, j1 = j + r + 1, k1 = k + r + 1;
        const double mx = sx.box(i0, j0, k0, i1, j1, k1) * inv;
        const double my = sy.box(i0, j0, k0, i1, j1, k1) * inv;
        const double vx = sxx.box(i0, j0, k0, i1, j1, k1) * inv - mx * mx;
        const double vy = syy.box(i0, j0, k0, i1, j1, k1) * inv - my * my;
        const double cxy = sxy.box(i0, j0, k0, i1, j1, k1) * inv - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

MetricReport evaluate_pair(FieldView pred, FieldView truth, const SsimOptions& options) {
  return {nmse(pred, truth), rmse(pred, truth), ssim3d(pred, truth, options), psnr(pred, truth), 1};
}

std::vector<double> to_doubles(std::span<const float> data) { return {data.begin(), data.end()}; }

MetricReport evaluate_pair(const RadioMapTensor& pred, const RadioMapTensor& truth, const SsimOptions& options) {
  require_same_grid(pred.grid(), truth.grid(), "evaluate_pair");
  const auto p = to_doubles(pred.data());
  const auto t = to_doubles(truth.data());
  return evaluate_pair(FieldView{p, pred.grid().dims()}, FieldView{t, truth.grid().dims()}, options);
}

MetricReport average(std::span<const MetricReport> samples) {
  MetricReport out;
  if (samples.empty()) return out;
  for (const auto& s : samples) {
    out.nmse += s.nmse;
    out.rmse += s.rmse;
    out.ssim += s.ssim;
    out.psnr += s.psnr;
  }
  const double n = static_cast<double>(samples.size());
  out.nmse /= n;
  out.rmse /= n;
  out.ssim /= n;
  out.psnr /= n;
  out.sample_count = samples.size();
  return out;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j{{"nmse", r.nmse}, {"rmse", r.rmse}, {"ssim", r.ssim}, {"sample_count", r.sample_count}};
  if (std::isinf(r.psnr)) {
    j["psnr"] = "inf";
  } else {
    j["psnr"] = r.psnr;
  }
  return j;
}

}  // namespace rm3d
