#include "rm3d/losses.hpp"

#include <random>

#include "rm3d/nn/convert.hpp"
#include "rm3d/strings.hpp"

namespace rm3d {

void LossWeights::validate() const {
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw ParameterError("loss weights must be non-negative");
}

LinearExtractor::LinearExtractor(torch::Tensor kernel) : kernel_(kernel.detach().clone()) {
  if (kernel_.dim() != 4 || kernel_.size(1) != 3) throw ShapeError("linear extractor kernel must be (out, 3, kh, kw)");
}

std::vector<torch::Tensor> LinearExtractor::features(const torch::Tensor& images) const {
  if (images.size(2) < kernel_.size(2) || images.size(3) < kernel_.size(3)) {
    throw ShapeError(cat("slice ", images.size(2), "x", images.size(3), " is smaller than extractor kernel ",
                         kernel_.size(2), "x", kernel_.size(3)));
  }
  return {torch::conv2d(images, kernel_.to(images.dtype()))};
}

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, int taps, int width) : seed_(seed) {
  if (taps < 1 || width < 1) throw ParameterError("random extractor needs taps >= 1 and width >= 1");
  std::mt19937_64 rng(seed);
  int in = 3;
  for (int l = 0; l < taps; ++l) {
    std::normal_distribution<float> w(0.0f, std::sqrt(2.0f / (in * 9)));
    auto weight = torch::empty({width, in, 3, 3});
    auto* p = weight.data_ptr<float>();
    for (std::int64_t n = 0; n < weight.numel(); ++n) p[n] = w(rng);
    weights_.push_back(weight);
    auto bias = torch::empty({width});
    std::uniform_real_distribution<float> b(-0.05f, 0.05f);
    for (std::int64_t n = 0; n < width; ++n) bias.data_ptr<float>()[n] = b(rng);
    biases_.push_back(bias);
    in = width;
  }
}

std::vector<torch::Tensor> RandomConvExtractor::features(const torch::Tensor& images) const {
  std::vector<torch::Tensor> out;
  auto h = images;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = torch::relu(torch::conv2d(h, weights_[l].to(images.dtype()), biases_[l].to(images.dtype()), 1, 1));
    out.push_back(h);
  }
  return out;
}

std::string RandomConvExtractor::tag() const { return cat("random_conv(seed=", seed_, ",taps=", taps(), ")"); }

std::shared_ptr<FeatureExtractor> make_extractor(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "random_conv");
  if (kind == "identity") return std::make_shared<IdentityExtractor>();
  if (kind == "random_conv") {
    return std::make_shared<RandomConvExtractor>(j.value("seed", 1234ull), j.value("taps", 3), j.value("width", 8));
  }
  throw ParameterError(cat("unknown feature extractor kind '", kind, "'"));
}

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw ShapeError("prediction and truth shapes differ");
}

// (B, 1, X, Y, Z) -> (B*Z, 3, X, Y).
torch::Tensor altitude_slices(const torch::Tensor& t) {
  if (t.dim() != 5 || t.size(1) != 1) throw ShapeError("expected (B, 1, X, Y, Z) maps");
  const auto b = t.size(0), x = t.size(2), y = t.size(3), z = t.size(4);
  return t.permute({0, 4, 1, 2, 3}).reshape({b * z, 1, x, y}).expand({b * z, 3, x, y});
}

torch::Tensor as_batch(const RadioMapTensor& rm) { return nn::to_tensor(rm).unsqueeze(0).to(torch::kFloat64); }

}  // namespace

torch::Tensor mse_term(const torch::Tensor& pred, const torch::Tensor& truth) {
  require_same_shape(pred, truth);
  return (pred - truth).pow(2).mean();
}

torch::Tensor l1_term(const torch::Tensor& pred, const torch::Tensor& truth) {
  require_same_shape(pred, truth);
  return (pred - truth).abs().mean();
}

torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& truth, const FeatureExtractor& fx) {
  require_same_shape(pred, truth);
  const auto fp = fx.features(altitude_slices(pred));
  const auto ft = fx.features(altitude_slices(truth));
  torch::Tensor sum = torch::zeros({}, pred.options());
  for (std::size_t l = 0; l < fp.size(); ++l) sum = sum + (fp[l] - ft[l]).pow(2).mean();
  return sum / static_cast<double>(fp.size());
}

LossBreakdown combined_loss(const torch::Tensor& pred, const torch::Tensor& truth, const LossWeights& weights,
                            const FeatureExtractor& fx) {
  weights.validate();
  const auto mse = mse_term(pred, truth);
  const auto l1 = l1_term(pred, truth);
  LossBreakdown out;
  out.total = mse + weights.lambda * l1;
  out.mse = mse.item<double>();
  out.l1 = l1.item<double>();
  if (weights.gamma > 0.0) {
    const auto perc = perceptual_loss(pred, truth, fx);
    out.total = out.total + weights.gamma * perc;
    out.perceptual = perc.item<double>();
  }
  out.total_value = out.total.item<double>();
  return out;
}

double mse_term(const RadioMapTensor& pred, const RadioMapTensor& truth) {
  require_same_grid(pred.grid(), truth.grid(), "mse_term");
  return mse_term(as_batch(pred), as_batch(truth)).item<double>();
}

double l1_term(const RadioMapTensor& pred, const RadioMapTensor& truth) {
  require_same_grid(pred.grid(), truth.grid(), "l1_term");
  return l1_term(as_batch(pred), as_batch(truth)).item<double>();
}

double perceptual_loss(const RadioMapTensor& pred, const RadioMapTensor& truth, const FeatureExtractor& fx) {
  require_same_grid(pred.grid(), truth.grid(), "perceptual_loss");
  return perceptual_loss(as_batch(pred), as_batch(truth), fx).item<double>();
}

}  // namespace rm3d
