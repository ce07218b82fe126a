#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "rm3d/grid.hpp"

namespace rm3d {

struct LossWeights {
  double lambda = 1.0;
  double gamma = 0.2;

  void validate() const;
};

// Frozen 2D feature extractor applied to altitude slices. Input is
// (N, 3, H, W); the output holds one tensor per tapped layer.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<torch::Tensor> features(const torch::Tensor& images) const = 0;
  virtual int taps() const = 0;
  virtual std::string tag() const = 0;
};

// Single tap returning the input itself.
class IdentityExtractor final : public FeatureExtractor {
 public:
  std::vector<torch::Tensor> features(const torch::Tensor& images) const override { return {images}; }
  int taps() const override { return 1; }
  std::string tag() const override { return "identity"; }
};

// One linear 2D convolution (no bias, no nonlinearity) with a fixed kernel
// of shape (out, 3, kh, kw); valid padding.
class LinearExtractor final : public FeatureExtractor {
 public:
  explicit LinearExtractor(torch::Tensor kernel);
  std::vector<torch::Tensor> features(const torch::Tensor& images) const override;
  int taps() const override { return 1; }
  std::string tag() const override { return "linear"; }
  const torch::Tensor& kernel() const { return kernel_; }

 private:
  torch::Tensor kernel_;
};

// Stack of 3x3 conv + ReLU layers with seed-derived frozen weights; every
// layer output is a tap.
class RandomConvExtractor final : public FeatureExtractor {
 public:
  explicit RandomConvExtractor(std::uint64_t seed = 1234, int taps = 3, int width = 8);
  std::vector<torch::Tensor> features(const torch::Tensor& images) const override;
  int taps() const override { return static_cast<int>(weights_.size()); }
  std::string tag() const override;

 private:
  std::uint64_t seed_;
  std::vector<torch::Tensor> weights_;
  std::vector<torch::Tensor> biases_;
};

std::shared_ptr<FeatureExtractor> make_extractor(const nlohmann::json& j);

// Tensor losses over (B, 1, X, Y, Z) batches; the expectation is the batch
// mean.
torch::Tensor mse_term(const torch::Tensor& pred, const torch::Tensor& truth);
torch::Tensor l1_term(const torch::Tensor& pred, const torch::Tensor& truth);
// Slices along the last (altitude) axis, replicated to 3 channels.
torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& truth, const FeatureExtractor& fx);

struct LossBreakdown {
  torch::Tensor total;
  double mse = 0.0;
  double l1 = 0.0;
  double perceptual = 0.0;
  double total_value = 0.0;
};

LossBreakdown combined_loss(const torch::Tensor& pred, const torch::Tensor& truth, const LossWeights& weights,
                            const FeatureExtractor& fx);

// Same quantities on grid tensors (shape-checked against each other).
double mse_term(const RadioMapTensor& pred, const RadioMapTensor& truth);
double l1_term(const RadioMapTensor& pred, const RadioMapTensor& truth);
double perceptual_loss(const RadioMapTensor& pred, const RadioMapTensor& truth, const FeatureExtractor& fx);

}  // namespace rm3d
