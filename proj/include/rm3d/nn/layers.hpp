#pragma once

#include <torch/torch.h>

#include <map>
#include <string>

namespace rm3d::nn {

// Per-sample forward cost, accumulated by the layer wrappers below while a
// CostScope is active on the current thread.
struct CostRecorder {
  double macs = 0.0;
  // Sum of every recorded layer output (what training keeps alive).
  double activation_bytes = 0.0;
  // Largest single layer input + output.
  double peak_layer_bytes = 0.0;
  std::map<std::string, double> macs_by_label;

  void add(double layer_macs, const torch::Tensor& in, const torch::Tensor& out);
};

class CostScope {
 public:
  explicit CostScope(CostRecorder& recorder);
  ~CostScope();
  CostScope(const CostScope&) = delete;
  CostScope& operator=(const CostScope&) = delete;

 private:
  CostRecorder* previous_;
};

// Attributes MACs recorded inside its lifetime to `label`.
class CostLabel {
 public:
  explicit CostLabel(std::string label);
  ~CostLabel();
  CostLabel(const CostLabel&) = delete;
  CostLabel& operator=(const CostLabel&) = delete;

 private:
  std::string previous_;
};

CostRecorder* active_recorder();
void record_cost(double macs_per_sample, const torch::Tensor& in, const torch::Tensor& out);

// Largest divisor of channels that is <= 8.
int group_count(int channels);

torch::nn::GroupNorm group_norm(int channels);

class Conv3dUnitImpl : public torch::nn::Module {
 public:
  Conv3dUnitImpl(int in_channels, int out_channels, int kernel, bool bias = true);
  torch::Tensor forward(const torch::Tensor& x);
  void zero_();

  torch::nn::Conv3d conv{nullptr};

 private:
  int in_channels_;
  int kernel_;
};
TORCH_MODULE(Conv3dUnit);

// Kernel 2, stride 2.
class UpConv3dImpl : public torch::nn::Module {
 public:
  UpConv3dImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::ConvTranspose3d conv{nullptr};

 private:
  int out_channels_;
};
TORCH_MODULE(UpConv3d);

// Channel gate followed by spatial gate over a (B, C, X, Y, Z) block.
class Cbam3dImpl : public torch::nn::Module {
 public:
  explicit Cbam3dImpl(int channels, int reduction = 4, int spatial_kernel = 7);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor channel_gate(const torch::Tensor& x);
  torch::Tensor spatial_gate(const torch::Tensor& x);
  // Forces both gates to 1 (zero weights, large biases).
  void saturate_open();

  Conv3dUnit fc1{nullptr}, fc2{nullptr}, spatial{nullptr};
};
TORCH_MODULE(Cbam3d);

// Pre-activation residual block, optionally with CBAM on the branch.
// The branch's last conv starts at zero so a fresh block with equal in/out
// channels is the identity.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int in_channels, int out_channels, bool attention, double slope = 0.1);
  torch::Tensor forward(const torch::Tensor& x);
  Conv3dUnit last_conv() const { return conv2; }

  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  Conv3dUnit conv1{nullptr}, conv2{nullptr}, shortcut{nullptr};
  Cbam3d cbam{nullptr};

 private:
  double slope_;
};
TORCH_MODULE(ResidualBlock);

// Single-head dot-product attention over flattened positions, added back
// through a learnable gate that starts at zero.
class SelfAttention3dImpl : public torch::nn::Module {
 public:
  explicit SelfAttention3dImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

  Conv3dUnit query{nullptr}, key{nullptr}, value{nullptr};
  torch::Tensor gate;

 private:
  int key_channels_;
};
TORCH_MODULE(SelfAttention3d);

// Mean over each ratio^3 block (adaptive average pooling at an integer
// ratio).
torch::Tensor block_mean_pool(const torch::Tensor& x, int ratio);

// (B, 8C, n, n, n) -> (B, C, 2n, 2n, 2n) with
// out(c, 2i+a, 2j+b, 2k+d) = in(8c + 4a + 2b + d, i, j, k).
torch::Tensor voxel_shuffle(const torch::Tensor& x);
torch::Tensor voxel_unshuffle(const torch::Tensor& x);

std::int64_t parameter_count(const torch::nn::Module& module);
// Parameter count per direct child module.
std::map<std::string, std::int64_t> parameter_breakdown(const torch::nn::Module& module);

// FNV-1a over every parameter and buffer (names, shapes and raw bytes).
std::uint64_t parameter_hash(const torch::nn::Module& module);

}  // namespace rm3d::nn
