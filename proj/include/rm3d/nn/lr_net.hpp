#pragma once

#include <torch/torch.h>

#include "json.hpp"
#include "rm3d/grid.hpp"
#include "rm3d/nn/layers.hpp"

namespace rm3d::nn {

struct LRNetConfig {
  int depth = 2;
  int base_channels = 16;
  int bottleneck_blocks = 2;
  double dropout_rate = 0.1;
  // CBAM in every block plus bottleneck self-attention.
  bool attention_enabled = true;
  // Feed the LoS tensor as a third input branch.
  bool use_los = true;
  double input_resolution = 1.0;
  double working_resolution = 4.0;

  void validate() const;
  // Throws ShapeError unless every dim is divisible by 2^depth.
  void check_dims(const Index3& dims) const;
  int input_channels() const { return use_los ? 3 : 2; }
  // Plain U-Net variant (no CBAM, no self-attention, no LoS branch).
  static LRNetConfig radio_unet3d(const LRNetConfig& like);
};

nlohmann::json to_json(const LRNetConfig& cfg);
LRNetConfig lr_config_from_json(const nlohmann::json& j);

struct LRInputs {
  EnvironmentTensor env;
  TransmitterTensor tx;
  LosTensor los;
};

// Downscale occupancy and transmitter to the working resolution, then trace
// LoS on the coarse grid.
LRInputs preprocess(const EnvironmentTensor& env, const TransmitterTensor& tx, const LRNetConfig& cfg);

// (C, X, Y, Z) network input for one sample; channels env, tx[, los].
torch::Tensor stack_inputs(const LRInputs& in, const LRNetConfig& cfg);

class LRNetImpl : public torch::nn::Module {
 public:
  explicit LRNetImpl(const LRNetConfig& cfg);
  // (B, input_channels, X, Y, Z) -> (B, 1, X, Y, Z) in [0, 1].
  torch::Tensor forward(const torch::Tensor& x);
  const LRNetConfig& config() const { return cfg_; }

  torch::nn::ModuleList stems{nullptr};
  Conv3dUnit fuse{nullptr};
  torch::nn::ModuleList encoder{nullptr};
  Conv3dUnit bottleneck_in{nullptr};
  torch::nn::GroupNorm bottleneck_in_norm{nullptr};
  torch::nn::ModuleList bottleneck{nullptr};
  SelfAttention3d attention{nullptr};
  torch::nn::Dropout dropout{nullptr};
  Conv3dUnit bottleneck_out{nullptr};
  torch::nn::GroupNorm bottleneck_out_norm{nullptr};
  torch::nn::ModuleList up{nullptr};
  torch::nn::ModuleList decoder{nullptr};
  Cbam3d head_attention{nullptr};
  Conv3dUnit head{nullptr};

 private:
  LRNetConfig cfg_;
};
TORCH_MODULE(LRNet);

struct ParamReport {
  std::int64_t total = 0;
  std::map<std::string, std::int64_t> by_module;
};

// Instantiates the network and counts its parameters.
ParamReport lr_param_report(const LRNetConfig& cfg);

}  // namespace rm3d::nn
