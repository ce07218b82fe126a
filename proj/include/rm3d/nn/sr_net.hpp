#pragma once

#include <torch/torch.h>

#include "json.hpp"
#include "rm3d/nn/layers.hpp"

namespace rm3d::nn {

struct SRNetConfig {
  int base_channels = 16;
  int rrdb_count = 3;
  int upsample_blocks = 2;
  int growth_channels = 8;
  int dense_layers = 4;
  int refinement_layers = 2;
  double residual_scale = 0.2;
  double alpha_init = 1.0;

  void validate() const;
  int ratio() const { return 1 << upsample_blocks; }
};

nlohmann::json to_json(const SRNetConfig& cfg);
SRNetConfig sr_config_from_json(const nlohmann::json& j);

// Dense block: every conv sees the concatenation of the input and all
// previous layer outputs; a 1x1 local fusion maps back to C channels. The
// forward returns the fused residual increment (not input + increment).
class ResidualDenseBlockImpl : public torch::nn::Module {
 public:
  ResidualDenseBlockImpl(int channels, int growth, int layers);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::ModuleList convs{nullptr};
  Conv3dUnit fusion{nullptr};
};
TORCH_MODULE(ResidualDenseBlock);

// Three cascaded dense blocks h_{i+1} = h_i + rdb_i(h_i); inner(F) = h_3 - F
// and forward(F) = F + residual_scale * inner(F).
class RRDBImpl : public torch::nn::Module {
 public:
  RRDBImpl(int channels, int growth, int dense_layers, double residual_scale);
  torch::Tensor inner(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);
  // Zeroes every dense block's local fusion, making inner() identically 0.
  void zero_inner();

  torch::nn::ModuleList blocks{nullptr};

 private:
  double scale_;
};
TORCH_MODULE(RRDB);

struct DpfeOutput {
  torch::Tensor fused;        // F_0, (B, C) at the coarse grid
  torch::Tensor radio;        // M, (B, C) at the coarse grid
  torch::Tensor environment;  // E-bar, (B, C) at the fine grid
};

class SRNetImpl : public torch::nn::Module {
 public:
  explicit SRNetImpl(const SRNetConfig& cfg);

  // env_tx: (B, 2, X, Y, Z) fine grid; lr_map: (B, 1, X/r, Y/r, Z/r).
  torch::Tensor forward(const torch::Tensor& env_tx, const torch::Tensor& lr_map);

  DpfeOutput dpfe(const torch::Tensor& env_tx, const torch::Tensor& lr_map);
  torch::Tensor rrdb_cascade(const torch::Tensor& f0);
  // Conv(cascade(F_0)) + M.
  torch::Tensor dfr(const torch::Tensor& f0, const torch::Tensor& radio);
  // Unclamped, unscaled single-channel output P-tilde.
  torch::Tensor hr_features(const torch::Tensor& refined, const torch::Tensor& environment);
  // clamp(alpha * P-tilde, 0, 1).
  torch::Tensor hr_generate(const torch::Tensor& refined, const torch::Tensor& environment);

  const SRNetConfig& config() const { return cfg_; }

  // Applied by the constructor: channel 0 carries the LR map unchanged from
  // rm_conv through the DFR sum, every voxel shuffle (as nearest-neighbour
  // copies) and the refinement stack, and the HR attention gates start
  // mostly open. A fresh network is therefore close to a nearest-neighbour
  // upsampler; all weights stay trainable.
  void init_passthrough();

  Conv3dUnit env_conv1{nullptr}, env_conv2{nullptr}, rm_conv{nullptr}, fuse_conv{nullptr};
  Cbam3d fuse_attention{nullptr};
  torch::nn::ModuleList rrdbs{nullptr};
  Conv3dUnit dfr_conv{nullptr};
  torch::nn::ModuleList expand{nullptr};
  torch::nn::ModuleList merge{nullptr};
  torch::nn::ModuleList hr_attention{nullptr};
  torch::nn::ModuleList refine{nullptr};
  torch::Tensor alpha;

 private:
  void check_shapes(const torch::Tensor& env_tx, const torch::Tensor& lr_map) const;

  SRNetConfig cfg_;
};
TORCH_MODULE(SRNet);

}  // namespace rm3d::nn
