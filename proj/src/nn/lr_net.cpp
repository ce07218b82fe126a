#include "rm3d/nn/lr_net.hpp"

#include "rm3d/grid_ops.hpp"
#include "rm3d/nn/convert.hpp"
#include "rm3d/strings.hpp"

namespace rm3d::nn {

namespace {

constexpr double kSlope = 0.1;

torch::Tensor act(const torch::Tensor& x) { return torch::leaky_relu(x, kSlope); }

// conv + norm + activation used by the input branches.
class StemImpl : public torch::nn::Module {
 public:
  StemImpl(int out_channels) {
    conv = register_module("conv", Conv3dUnit(1, out_channels, 3));
    norm = register_module("norm", group_norm(out_channels));
  }
  torch::Tensor forward(const torch::Tensor& x) { return act(norm(conv(x))); }

  Conv3dUnit conv{nullptr};
  torch::nn::GroupNorm norm{nullptr};
};
TORCH_MODULE(Stem);

}  // namespace

void LRNetConfig::validate() const {
  if (depth < 1) throw ParameterError(cat("LR-Net depth must be >= 1, got ", depth));
  if (base_channels < 1) throw ParameterError("LR-Net base_channels must be >= 1");
  if (bottleneck_blocks < 0) throw ParameterError("bottleneck_blocks must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ParameterError("dropout_rate must be in [0, 1)");
  if (!(input_resolution > 0.0) || !(working_resolution >= input_resolution)) {
    throw ParameterError("working resolution must be >= input resolution > 0");
  }
}

void LRNetConfig::check_dims(const Index3& dims) const {
  const int f = 1 << depth;
  for (int d : dims) {
    if (d % f != 0) throw ShapeError(cat("dim ", d, " is not divisible by 2^depth = ", f));
  }
}

LRNetConfig LRNetConfig::radio_unet3d(const LRNetConfig& like) {
  LRNetConfig c = like;
  c.attention_enabled = false;
  c.use_los = false;
  return c;
}

nlohmann::json to_json(const LRNetConfig& c) {
  return {{"kind", "lr_net"},
          {"depth", c.depth},
          {"base_channels", c.base_channels},
          {"bottleneck_blocks", c.bottleneck_blocks},
          {"dropout_rate", c.dropout_rate},
          {"attention_enabled", c.attention_enabled},
          {"use_los", c.use_los},
          {"input_resolution", c.input_resolution},
          {"working_resolution", c.working_resolution}};
}

LRNetConfig lr_config_from_json(const nlohmann::json& j) {
  LRNetConfig c;
  c.depth = j.value("depth", c.depth);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.bottleneck_blocks = j.value("bottleneck_blocks", c.bottleneck_blocks);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.attention_enabled = j.value("attention_enabled", c.attention_enabled);
  c.use_los = j.value("use_los", c.use_los);
  c.input_resolution = j.value("input_resolution", c.input_resolution);
  c.working_resolution = j.value("working_resolution", c.working_resolution);
  c.validate();
  return c;
}

LRInputs preprocess(const EnvironmentTensor& env, const TransmitterTensor& tx, const LRNetConfig& cfg) {
  require_same_grid(env.grid(), tx.grid(), "preprocess");
  if (std::abs(env.grid().resolution() - cfg.input_resolution) > 1e-12) {
    throw ResolutionMismatchError(cat("environment resolution ", env.grid().resolution(),
                                      " differs from configured input resolution ", cfg.input_resolution));
  }
  auto coarse_env = downscale_occupancy(env, cfg.working_resolution);
  auto coarse_tx = downscale_transmitter(tx, cfg.working_resolution);
  auto los = bresenham_los(coarse_env, coarse_tx);
  return {std::move(coarse_env), std::move(coarse_tx), std::move(los)};
}

torch::Tensor stack_inputs(const LRInputs& in, const LRNetConfig& cfg) {
  std::vector<torch::Tensor> parts{to_tensor(in.env), to_tensor(in.tx)};
  if (cfg.use_los) parts.push_back(to_tensor(in.los));
  return torch::cat(parts, 0);
}

LRNetImpl::LRNetImpl(const LRNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.base_channels;
  const bool att = cfg_.attention_enabled;

  stems = register_module("stems", torch::nn::ModuleList());
  for (int n = 0; n < cfg_.input_channels(); ++n) stems->push_back(Stem(c));
  fuse = register_module("fuse", Conv3dUnit(c * cfg_.input_channels(), c, 1));

  encoder = register_module("encoder", torch::nn::ModuleList());
  for (int d = 0; d < cfg_.depth; ++d) {
    const int in = d == 0 ? c : c << (d - 1);
    encoder->push_back(ResidualBlock(in, c << d, att, kSlope));
  }

  const int cb = c << cfg_.depth;
  bottleneck_in = register_module("bottleneck_in", Conv3dUnit(c << (cfg_.depth - 1), cb, 3));
  bottleneck_in_norm = register_module("bottleneck_in_norm", group_norm(cb));
  bottleneck = register_module("bottleneck", torch::nn::ModuleList());
  for (int n = 0; n < cfg_.bottleneck_blocks; ++n) bottleneck->push_back(ResidualBlock(cb, cb, att, kSlope));
  if (att) attention = register_module("attention", SelfAttention3d(cb));
  dropout = register_module("dropout", torch::nn::Dropout(torch::nn::DropoutOptions(cfg_.dropout_rate)));
  bottleneck_out = register_module("bottleneck_out", Conv3dUnit(cb, cb, 3));
  bottleneck_out_norm = register_module("bottleneck_out_norm", group_norm(cb));

  up = register_module("up", torch::nn::ModuleList());
  decoder = register_module("decoder", torch::nn::ModuleList());
  for (int d = cfg_.depth - 1; d >= 0; --d) {
    up->push_back(UpConv3d(c << (d + 1), c << d));
    decoder->push_back(ResidualBlock(2 * (c << d), c << d, att, kSlope));
  }
  if (att) head_attention = register_module("head_attention", Cbam3d(c));
  head = register_module("head", Conv3dUnit(c, 1, 1));
}

torch::Tensor LRNetImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 5 || x.size(1) != cfg_.input_channels()) {
    throw ShapeError(cat("LR-Net expects (B, ", cfg_.input_channels(), ", X, Y, Z) input"));
  }
  cfg_.check_dims({static_cast<int>(x.size(2)), static_cast<int>(x.size(3)), static_cast<int>(x.size(4))});

  std::vector<torch::Tensor> branches;
  {
    CostLabel label("lr.input");
    for (std::size_t n = 0; n < stems->size(); ++n) {
      branches.push_back(stems->ptr<StemImpl>(n)->forward(x.narrow(1, static_cast<std::int64_t>(n), 1)));
    }
  }
  auto h = fuse(torch::cat(branches, 1));

  std::vector<torch::Tensor> skips;
  {
    CostLabel label("lr.encoder");
    for (std::size_t d = 0; d < encoder->size(); ++d) {
      h = encoder->ptr<ResidualBlockImpl>(d)->forward(h);
      skips.push_back(h);
      h = torch::max_pool3d(h, 2);
    }
  }
  {
    CostLabel label("lr.bottleneck");
    h = act(bottleneck_in_norm(bottleneck_in(h)));
    for (std::size_t n = 0; n < bottleneck->size(); ++n) h = bottleneck->ptr<ResidualBlockImpl>(n)->forward(h);
    if (attention) h = attention(h);
    h = dropout(h);
    h = act(bottleneck_out_norm(bottleneck_out(h)));
  }
  {
    CostLabel label("lr.decoder");
    for (std::size_t n = 0; n < decoder->size(); ++n) {
      h = up->ptr<UpConv3dImpl>(n)->forward(h);
      const auto& skip = skips[skips.size() - 1 - n];
      if (skip.sizes() != h.sizes()) throw ShapeError("skip tensor does not match decoder stage");
      h = decoder->ptr<ResidualBlockImpl>(n)->forward(torch::cat({h, skip}, 1));
    }
  }
  CostLabel label("lr.head");
  if (head_attention) h = head_attention(h);
  return torch::sigmoid(head(h));
}

ParamReport lr_param_report(const LRNetConfig& cfg) {
  LRNet net(cfg);
  return {parameter_count(*net), parameter_breakdown(*net)};
}

}  // namespace rm3d::nn
