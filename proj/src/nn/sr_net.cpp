#include "rm3d/nn/sr_net.hpp"

#include "rm3d/errors.hpp"
#include "rm3d/strings.hpp"

namespace rm3d::nn {

namespace {

constexpr double kSlope = 0.2;

torch::Tensor act(const torch::Tensor& x) { return torch::leaky_relu(x, kSlope); }

}  // namespace

void SRNetConfig::validate() const {
  if (base_channels < 1) throw ParameterError("SR-Net base_channels must be >= 1");
  if (rrdb_count < 1) throw ParameterError("SR-Net rrdb_count must be >= 1");
  if (upsample_blocks < 1) throw ParameterError("SR-Net upsample_blocks must be >= 1");
  if (growth_channels < 1 || dense_layers < 1) throw ParameterError("dense block shape must be positive");
  if (refinement_layers < 1) throw ParameterError("refinement_layers must be >= 1");
}

nlohmann::json to_json(const SRNetConfig& c) {
  return {{"kind", "sr_net"},
          {"base_channels", c.base_channels},
          {"rrdb_count", c.rrdb_count},
          {"upsample_blocks", c.upsample_blocks},
          {"growth_channels", c.growth_channels},
          {"dense_layers", c.dense_layers},
          {"refinement_layers", c.refinement_layers},
          {"residual_scale", c.residual_scale},
          {"alpha_init", c.alpha_init}};
}

SRNetConfig sr_config_from_json(const nlohmann::json& j) {
  SRNetConfig c;
  c.base_channels = j.value("base_channels", c.base_channels);
  c.rrdb_count = j.value("rrdb_count", c.rrdb_count);
  c.upsample_blocks = j.value("upsample_blocks", c.upsample_blocks);
  c.growth_channels = j.value("growth_channels", std::max(1, c.base_channels / 2));
  c.dense_layers = j.value("dense_layers", c.dense_layers);
  c.refinement_layers = j.value("refinement_layers", c.refinement_layers);
  c.residual_scale = j.value("residual_scale", c.residual_scale);
  c.alpha_init = j.value("alpha_init", c.alpha_init);
  c.validate();
  return c;
}

ResidualDenseBlockImpl::ResidualDenseBlockImpl(int channels, int growth, int layers) {
  convs = register_module("convs", torch::nn::ModuleList());
  for (int l = 0; l < layers; ++l) convs->push_back(Conv3dUnit(channels + l * growth, growth, 3));
  fusion = register_module("fusion", Conv3dUnit(channels + layers * growth, channels, 1));
}

torch::Tensor ResidualDenseBlockImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> feats{x};
  for (std::size_t l = 0; l < convs->size(); ++l) {
    feats.push_back(act(convs->ptr<Conv3dUnitImpl>(l)->forward(torch::cat(feats, 1))));
  }
  return fusion(torch::cat(feats, 1));
}

RRDBImpl::RRDBImpl(int channels, int growth, int dense_layers, double residual_scale) : scale_(residual_scale) {
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int n = 0; n < 3; ++n) blocks->push_back(ResidualDenseBlock(channels, growth, dense_layers));
}

torch::Tensor RRDBImpl::inner(const torch::Tensor& x) {
  auto h = x;
  torch::Tensor sum;
  for (std::size_t n = 0; n < blocks->size(); ++n) {
    const auto r = blocks->ptr<ResidualDenseBlockImpl>(n)->forward(h);
    h = h + r;
    sum = sum.defined() ? sum + r : r;
  }
  return sum;
}

torch::Tensor RRDBImpl::forward(const torch::Tensor& x) { return x + scale_ * inner(x); }

void RRDBImpl::zero_inner() {
  for (std::size_t n = 0; n < blocks->size(); ++n) blocks->ptr<ResidualDenseBlockImpl>(n)->fusion->zero_();
}

SRNetImpl::SRNetImpl(const SRNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.base_channels;
  env_conv1 = register_module("env_conv1", Conv3dUnit(2, c, 3));
  env_conv2 = register_module("env_conv2", Conv3dUnit(c, c, 3));
  rm_conv = register_module("rm_conv", Conv3dUnit(1, c, 3));
  fuse_conv = register_module("fuse_conv", Conv3dUnit(2 * c, c, 3));
  fuse_attention = register_module("fuse_attention", Cbam3d(c));

  rrdbs = register_module("rrdbs", torch::nn::ModuleList());
  for (int g = 0; g < cfg_.rrdb_count; ++g) {
    rrdbs->push_back(RRDB(c, cfg_.growth_channels, cfg_.dense_layers, cfg_.residual_scale));
  }
  dfr_conv = register_module("dfr_conv", Conv3dUnit(c, c, 3));

  expand = register_module("expand", torch::nn::ModuleList());
  merge = register_module("merge", torch::nn::ModuleList());
  hr_attention = register_module("hr_attention", torch::nn::ModuleList());
  for (int u = 0; u < cfg_.upsample_blocks; ++u) {
    expand->push_back(Conv3dUnit(c, 8 * c, 3));
    merge->push_back(Conv3dUnit(2 * c, c, 3));
    hr_attention->push_back(Cbam3d(c));
  }
  refine = register_module("refine", torch::nn::ModuleList());
  for (int l = 0; l + 1 < cfg_.refinement_layers; ++l) refine->push_back(Conv3dUnit(c, c, 3));
  refine->push_back(Conv3dUnit(c, 1, 3));
  alpha = register_parameter("alpha", torch::full({1}, cfg_.alpha_init));
  init_passthrough();
}

void SRNetImpl::init_passthrough() {
  torch::NoGradGuard guard;
  auto route = [](Conv3dUnitImpl* unit, std::int64_t out_channel, std::int64_t in_channel) {
    auto& w = unit->conv->weight;
    const auto k = w.size(2) / 2;
    w[out_channel].zero_();
    w[out_channel][in_channel][k][k][k] = 1.0;
    if (unit->conv->bias.defined()) unit->conv->bias[out_channel] = 0.0;
  };
  route(rm_conv.get(), 0, 0);
  dfr_conv->conv->weight[0].zero_();
  dfr_conv->conv->bias[0] = 0.0;
  for (int u = 0; u < cfg_.upsample_blocks; ++u) {
    for (std::int64_t s = 0; s < 8; ++s) route(expand->ptr<Conv3dUnitImpl>(u).get(), s, 0);
    route(merge->ptr<Conv3dUnitImpl>(u).get(), 0, 0);
    const auto cbam = hr_attention->ptr<Cbam3dImpl>(u);
    cbam->fc2->conv->bias.fill_(2.0);
    cbam->spatial->conv->bias.fill_(4.0);
  }
  for (std::size_t l = 0; l < refine->size(); ++l) route(refine->ptr<Conv3dUnitImpl>(l).get(), 0, 0);
}

void SRNetImpl::check_shapes(const torch::Tensor& env_tx, const torch::Tensor& lr_map) const {
  if (env_tx.dim() != 5 || env_tx.size(1) != 2) throw ShapeError("SR-Net expects (B, 2, X, Y, Z) env/tx input");
  if (lr_map.dim() != 5 || lr_map.size(1) != 1) throw ShapeError("SR-Net expects (B, 1, x, y, z) LR map");
  if (env_tx.size(0) != lr_map.size(0)) throw ShapeError("SR-Net batch sizes differ");
  for (int d = 2; d < 5; ++d) {
    if (lr_map.size(d) * cfg_.ratio() != env_tx.size(d)) {
      throw ShapeError(cat("LR map dim ", lr_map.size(d), " times 2^U = ", cfg_.ratio(), " does not equal fine dim ",
                           env_tx.size(d)));
    }
  }
}

DpfeOutput SRNetImpl::dpfe(const torch::Tensor& env_tx, const torch::Tensor& lr_map) {
  check_shapes(env_tx, lr_map);
  CostLabel label("sr.dpfe");
  const auto environment = act(env_conv2(act(env_conv1(env_tx))));
  const auto radio = rm_conv(lr_map);
  const auto pooled = block_mean_pool(environment, cfg_.ratio());
  const auto fused = fuse_attention(fuse_conv(torch::cat({pooled, radio}, 1)));
  return {fused, radio, environment};
}

torch::Tensor SRNetImpl::rrdb_cascade(const torch::Tensor& f0) {
  CostLabel label("sr.dfr");
  auto h = f0;
  for (std::size_t g = 0; g < rrdbs->size(); ++g) h = rrdbs->ptr<RRDBImpl>(g)->forward(h);
  return h;
}

torch::Tensor SRNetImpl::dfr(const torch::Tensor& f0, const torch::Tensor& radio) {
  const auto fg = rrdb_cascade(f0);
  CostLabel label("sr.dfr");
  return dfr_conv(fg) + radio;
}

torch::Tensor SRNetImpl::hr_features(const torch::Tensor& refined, const torch::Tensor& environment) {
  auto h = refined;
  for (int u = 0; u < cfg_.upsample_blocks; ++u) {
    CostLabel label(cat("sr.hr_block", u + 1));
    h = voxel_shuffle(expand->ptr<Conv3dUnitImpl>(u)->forward(h));
    const int ratio = static_cast<int>(environment.size(2) / h.size(2));
    const auto env = block_mean_pool(environment, ratio);
    h = act(merge->ptr<Conv3dUnitImpl>(u)->forward(torch::cat({h, env}, 1)));
    h = hr_attention->ptr<Cbam3dImpl>(u)->forward(h);
  }
  CostLabel label("sr.refine");
  for (std::size_t l = 0; l < refine->size(); ++l) {
    h = refine->ptr<Conv3dUnitImpl>(l)->forward(h);
    if (l + 1 < refine->size()) h = act(h);
  }
  return h;
}

torch::Tensor SRNetImpl::hr_generate(const torch::Tensor& refined, const torch::Tensor& environment) {
  return torch::clamp(alpha * hr_features(refined, environment), 0.0, 1.0);
}

torch::Tensor SRNetImpl::forward(const torch::Tensor& env_tx, const torch::Tensor& lr_map) {
  const auto d = dpfe(env_tx, lr_map);
  return hr_generate(dfr(d.fused, d.radio), d.environment);
}

}  // namespace rm3d::nn
