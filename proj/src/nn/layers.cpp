#include "rm3d/nn/layers.hpp"

#include <cmath>

#include "rm3d/errors.hpp"
#include "rm3d/strings.hpp"

namespace rm3d::nn {

namespace {

thread_local CostRecorder* g_recorder = nullptr;
thread_local std::string g_label = "other";

double per_sample_bytes(const torch::Tensor& t) {
  return static_cast<double>(t.numel() / std::max<std::int64_t>(1, t.size(0))) * t.element_size();
}

}  // namespace

void CostRecorder::add(double layer_macs, const torch::Tensor& in, const torch::Tensor& out) {
  macs += layer_macs;
  macs_by_label[g_label] += layer_macs;
  const double ob = per_sample_bytes(out);
  activation_bytes += ob;
  peak_layer_bytes = std::max(peak_layer_bytes, ob + per_sample_bytes(in));
}

CostScope::CostScope(CostRecorder& recorder) : previous_(g_recorder) { g_recorder = &recorder; }
CostScope::~CostScope() { g_recorder = previous_; }

CostLabel::CostLabel(std::string label) : previous_(std::move(g_label)) { g_label = std::move(label); }
CostLabel::~CostLabel() { g_label = std::move(previous_); }

CostRecorder* active_recorder() { return g_recorder; }

void record_cost(double macs_per_sample, const torch::Tensor& in, const torch::Tensor& out) {
  if (g_recorder != nullptr) g_recorder->add(macs_per_sample, in, out);
}

int group_count(int channels) {
  for (int g = std::min(channels, 8); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

torch::nn::GroupNorm group_norm(int channels) {
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(group_count(channels), channels));
}

Conv3dUnitImpl::Conv3dUnitImpl(int in_channels, int out_channels, int kernel, bool bias)
    : in_channels_(in_channels), kernel_(kernel) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0) {
    throw ParameterError(cat("invalid conv shape ", in_channels, "->", out_channels, " k", kernel));
  }
  conv = register_module(
      "conv", torch::nn::Conv3d(torch::nn::Conv3dOptions(in_channels, out_channels, kernel).padding(kernel / 2).bias(bias)));
}

torch::Tensor Conv3dUnitImpl::forward(const torch::Tensor& x) {
  auto y = conv->forward(x);
  if (g_recorder != nullptr) {
    const double out_per_sample = static_cast<double>(y.numel() / y.size(0));
    record_cost(out_per_sample * in_channels_ * kernel_ * kernel_ * kernel_, x, y);
  }
  return y;
}

void Conv3dUnitImpl::zero_() {
  torch::NoGradGuard guard;
  conv->weight.zero_();
  if (conv->bias.defined()) conv->bias.zero_();
}

UpConv3dImpl::UpConv3dImpl(int in_channels, int out_channels) : out_channels_(out_channels) {
  conv = register_module("conv", torch::nn::ConvTranspose3d(
                                     torch::nn::ConvTranspose3dOptions(in_channels, out_channels, 2).stride(2)));
}

torch::Tensor UpConv3dImpl::forward(const torch::Tensor& x) {
  auto y = conv->forward(x);
  if (g_recorder != nullptr) {
    const double in_per_sample = static_cast<double>(x.numel() / x.size(0));
    record_cost(in_per_sample * out_channels_ * 8.0, x, y);
  }
  return y;
}

Cbam3dImpl::Cbam3dImpl(int channels, int reduction, int spatial_kernel) {
  const int hidden = std::max(1, channels / reduction);
  fc1 = register_module("fc1", Conv3dUnit(channels, hidden, 1));
  fc2 = register_module("fc2", Conv3dUnit(hidden, channels, 1));
  spatial = register_module("spatial", Conv3dUnit(2, 1, spatial_kernel));
}

torch::Tensor Cbam3dImpl::channel_gate(const torch::Tensor& x) {
  const auto avg = x.mean({2, 3, 4}, true);
  const auto mx = x.amax({2, 3, 4}, true);
  return torch::sigmoid(fc2(torch::relu(fc1(avg))) + fc2(torch::relu(fc1(mx))));
}

torch::Tensor Cbam3dImpl::spatial_gate(const torch::Tensor& x) {
  const auto pooled = torch::cat({x.mean(1, true), x.amax(1, true)}, 1);
  return torch::sigmoid(spatial(pooled));
}

torch::Tensor Cbam3dImpl::forward(const torch::Tensor& x) {
  const auto y = x * channel_gate(x);
  return y * spatial_gate(y);
}

void Cbam3dImpl::saturate_open() {
  torch::NoGradGuard guard;
  fc2->conv->weight.zero_();
  fc2->conv->bias.fill_(60.0);
  spatial->conv->weight.zero_();
  spatial->conv->bias.fill_(60.0);
}

ResidualBlockImpl::ResidualBlockImpl(int in_channels, int out_channels, bool attention, double slope)
    : slope_(slope) {
  norm1 = register_module("norm1", group_norm(in_channels));
  conv1 = register_module("conv1", Conv3dUnit(in_channels, out_channels, 3));
  norm2 = register_module("norm2", group_norm(out_channels));
  conv2 = register_module("conv2", Conv3dUnit(out_channels, out_channels, 3));
  conv2->zero_();
  if (attention) cbam = register_module("cbam", Cbam3d(out_channels));
  if (in_channels != out_channels) shortcut = register_module("shortcut", Conv3dUnit(in_channels, out_channels, 1));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto h = conv1(torch::leaky_relu(norm1(x), slope_));
  h = conv2(torch::leaky_relu(norm2(h), slope_));
  if (cbam) h = cbam(h);
  return (shortcut ? shortcut(x) : x) + h;
}

SelfAttention3dImpl::SelfAttention3dImpl(int channels) : key_channels_(std::max(1, channels / 8)) {
  query = register_module("query", Conv3dUnit(channels, key_channels_, 1));
  key = register_module("key", Conv3dUnit(channels, key_channels_, 1));
  value = register_module("value", Conv3dUnit(channels, channels, 1));
  gate = register_parameter("gate", torch::zeros({1}));
}

torch::Tensor SelfAttention3dImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0);
  const auto c = x.size(1);
  const auto n = x.size(2) * x.size(3) * x.size(4);
  const auto q = query(x).view({b, key_channels_, n});
  const auto k = key(x).view({b, key_channels_, n});
  const auto v = value(x).view({b, c, n});
  const auto scores = torch::bmm(q.transpose(1, 2), k) / std::sqrt(static_cast<double>(key_channels_));
  const auto attn = torch::softmax(scores, -1);
  const auto out = torch::bmm(v, attn.transpose(1, 2)).view(x.sizes());
  record_cost(static_cast<double>(n) * n * (key_channels_ + c), x, out);
  return x + gate * out;
}

torch::Tensor block_mean_pool(const torch::Tensor& x, int ratio) {
  if (ratio < 1) throw ParameterError("pooling ratio must be >= 1");
  if (ratio == 1) return x;
  for (int d = 2; d < 5; ++d) {
    if (x.size(d) % ratio != 0) throw ShapeError(cat("dim ", x.size(d), " not divisible by pooling ratio ", ratio));
  }
  return torch::avg_pool3d(x, {ratio, ratio, ratio}, {ratio, ratio, ratio});
}

torch::Tensor voxel_shuffle(const torch::Tensor& x) {
  if (x.dim() != 5 || x.size(1) % 8 != 0) {
    throw ShapeError(cat("voxel_shuffle needs (B, 8C, X, Y, Z), got channels ", x.dim() >= 2 ? x.size(1) : -1));
  }
  const auto b = x.size(0), c = x.size(1) / 8, n0 = x.size(2), n1 = x.size(3), n2 = x.size(4);
  return x.view({b, c, 2, 2, 2, n0, n1, n2})
      .permute({0, 1, 5, 2, 6, 3, 7, 4})
      .reshape({b, c, 2 * n0, 2 * n1, 2 * n2});
}

torch::Tensor voxel_unshuffle(const torch::Tensor& x) {
  if (x.dim() != 5 || x.size(2) % 2 || x.size(3) % 2 || x.size(4) % 2) {
    throw ShapeError("voxel_unshuffle needs even spatial dims");
  }
  const auto b = x.size(0), c = x.size(1), n0 = x.size(2) / 2, n1 = x.size(3) / 2, n2 = x.size(4) / 2;
  return x.view({b, c, n0, 2, n1, 2, n2, 2}).permute({0, 1, 3, 5, 7, 2, 4, 6}).reshape({b, 8 * c, n0, n1, n2});
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

std::map<std::string, std::int64_t> parameter_breakdown(const torch::nn::Module& module) {
  std::map<std::string, std::int64_t> out;
  for (const auto& child : module.named_children()) out[child.key()] = parameter_count(*child.value());
  std::int64_t own = 0;
  for (const auto& p : module.named_parameters(false)) own += p.value().numel();
  if (own > 0) out["(own)"] = own;
  return out;
}

std::uint64_t parameter_hash(const torch::nn::Module& module) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  auto mix_tensor = [&](const std::string& name, const torch::Tensor& t) {
    mix(name.data(), name.size());
    for (auto s : t.sizes()) mix(&s, sizeof(s));
    const auto c = t.detach().contiguous().cpu();
    mix(c.data_ptr(), static_cast<std::size_t>(c.numel()) * c.element_size());
  };
  for (const auto& p : module.named_parameters()) mix_tensor(p.key(), p.value());
  for (const auto& b : module.named_buffers()) mix_tensor(b.key(), b.value());
  return h;
}

}  // namespace rm3d::nn
