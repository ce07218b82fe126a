#include "rm3d/nn/convert.hpp"

#include "rm3d/strings.hpp"

namespace rm3d::nn {

namespace {

torch::Tensor from_bytes(std::span<const std::uint8_t> data, const GridSpec& g) {
  const auto& d = g.dims();
  auto t = torch::empty({1, d[0], d[1], d[2]}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::size_t n = 0; n < data.size(); ++n) p[n] = static_cast<float>(data[n]);
  return t;
}

}  // namespace

torch::Tensor to_tensor(const EnvironmentTensor& env) { return from_bytes(env.data(), env.grid()); }
torch::Tensor to_tensor(const TransmitterTensor& tx) { return from_bytes(tx.data(), tx.grid()); }
torch::Tensor to_tensor(const LosTensor& los) { return from_bytes(los.data(), los.grid()); }

torch::Tensor to_tensor(const RadioMapTensor& rm) {
  const auto& d = rm.grid().dims();
  auto t = torch::empty({1, d[0], d[1], d[2]}, torch::kFloat32);
  std::copy(rm.data().begin(), rm.data().end(), t.data_ptr<float>());
  return t;
}

RadioMapTensor to_radio_map(const torch::Tensor& t, const GridSpec& grid, bool normalized) {
  const auto c = t.detach().to(torch::kFloat32).contiguous().cpu();
  if (static_cast<std::size_t>(c.numel()) != grid.voxel_count()) {
    throw ShapeError(cat("tensor with ", c.numel(), " entries does not fit ", grid.describe()));
  }
  const auto* p = c.data_ptr<float>();
  return RadioMapTensor(grid, std::vector<float>(p, p + c.numel()), normalized);
}

}  // namespace rm3d::nn
