#pragma once

#include <torch/torch.h>

#include "rm3d/grid.hpp"

namespace rm3d::nn {

// Single-channel float tensors of shape (1, X, Y, Z); stack along dim 0 to
// batch.
torch::Tensor to_tensor(const EnvironmentTensor& env);
torch::Tensor to_tensor(const TransmitterTensor& tx);
torch::Tensor to_tensor(const LosTensor& los);
torch::Tensor to_tensor(const RadioMapTensor& rm);

// Accepts (X,Y,Z), (1,X,Y,Z) or (1,1,X,Y,Z).
RadioMapTensor to_radio_map(const torch::Tensor& t, const GridSpec& grid, bool normalized = true);

}  // namespace rm3d::nn
