#pragma once

#include <torch/torch.h>

#include <filesystem>

#include "json.hpp"

namespace rm3d::nn {

// Layout (little-endian): "RMCK" | u32 version | u64 header length | JSON
// header | u32 tensor count | per tensor: u32 name length, name, u32 ndim,
// i64 dims, float32 payload. The header carries "kind" and "config".
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header, const torch::nn::Module& module);

// Reads the JSON header only.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

// Copies stored tensors into module's parameters and buffers; names and
// shapes must match exactly. Returns the header.
nlohmann::json load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module);

}  // namespace rm3d::nn
