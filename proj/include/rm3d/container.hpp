#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "rm3d/grid.hpp"

namespace rm3d {

// Layout (little-endian): "DF3D" | u16 version | u8 dtype | 3 x u32 dims |
// 3 x f64 origin | f64 resolution | row-major payload.
inline constexpr char kContainerMagic[4] = {'D', 'F', '3', 'D'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 2 + 1 + 3 * 4 + 3 * 8 + 8;

enum class VolumeDType : std::uint8_t { kUInt8 = 0, kFloat32 = 1 };

struct Volume {
  GridSpec grid;
  std::variant<std::vector<std::uint8_t>, std::vector<float>> payload;

  VolumeDType dtype() const {
    return std::holds_alternative<std::vector<std::uint8_t>>(payload) ? VolumeDType::kUInt8
                                                                      : VolumeDType::kFloat32;
  }
};

std::vector<std::uint8_t> encode_volume(const Volume& volume);
/// `source` is used only to label errors.
Volume decode_volume(std::span<const std::uint8_t> bytes, const std::string& source);

void write_volume(const std::filesystem::path& path, const Volume& volume);
Volume read_volume(const std::filesystem::path& path);

void write_environment(const std::filesystem::path& path, const EnvironmentTensor& env);
void write_transmitter(const std::filesystem::path& path, const TransmitterTensor& tx);
void write_los(const std::filesystem::path& path, const LosTensor& los);
void write_radio_map(const std::filesystem::path& path, const RadioMapTensor& rm);

EnvironmentTensor read_environment(const std::filesystem::path& path);
/// The container holds only the one-hot payload; the continuous location is
/// supplied by the caller (manifest) and validated against it.
TransmitterTensor read_transmitter(const std::filesystem::path& path, const Vec3& location);
RadioMapTensor read_radio_map(const std::filesystem::path& path, bool normalized);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace rm3d
