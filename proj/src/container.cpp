#include "rm3d/container.hpp"

#include "rm3d/strings.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace rm3d {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(cat("cannot open ", path));
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const Volume& volume) {
  std::vector<std::uint8_t> out;
  const std::size_t n = volume.grid.voxel_count();
  const std::size_t elem = volume.dtype() == VolumeDType::kUInt8 ? 1 : 4;
  out.reserve(kContainerHeaderBytes + n * elem);
  out.insert(out.end(), std::begin(kContainerMagic), std::end(kContainerMagic));
  put<std::uint16_t>(out, kContainerVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(volume.dtype()));
  for (int d : volume.grid.dims()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double o : volume.grid.origin()) put<double>(out, o);
  put<double>(out, volume.grid.resolution());
  std::visit(
      [&](const auto& data) {
        if (data.size() != n) throw ShapeError("volume payload does not match its grid");
        const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
        out.insert(out.end(), p, p + data.size() * sizeof(data[0]));
      },
      volume.payload);
  return out;
}

Volume decode_volume(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < kContainerHeaderBytes) {
    throw FormatError(cat(source, ": truncated header (", bytes.size(), " bytes)"));
  }
  if (std::memcmp(bytes.data(), kContainerMagic, 4) != 0) {
    throw FormatError(cat(source, ": bad magic, not a DF3D container"));
  }
  std::size_t off = 4;
  const auto version = get<std::uint16_t>(bytes, off);
  if (version != kContainerVersion) {
    throw FormatError(cat(source, ": unsupported container version ", version));
  }
  const auto dtype = get<std::uint8_t>(bytes, off);
  if (dtype > 1) throw FormatError(cat(source, ": unknown dtype code ", static_cast<int>(dtype)));
  Index3 dims{};
  for (auto& d : dims) {
    const auto v = get<std::uint32_t>(bytes, off);
    if (v == 0 || v > (1u << 16)) throw FormatError(cat(source, ": invalid dim ", v));
    d = static_cast<int>(v);
  }
  Vec3 origin{};
  for (auto& o : origin) o = get<double>(bytes, off);
  const auto res = get<double>(bytes, off);
  GridSpec grid;
  try {
    grid = GridSpec(origin, res, dims);
  } catch (const std::exception& e) {
    throw FormatError(cat(source, ": ", e.what()));
  }
  const std::size_t n = grid.voxel_count();
  const std::size_t elem = dtype == 0 ? 1 : 4;
  if (bytes.size() - off != n * elem) {
    throw FormatError(cat(source, ": payload is ", bytes.size() - off, " bytes, header implies ", n * elem));
  }
  Volume v{grid, {}};
  if (dtype == 0) {
    v.payload = std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  } else {
    std::vector<float> data(n);
    std::memcpy(data.data(), bytes.data() + off, n * sizeof(float));
    v.payload = std::move(data);
  }
  return v;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(cat("cannot write ", tmp));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(cat("write failed for ", tmp));
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_volume(const std::filesystem::path& path, const Volume& volume) {
  const auto bytes = encode_volume(volume);
  write_file_atomic(path, bytes);
}

Volume read_volume(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  return decode_volume(bytes, path.string());
}

namespace {

std::vector<std::uint8_t> to_vec(std::span<const std::uint8_t> s) { return {s.begin(), s.end()}; }

const std::vector<std::uint8_t>& binary_payload(const Volume& v, const std::filesystem::path& path) {
  if (v.dtype() != VolumeDType::kUInt8) {
    throw FormatError(cat(path, ": expected uint8 payload"));
  }
  return std::get<std::vector<std::uint8_t>>(v.payload);
}

}  // namespace

void write_environment(const std::filesystem::path& path, const EnvironmentTensor& env) {
  write_volume(path, Volume{env.grid(), to_vec(env.data())});
}

void write_transmitter(const std::filesystem::path& path, const TransmitterTensor& tx) {
  write_volume(path, Volume{tx.grid(), to_vec(tx.data())});
}

void write_los(const std::filesystem::path& path, const LosTensor& los) {
  write_volume(path, Volume{los.grid(), to_vec(los.data())});
}

void write_radio_map(const std::filesystem::path& path, const RadioMapTensor& rm) {
  write_volume(path, Volume{rm.grid(), std::vector<float>(rm.data().begin(), rm.data().end())});
}

EnvironmentTensor read_environment(const std::filesystem::path& path) {
  auto v = read_volume(path);
  try {
    return EnvironmentTensor(v.grid, binary_payload(v, path));
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(cat(path, ": ", e.what()));
  }
}

TransmitterTensor read_transmitter(const std::filesystem::path& path, const Vec3& location) {
  auto v = read_volume(path);
  try {
    return TransmitterTensor(v.grid, binary_payload(v, path), location);
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(cat(path, ": ", e.what()));
  }
}

RadioMapTensor read_radio_map(const std::filesystem::path& path, bool normalized) {
  auto v = read_volume(path);
  if (v.dtype() != VolumeDType::kFloat32) {
    throw FormatError(cat(path, ": expected float32 payload"));
  }
  try {
    return RadioMapTensor(v.grid, std::move(std::get<std::vector<float>>(v.payload)), normalized);
  } catch (const std::exception& e) {
    throw FormatError(cat(path, ": ", e.what()));
  }
}

}  // namespace rm3d
