#include "rm3d/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "rm3d/container.hpp"
#include "rm3d/strings.hpp"

namespace rm3d::nn {

namespace {

constexpr char kMagic[4] = {'R', 'M', 'C', 'K'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(cat("cannot open checkpoint ", path));
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void read(void* dst, std::size_t n) {
    if (off_ + n > bytes_.size()) throw FormatError(cat(path_, ": truncated checkpoint"));
    std::memcpy(dst, bytes_.data() + off_, n);
    off_ += n;
  }
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof(T));
    return v;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  bool done() const { return off_ == bytes_.size(); }

 private:
  std::filesystem::path path_;
  std::vector<std::uint8_t> bytes_;
  std::size_t off_ = 0;
};

std::vector<std::pair<std::string, torch::Tensor>> state_of(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : module.named_parameters()) out.emplace_back(p.key(), p.value());
  for (const auto& b : module.named_buffers()) out.emplace_back(b.key(), b.value());
  return out;
}

nlohmann::json read_header(Reader& r, const std::filesystem::path& path) {
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(cat(path, ": not a checkpoint (bad magic)"));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError(cat(path, ": unsupported checkpoint version ", version));
  const auto len = r.get<std::uint64_t>();
  try {
    return nlohmann::json::parse(r.str(len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(cat(path, ": bad checkpoint header: ", e.what()));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header, const torch::nn::Module& module) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string h = header.dump();
  put<std::uint64_t>(out, h.size());
  out.insert(out.end(), h.begin(), h.end());
  const auto state = state_of(module);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state.size()));
  for (const auto& [name, tensor] : state) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dim()));
    for (auto s : tensor.sizes()) put<std::int64_t>(out, s);
    const auto c = tensor.detach().to(torch::kFloat32).contiguous().cpu();
    const auto* p = static_cast<const std::uint8_t*>(c.data_ptr());
    out.insert(out.end(), p, p + c.numel() * sizeof(float));
  }
  write_file_atomic(path, out);
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  Reader r(path);
  return read_header(r, path);
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module) {
  Reader r(path);
  auto header = read_header(r, path);
  auto state = state_of(module);
  const auto count = r.get<std::uint32_t>();
  if (count != state.size()) {
    throw FormatError(cat(path, ": checkpoint has ", count, " tensors, model expects ", state.size()));
  }
  torch::NoGradGuard guard;
  for (auto& [name, tensor] : state) {
    const auto stored = r.str(r.get<std::uint32_t>());
    if (stored != name) throw FormatError(cat(path, ": tensor '", stored, "' where model expects '", name, "'"));
    const auto ndim = r.get<std::uint32_t>();
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) d = r.get<std::int64_t>();
    if (torch::IntArrayRef(dims) != tensor.sizes()) throw FormatError(cat(path, ": shape mismatch for '", name, "'"));
    auto buf = torch::empty(dims, torch::kFloat32);
    r.read(buf.data_ptr(), static_cast<std::size_t>(buf.numel()) * sizeof(float));
    tensor.copy_(buf);
  }
  if (!r.done()) throw FormatError(cat(path, ": trailing bytes after checkpoint payload"));
  return header;
}

}  // namespace rm3d::nn
