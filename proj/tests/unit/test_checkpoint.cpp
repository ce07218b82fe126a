#include <gtest/gtest.h>

#include <fstream>

#include "rm3d/errors.hpp"
#include "rm3d/nn/checkpoint.hpp"
#include "rm3d/nn/layers.hpp"
#include "rm3d/nn/sr_net.hpp"

namespace rm3d::nn {
namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("rm3d_ckpt_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

TEST(Checkpoint, RoundTripRestoresWeights) {
  const auto dir = temp_dir("roundtrip");
  torch::manual_seed(1);
  SRNet a(SRNetConfig{});
  torch::manual_seed(2);
  SRNet b(SRNetConfig{});
  ASSERT_NE(parameter_hash(*a), parameter_hash(*b));
  const nlohmann::json header{{"kind", "sr_net"}, {"config", to_json(a->config())}};
  save_checkpoint(dir / "a.ckpt", header, *a);
  EXPECT_EQ(read_checkpoint_header(dir / "a.ckpt"), header);
  EXPECT_EQ(load_checkpoint(dir / "a.ckpt", *b), header);
  EXPECT_EQ(parameter_hash(*a), parameter_hash(*b));
}

TEST(Checkpoint, RejectsArchitectureMismatch) {
  const auto dir = temp_dir("mismatch");
  SRNet a(SRNetConfig{});
  SRNetConfig other;
  other.rrdb_count = 2;
  SRNet b(other);
  save_checkpoint(dir / "a.ckpt", {{"kind", "sr_net"}}, *a);
  EXPECT_THROW(load_checkpoint(dir / "a.ckpt", *b), FormatError);
  SRNetConfig wide;
  wide.base_channels = 8;
  wide.growth_channels = 4;
  SRNet c(wide);
  EXPECT_THROW(load_checkpoint(dir / "a.ckpt", *c), FormatError);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = temp_dir("corrupt");
  Conv3dUnit conv(2, 3, 3);
  save_checkpoint(dir / "c.ckpt", {{"kind", "conv"}}, *conv);
  const auto size = std::filesystem::file_size(dir / "c.ckpt");

  std::filesystem::copy_file(dir / "c.ckpt", dir / "short.ckpt");
  std::filesystem::resize_file(dir / "short.ckpt", size - 5);
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt", *conv), FormatError);

  std::filesystem::copy_file(dir / "c.ckpt", dir / "long.ckpt");
  std::ofstream(dir / "long.ckpt", std::ios::app | std::ios::binary) << "x";
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt", *conv), FormatError);

  std::ofstream(dir / "magic.ckpt", std::ios::binary) << "NOPE";
  EXPECT_THROW(read_checkpoint_header(dir / "magic.ckpt"), FormatError);
  EXPECT_THROW(read_checkpoint_header(dir / "missing.ckpt"), FormatError);
}

}  // namespace
}  // namespace rm3d::nn
