#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "rm3d/container.hpp"

using namespace rm3d;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "rm3d_container_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Container, HeaderLayout) {
  const GridSpec g({1.0, -2.0, 0.5}, 0.25, {2, 3, 4});
  const auto bytes = encode_volume(Volume{g, std::vector<float>(24, 1.0f)});
  ASSERT_EQ(bytes.size(), 51u + 24u * 4u);
  EXPECT_EQ(std::memcmp(bytes.data(), "DF3D", 4), 0);
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 1);
  std::uint32_t dims[3];
  std::memcpy(dims, bytes.data() + 7, 12);
  EXPECT_EQ(dims[0], 2u);
  EXPECT_EQ(dims[1], 3u);
  EXPECT_EQ(dims[2], 4u);
  double tail[4];
  std::memcpy(tail, bytes.data() + 19, 32);
  EXPECT_EQ(tail[0], 1.0);
  EXPECT_EQ(tail[1], -2.0);
  EXPECT_EQ(tail[2], 0.5);
  EXPECT_EQ(tail[3], 0.25);
}

TEST(Container, RoundTripBitExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1e3f, 1e3f);
  const GridSpec g({0, 0, 0}, 1.0, {5, 4, 3});
  std::vector<float> f(g.voxel_count());
  for (auto& v : f) v = u(rng);
  f[3] = -0.0f;
  const auto p = scratch("f.df3d");
  write_volume(p, Volume{g, f});
  const auto back = read_volume(p);
  EXPECT_EQ(back.grid, g);
  const auto& bf = std::get<std::vector<float>>(back.payload);
  EXPECT_EQ(std::memcmp(bf.data(), f.data(), f.size() * 4), 0);

  std::vector<std::uint8_t> b(g.voxel_count());
  for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1);
  write_environment(scratch("e.df3d"), EnvironmentTensor(g, b));
  const auto env = read_environment(scratch("e.df3d"));
  EXPECT_TRUE(std::equal(b.begin(), b.end(), env.data().begin(), env.data().end()));
}

TEST(Container, TransmitterNeedsMatchingLocation) {
  const GridSpec g({0, 0, 0}, 1.0, {4, 4, 4});
  write_transmitter(scratch("t.df3d"), TransmitterTensor(g, Vec3{2.2, 1.1, 3.9}));
  EXPECT_EQ(read_transmitter(scratch("t.df3d"), {2.2, 1.1, 3.9}).voxel(), (Index3{2, 1, 3}));
  EXPECT_THROW(read_transmitter(scratch("t.df3d"), {0.5, 0.5, 0.5}), FormatError);
}

TEST(Container, CorruptionNamesFile) {
  const GridSpec g({0, 0, 0}, 1.0, {2, 2, 2});
  auto bytes = encode_volume(Volume{g, std::vector<float>(8, 0.5f)});
  const auto p = scratch("bad_magic.df3d");
  auto broken = bytes;
  broken[0] = 'X';
  write_file_atomic(p, broken);
  try {
    read_volume(p);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad_magic.df3d"), std::string::npos);
  }
  broken = bytes;
  broken[4] = 9;
  EXPECT_THROW(decode_volume(broken, "v"), FormatError);
  broken = bytes;
  broken[6] = 7;
  EXPECT_THROW(decode_volume(broken, "d"), FormatError);
  broken = bytes;
  broken.pop_back();
  EXPECT_THROW(decode_volume(broken, "t"), FormatError);
  EXPECT_THROW(decode_volume(std::span(bytes.data(), 10), "h"), FormatError);
  EXPECT_THROW(read_volume(scratch("missing.df3d")), FormatError);
}

TEST(Container, TypedReadersValidate) {
  const GridSpec g({0, 0, 0}, 1.0, {2, 2, 2});
  write_volume(scratch("rm.df3d"), Volume{g, std::vector<float>(8, 3.0f)});
  EXPECT_THROW(read_radio_map(scratch("rm.df3d"), true), FormatError);
  EXPECT_NO_THROW(read_radio_map(scratch("rm.df3d"), false));
  EXPECT_THROW(read_environment(scratch("rm.df3d")), FormatError);
  write_volume(scratch("nb.df3d"), Volume{g, std::vector<std::uint8_t>(8, 3)});
  EXPECT_THROW(read_environment(scratch("nb.df3d")), FormatError);
}

TEST(Container, AtomicWriteLeavesNoTemp) {
  const auto p = scratch("atomic.txt");
  write_text_atomic(p, "hello");
  EXPECT_TRUE(fs::exists(p));
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
  std::ifstream in(p);
  std::string s;
  in >> s;
  EXPECT_EQ(s, "hello");
}
