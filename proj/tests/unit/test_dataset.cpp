#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "rm3d/container.hpp"
#include "rm3d/dataset.hpp"
#include "rm3d/errors.hpp"

namespace rm3d {
namespace {

DatasetConfig small_config() {
  DatasetConfig c;
  c.env_count = 6;
  c.tx_per_env = 2;
  c.hr_env_count = 3;
  c.test_env_count = 2;
  c.scene.region_size = {16.0, 16.0, 16.0};
  c.scene.min_boxes = 1;
  c.scene.max_boxes = 3;
  c.scene.min_height = 4.0;
  c.scene.max_height = 12.0;
  c.scene.min_footprint = 3.0;
  c.scene.max_footprint = 5.0;
  c.transmitter.min_height = 3.0;
  c.transmitter.max_height = 10.0;
  return c;
}

std::filesystem::path fresh(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("rm3d_ds_" + name);
  std::filesystem::remove_all(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TEST(Splits, CountsUseFloorWithLeftoverToVal) {
  const SplitFractions hr{40.0 / 60.0, 20.0 / 60.0};
  EXPECT_EQ(split_counts(8, hr).train, 5);
  EXPECT_EQ(split_counts(8, hr).val, 3);
  EXPECT_EQ(split_counts(1, hr).train, 1);
  EXPECT_EQ(split_counts(1, hr).val, 0);
  EXPECT_EQ(split_counts(0, hr).train, 0);
  const SplitFractions pool{437.0 / 517.0, 80.0 / 517.0};
  EXPECT_EQ(split_counts(64, pool).train, 54);
  EXPECT_EQ(split_counts(64, pool).val, 10);
  EXPECT_THROW(split_counts(4, {0.8, 0.5}), ParameterError);
}

TEST(Splits, HrPrefixesFollowTheSameRule) {
  HybridDatasetManifest m;
  for (int e = 0; e < 20; ++e) m.environments.push_back({e, Split::kTrain, false, "", ""});
  m.hr_envs = {7, 3, 12, 0, 19, 5, 8, 11};
  const SplitFractions hr{40.0 / 60.0, 20.0 / 60.0};
  split_dataset(m, {437.0 / 517.0, 80.0 / 517.0}, hr, 1);
  for (int p = 1; p <= 8; ++p) {
    int train = 0;
    for (int n = 0; n < p; ++n) train += m.environment(m.hr_envs[n]).split == Split::kTrain;
    EXPECT_EQ(train, split_counts(p, hr).train) << "prefix " << p;
  }
  EXPECT_EQ(m.count(Split::kTrain), split_counts(20, {437.0 / 517.0, 80.0 / 517.0}).train);
}

TEST(Dataset, BuildLayoutAndManifest) {
  const auto root = fresh("build");
  const auto cfg = small_config();
  const auto m = build_hybrid_dataset(cfg, root);
  EXPECT_EQ(m.records.size(), 16u);
  EXPECT_EQ(m.hr_envs.size(), 3u);
  EXPECT_EQ(m.count(Split::kTest), 2);
  EXPECT_EQ(m.count(Split::kTrain) + m.count(Split::kVal), 6);

  std::set<int> hr(m.hr_envs.begin(), m.hr_envs.end());
  for (const auto& r : m.records) {
    const auto& e = m.environment(r.env_id);
    EXPECT_TRUE(std::filesystem::exists(root / r.lr_path));
    EXPECT_EQ(r.hr_path.has_value(), e.split == Split::kTest || hr.count(r.env_id) > 0);
    EXPECT_EQ(r.hr_path.has_value(), e.has_hr);
  }
  const auto back = read_manifest(root);
  EXPECT_EQ(to_json(back), to_json(m));

  // Maps are stored in dB and normalized when loaded.
  const auto raw = read_radio_map(root / m.records[0].lr_path, false);
  EXPECT_FALSE(raw.normalized());
  EXPECT_GE(*std::min_element(raw.data().begin(), raw.data().end()), cfg.oracle.loss_floor_db);
}

TEST(Dataset, RebuildIsByteIdentical) {
  const auto a = fresh("det_a"), b = fresh("det_b");
  const auto m = build_hybrid_dataset(small_config(), a);
  build_hybrid_dataset(small_config(), b);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  for (const auto& r : m.records) EXPECT_EQ(slurp(a / r.lr_path), slurp(b / r.lr_path));
}

TEST(Dataset, LoadSamplesShapesAndFilters) {
  const auto root = fresh("load");
  const auto m = build_hybrid_dataset(small_config(), root);
  const auto low = load_samples(m, root, Split::kTrain, Resolution::kLow);
  const auto high = load_samples(m, root, Split::kTrain, Resolution::kHigh);
  const auto test = load_samples(m, root, Split::kTest, Resolution::kHigh);
  EXPECT_EQ(static_cast<int>(low.size()), m.count(Split::kTrain) * 2);
  EXPECT_LT(high.size(), low.size());
  EXPECT_EQ(test.size(), 4u);
  const auto& s = test.front();
  EXPECT_EQ(s.env_tx.sizes(), (std::vector<std::int64_t>{2, 16, 16, 16}));
  EXPECT_EQ(s.lr_inputs.sizes(), (std::vector<std::int64_t>{3, 4, 4, 4}));
  EXPECT_EQ(s.lr_label.sizes(), (std::vector<std::int64_t>{1, 4, 4, 4}));
  EXPECT_EQ(s.hr_label.sizes(), (std::vector<std::int64_t>{1, 16, 16, 16}));
  EXPECT_GE(s.hr_label.min().item<float>(), 0.0f);
  EXPECT_LE(s.hr_label.max().item<float>(), 1.0f);

  const auto batch = load_batch(low, {0, 1});
  EXPECT_EQ(batch.lr_inputs.size(0), 2);
}

TEST(Dataset, LoadRejectsGridMismatch) {
  const auto root = fresh("mismatch");
  auto m = build_hybrid_dataset(small_config(), root);
  std::filesystem::copy_file(root / *m.records.back().hr_path, root / m.records.back().lr_path,
                             std::filesystem::copy_options::overwrite_existing);
  EXPECT_THROW(load_samples(m, root, m.environment(m.records.back().env_id).split, Resolution::kLow), FormatError);
}

TEST(Batches, ShuffledCoverAndDeterministic) {
  const auto a = epoch_batches(10, 4, 3, 1);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.back().size(), 2u);
  std::set<std::size_t> seen;
  for (const auto& b : a) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(a, epoch_batches(10, 4, 3, 1));
  EXPECT_NE(a, epoch_batches(10, 4, 3, 2));
  EXPECT_THROW(epoch_batches(3, 0, 1, 1), ParameterError);
}

}  // namespace
}  // namespace rm3d
