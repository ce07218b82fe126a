#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rm3d/grid_ops.hpp"
#include "rm3d/oracle.hpp"

namespace rm3d {

struct SplitFractions {
  double train = 0.0;
  double val = 0.0;
};

struct SplitCounts {
  int train = 0;
  int val = 0;
};

// floor(n * fraction) per split, leftover to val, at least one train item
// whenever n >= 1.
SplitCounts split_counts(int n, const SplitFractions& fractions);

struct DatasetConfig {
  int env_count = 64;
  int tx_per_env = 4;
  int hr_env_count = 8;
  int test_env_count = 16;
  double resolution = 1.0;
  double lr_resolution = 4.0;
  SceneGenConfig scene;
  TransmitterGenConfig transmitter;
  OraclePropagationParams oracle;
  NormalizationWindow window;
  SplitFractions pool_split{437.0 / 517.0, 80.0 / 517.0};
  SplitFractions hr_split{40.0 / 60.0, 20.0 / 60.0};
  std::uint64_t seed = 7;

  void validate() const;
};

nlohmann::json to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct EnvironmentEntry {
  int env_id = 0;
  Split split = Split::kTrain;
  bool has_hr = false;
  std::string scene_path;
  std::string env_path;
};

struct SampleRecord {
  int env_id = 0;
  int tx_id = 0;
  Vec3 tx_location{};
  std::string scene_path;
  std::string env_path;
  std::string tx_path;
  std::string lr_path;
  std::optional<std::string> hr_path;
};

struct HybridDatasetManifest {
  DatasetConfig config;
  // HR environments in selection order; the first m form the size-m subset.
  std::vector<int> hr_envs;
  std::vector<EnvironmentEntry> environments;
  std::vector<SampleRecord> records;

  const EnvironmentEntry& environment(int env_id) const;
  int count(Split s) const;
};

nlohmann::json to_json(const HybridDatasetManifest& m);
HybridDatasetManifest manifest_from_json(const nlohmann::json& j);

std::string env_name(int env_id);
std::string record_name(int env_id, int tx_id);

// Generates scenes, transmitters and raw (dB) LR/HR maps under root, assigns
// splits and writes root/manifest.json atomically.
HybridDatasetManifest build_hybrid_dataset(const DatasetConfig& cfg, const std::filesystem::path& root);

// Environment-level split of the pool. The HR environments are split with
// hr_split such that every prefix of hr_envs follows the same rule (the
// size-m subsets stay consistent); the remaining environments fill the
// pool_split totals. Test environments keep their split.
void split_dataset(HybridDatasetManifest& manifest, const SplitFractions& pool, const SplitFractions& hr,
                   std::uint64_t seed);

HybridDatasetManifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const HybridDatasetManifest& m);

// In-memory training sample with normalized labels.
struct Sample {
  int env_id = 0;
  int tx_id = 0;
  Split split = Split::kTrain;
  GridSpec fine;
  GridSpec coarse;
  torch::Tensor env_tx;     // (2, X, Y, Z)
  torch::Tensor lr_inputs;  // (3, x, y, z): env, tx, LoS at the coarse grid
  torch::Tensor lr_label;   // (1, x, y, z)
  torch::Tensor hr_label;   // (1, X, Y, Z), undefined when absent
};

enum class Resolution { kLow, kHigh };

// Loads every record of the split; with kHigh only records carrying an HR
// map are returned. Containers are validated on load.
std::vector<Sample> load_samples(const HybridDatasetManifest& manifest, const std::filesystem::path& root, Split split,
                                 Resolution resolution);

// Index batches for one epoch: a seeded shuffle (mt19937_64 keyed by seed
// and epoch) cut into batches; the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                    int epoch);

struct Batch {
  torch::Tensor env_tx;
  torch::Tensor lr_inputs;
  torch::Tensor lr_label;
  torch::Tensor hr_label;
};

// hr_label is stacked only when every selected sample carries one.
Batch load_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);

// Raw oracle maps for one scene/transmitter; shared by the builder and the
// consistency checks.
RadioMapTensor raw_map(const Scene& scene, const DatasetConfig& cfg, const Vec3& tx, double resolution);

}  // namespace rm3d
