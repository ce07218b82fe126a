#include "rm3d/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "rm3d/container.hpp"
#include "rm3d/nn/convert.hpp"
#include "rm3d/strings.hpp"

namespace rm3d {

namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ull));
}

enum Stream : std::uint64_t { kSceneStream = 1, kTxStream = 2, kHrStream = 3, kSplitStream = 4 };

nlohmann::json tx_config_json(const TransmitterGenConfig& c) {
  return {{"min_height", c.min_height},
          {"max_height", c.max_height},
          {"edge_margin", c.edge_margin},
          {"max_attempts", c.max_attempts}};
}

TransmitterGenConfig tx_config_from_json(const nlohmann::json& j) {
  TransmitterGenConfig c;
  c.min_height = j.value("min_height", c.min_height);
  c.max_height = j.value("max_height", c.max_height);
  c.edge_margin = j.value("edge_margin", c.edge_margin);
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  return c;
}

nlohmann::json fractions_json(const SplitFractions& f) { return {{"train", f.train}, {"val", f.val}}; }

SplitFractions fractions_from_json(const nlohmann::json& j, SplitFractions def) {
  return {j.value("train", def.train), j.value("val", def.val)};
}

}  // namespace

SplitCounts split_counts(int n, const SplitFractions& f) {
  if (n < 0) throw ParameterError("split_counts needs n >= 0");
  if (!(f.train >= 0.0 && f.val >= 0.0) || f.train + f.val > 1.0 + 1e-9) {
    throw ParameterError(cat("split fractions must be non-negative and sum to at most 1, got ", f.train, "/", f.val));
  }
  SplitCounts c;
  c.train = static_cast<int>(std::floor(n * f.train + 1e-9));
  if (n >= 1 && c.train == 0) c.train = 1;
  c.val = n - c.train;
  return c;
}

void DatasetConfig::validate() const {
  if (env_count < 1 || tx_per_env < 1) throw ParameterError("dataset needs N >= 1 and T >= 1");
  if (hr_env_count < 0 || hr_env_count > env_count) throw ParameterError("dataset needs 0 <= M <= N");
  if (test_env_count < 0) throw ParameterError("test_env_count must be >= 0");
  const GridSpec fine = GridSpec::from_extent(scene.region_origin, scene.region_size, resolution);
  fine.coarsened(lr_resolution);
  oracle.validate();
}

nlohmann::json to_json(const DatasetConfig& c) {
  return {{"env_count", c.env_count},
          {"tx_per_env", c.tx_per_env},
          {"hr_env_count", c.hr_env_count},
          {"test_env_count", c.test_env_count},
          {"resolution", c.resolution},
          {"lr_resolution", c.lr_resolution},
          {"scene", to_json(c.scene)},
          {"transmitter", tx_config_json(c.transmitter)},
          {"oracle", to_json(c.oracle)},
          {"window", {{"lo_db", c.window.lo_db}, {"hi_db", c.window.hi_db}}},
          {"pool_split", fractions_json(c.pool_split)},
          {"hr_split", fractions_json(c.hr_split)},
          {"seed", c.seed}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.env_count = j.value("env_count", c.env_count);
  c.tx_per_env = j.value("tx_per_env", c.tx_per_env);
  c.hr_env_count = j.value("hr_env_count", c.hr_env_count);
  c.test_env_count = j.value("test_env_count", c.test_env_count);
  c.resolution = j.value("resolution", c.resolution);
  c.lr_resolution = j.value("lr_resolution", c.lr_resolution);
  if (j.contains("scene")) c.scene = scene_config_from_json(j["scene"]);
  if (j.contains("transmitter")) c.transmitter = tx_config_from_json(j["transmitter"]);
  if (j.contains("oracle")) c.oracle = params_from_json(j["oracle"]);
  if (j.contains("window")) {
    c.window.lo_db = j["window"].value("lo_db", c.window.lo_db);
    c.window.hi_db = j["window"].value("hi_db", c.window.hi_db);
  }
  if (j.contains("pool_split")) c.pool_split = fractions_from_json(j["pool_split"], c.pool_split);
  if (j.contains("hr_split")) c.hr_split = fractions_from_json(j["hr_split"], c.hr_split);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ParameterError(cat("unknown split '", s, "'"));
}

const EnvironmentEntry& HybridDatasetManifest::environment(int env_id) const {
  for (const auto& e : environments) {
    if (e.env_id == env_id) return e;
  }
  throw ParameterError(cat("no environment ", env_id, " in manifest"));
}

int HybridDatasetManifest::count(Split s) const {
  return static_cast<int>(std::count_if(environments.begin(), environments.end(),
                                        [&](const EnvironmentEntry& e) { return e.split == s; }));
}

std::string env_name(int env_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "env_%04d", env_id);
  return buf;
}

std::string record_name(int env_id, int tx_id) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "env_%04d_tx_%02d", env_id, tx_id);
  return buf;
}

nlohmann::json to_json(const HybridDatasetManifest& m) {
  nlohmann::json envs = nlohmann::json::array();
  for (const auto& e : m.environments) {
    envs.push_back({{"env_id", e.env_id},
                    {"split", to_string(e.split)},
                    {"has_hr", e.has_hr},
                    {"scene", e.scene_path},
                    {"env", e.env_path}});
  }
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : m.records) {
    nlohmann::json j{{"env_id", r.env_id}, {"tx_id", r.tx_id},     {"tx_location", r.tx_location},
                     {"scene", r.scene_path}, {"env", r.env_path}, {"tx", r.tx_path},
                     {"lr", r.lr_path}};
    j["hr"] = r.hr_path ? nlohmann::json(*r.hr_path) : nlohmann::json(nullptr);
    recs.push_back(j);
  }
  const auto& c = m.config;
  return {{"format_version", kManifestVersion},
          {"N", c.env_count},
          {"T", c.tx_per_env},
          {"M", c.hr_env_count},
          {"resolution", c.resolution},
          {"lr_resolution", c.lr_resolution},
          {"seed", c.seed},
          {"generator", to_json(c)},
          {"hr_envs", m.hr_envs},
          {"environments", envs},
          {"records", recs}};
}

HybridDatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != kManifestVersion) throw FormatError("unsupported manifest format_version");
  HybridDatasetManifest m;
  m.config = dataset_config_from_json(j.at("generator"));
  m.hr_envs = j.at("hr_envs").get<std::vector<int>>();
  for (const auto& e : j.at("environments")) {
    m.environments.push_back({e.at("env_id").get<int>(), split_from_string(e.at("split").get<std::string>()),
                              e.at("has_hr").get<bool>(), e.at("scene").get<std::string>(),
                              e.at("env").get<std::string>()});
  }
  for (const auto& r : j.at("records")) {
    SampleRecord s;
    s.env_id = r.at("env_id").get<int>();
    s.tx_id = r.at("tx_id").get<int>();
    s.tx_location = r.at("tx_location").get<Vec3>();
    s.scene_path = r.at("scene").get<std::string>();
    s.env_path = r.at("env").get<std::string>();
    s.tx_path = r.at("tx").get<std::string>();
    s.lr_path = r.at("lr").get<std::string>();
    if (!r.at("hr").is_null()) s.hr_path = r.at("hr").get<std::string>();
    m.records.push_back(std::move(s));
  }
  return m;
}

RadioMapTensor raw_map(const Scene& scene, const DatasetConfig& cfg, const Vec3& tx, double resolution) {
  return generate_raw_radio_map(scene, cfg.oracle, tx, scene.grid(resolution));
}

void split_dataset(HybridDatasetManifest& m, const SplitFractions& pool, const SplitFractions& hr, std::uint64_t seed) {
  std::vector<int> pool_ids;
  for (const auto& e : m.environments) {
    if (e.split != Split::kTest) pool_ids.push_back(e.env_id);
  }
  std::mt19937_64 rng(derive(seed, kSplitStream));
  const int hr_count = static_cast<int>(m.hr_envs.size());
  const SplitCounts hc = split_counts(hr_count, hr);
  const SplitCounts pc = split_counts(static_cast<int>(pool_ids.size()), pool);

  // Position p of the HR order goes to train exactly when the train count of
  // the size-p prefix grows, so every prefix is split by the same rule.
  std::map<int, Split> assign;
  for (int p = 1; p <= hr_count; ++p) {
    const bool train = split_counts(p, hr).train > split_counts(p - 1, hr).train;
    assign[m.hr_envs[p - 1]] = train ? Split::kTrain : Split::kVal;
  }
  std::vector<int> rest;
  for (int id : pool_ids) {
    if (!assign.count(id)) rest.push_back(id);
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  const int rest_train = std::max(0, pc.train - hc.train);
  for (int n = 0; n < static_cast<int>(rest.size()); ++n) assign[rest[n]] = n < rest_train ? Split::kTrain : Split::kVal;
  for (auto& e : m.environments) {
    if (e.split != Split::kTest) e.split = assign.at(e.env_id);
  }
}

HybridDatasetManifest build_hybrid_dataset(const DatasetConfig& cfg, const fs::path& root) {
  cfg.validate();
  HybridDatasetManifest m;
  m.config = cfg;

  std::vector<int> pool(cfg.env_count);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 hr_rng(derive(cfg.seed, kHrStream));
  std::shuffle(pool.begin(), pool.end(), hr_rng);
  m.hr_envs.assign(pool.begin(), pool.begin() + cfg.hr_env_count);

  for (auto sub : {"scenes", "env", "tx", "lr", "hr"}) fs::create_directories(root / sub);

  const int total = cfg.env_count + cfg.test_env_count;
  for (int e = 0; e < total; ++e) {
    const bool test = e >= cfg.env_count;
    const bool has_hr = test || std::find(m.hr_envs.begin(), m.hr_envs.end(), e) != m.hr_envs.end();
    const Scene scene = generate_scene(cfg.scene, derive(cfg.seed, kSceneStream, static_cast<std::uint64_t>(e)));
    const GridSpec fine = scene.grid(cfg.resolution);

    EnvironmentEntry entry{e, test ? Split::kTest : Split::kTrain, has_hr, "scenes/" + env_name(e) + ".json",
                           "env/" + env_name(e) + ".df3d"};
    write_text_atomic(root / entry.scene_path, scene_to_json(scene, cfg.oracle).dump(2) + "\n");
    write_environment(root / entry.env_path, voxelize(scene, fine));

    std::mt19937_64 tx_rng(derive(cfg.seed, kTxStream, static_cast<std::uint64_t>(e)));
    for (int t = 0; t < cfg.tx_per_env; ++t) {
      SampleRecord r;
      r.env_id = e;
      r.tx_id = t;
      r.tx_location = sample_transmitter(scene, cfg.transmitter, tx_rng);
      r.scene_path = entry.scene_path;
      r.env_path = entry.env_path;
      const std::string name = record_name(e, t);
      r.tx_path = "tx/" + name + ".df3d";
      r.lr_path = "lr/" + name + ".df3d";
      write_transmitter(root / r.tx_path, TransmitterTensor(fine, r.tx_location));
      write_radio_map(root / r.lr_path, raw_map(scene, cfg, r.tx_location, cfg.lr_resolution));
      if (has_hr) {
        r.hr_path = "hr/" + name + ".df3d";
        write_radio_map(root / *r.hr_path, raw_map(scene, cfg, r.tx_location, cfg.resolution));
      }
      m.records.push_back(std::move(r));
    }
    m.environments.push_back(std::move(entry));
  }
  split_dataset(m, cfg.pool_split, cfg.hr_split, cfg.seed);
  write_manifest(root, m);
  return m;
}

void write_manifest(const fs::path& root, const HybridDatasetManifest& m) {
  write_text_atomic(root / "manifest.json", to_json(m).dump(2) + "\n");
}

HybridDatasetManifest read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw FormatError(cat("cannot open ", path));
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(cat(path, ": ", e.what()));
  }
}

std::vector<Sample> load_samples(const HybridDatasetManifest& m, const fs::path& root, Split split,
                                 Resolution resolution) {
  const auto& cfg = m.config;
  const GridSpec fine = GridSpec::from_extent(cfg.scene.region_origin, cfg.scene.region_size, cfg.resolution);
  const GridSpec coarse = fine.coarsened(cfg.lr_resolution);
  std::map<int, EnvironmentTensor> env_cache;
  std::vector<Sample> out;
  for (const auto& r : m.records) {
    const auto& entry = m.environment(r.env_id);
    if (entry.split != split) continue;
    if (resolution == Resolution::kHigh && !r.hr_path) continue;
    auto it = env_cache.find(r.env_id);
    if (it == env_cache.end()) it = env_cache.emplace(r.env_id, read_environment(root / r.env_path)).first;
    const EnvironmentTensor& env = it->second;
    if (!(env.grid() == fine)) throw FormatError(cat(root / r.env_path, ": grid does not match manifest"));
    const auto tx = read_transmitter(root / r.tx_path, r.tx_location);
    if (!(tx.grid() == fine)) throw FormatError(cat(root / r.tx_path, ": grid does not match manifest"));
    const auto lr = read_radio_map(root / r.lr_path, false);
    if (!(lr.grid() == coarse)) throw FormatError(cat(root / r.lr_path, ": grid does not match manifest"));

    Sample s;
    s.env_id = r.env_id;
    s.tx_id = r.tx_id;
    s.split = split;
    s.fine = fine;
    s.coarse = coarse;
    s.env_tx = torch::cat({nn::to_tensor(env), nn::to_tensor(tx)}, 0);
    const auto cenv = downscale_occupancy(env, cfg.lr_resolution);
    const auto ctx = downscale_transmitter(tx, cfg.lr_resolution);
    const auto los = bresenham_los(cenv, ctx);
    s.lr_inputs = torch::cat({nn::to_tensor(cenv), nn::to_tensor(ctx), nn::to_tensor(los)}, 0);
    s.lr_label = nn::to_tensor(normalize_rm(lr, cfg.window));
    if (r.hr_path) {
      const auto hr = read_radio_map(root / *r.hr_path, false);
      if (!(hr.grid() == fine)) throw FormatError(cat(root / *r.hr_path, ": grid does not match manifest"));
      s.hr_label = nn::to_tensor(normalize_rm(hr, cfg.window));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                    int epoch) {
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive(seed, 0x6261746368ull, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t n = 0; n < count; n += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(n),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(count, n + batch_size)));
  }
  return out;
}

Batch load_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  std::vector<torch::Tensor> et, li, ll, hl;
  for (auto i : indices) {
    const Sample& s = samples.at(i);
    et.push_back(s.env_tx);
    li.push_back(s.lr_inputs);
    ll.push_back(s.lr_label);
    if (s.hr_label.defined()) hl.push_back(s.hr_label);
  }
  Batch b{torch::stack(et), torch::stack(li), torch::stack(ll), {}};
  if (hl.size() == indices.size()) b.hr_label = torch::stack(hl);
  return b;
}

}  // namespace rm3d
