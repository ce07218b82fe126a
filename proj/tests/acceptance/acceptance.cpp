// Acceptance driver: one PASS/FAIL line per criterion. Criteria 6-10 train
// the full desk pipeline and take on the order of an hour on one CPU core.

#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "../support/los_oracle.hpp"
#include "../support/metric_oracle.hpp"
#include "CLI11.hpp"
#include "rm3d/container.hpp"
#include "rm3d/experiments.hpp"
#include "rm3d/grid_ops.hpp"
#include "rm3d/metrics.hpp"
#include "rm3d/nn/layers.hpp"
#include "rm3d/nn/sr_net.hpp"
#include "rm3d/strings.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rm3d;

namespace {

// Tolerances and budgets.
constexpr double kMetricRelTol = 1e-10;
constexpr double kMetricSeconds = 10.0;
constexpr double kLosSeconds = 30.0;
constexpr double kStructuralSeconds = 5.0;
constexpr double kFdEpsilon = 1e-4;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradSeconds = 60.0;
constexpr double kConsistencySeconds = 120.0;
constexpr double kPhase1Drop = 0.50;
constexpr double kPhase23Drop = 0.30;
constexpr int kPhase1Epoch = 40;
constexpr double kTrainingSeconds = 3.0 * 3600.0;
constexpr double kOrderingGap = 0.20;
constexpr double kUpperBoundTol = 0.25;
constexpr double kDeltaTol = 0.05;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Report {
  json results = json::object();
  int failures = 0;

  void emit(int id, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
    results[std::to_string(id)] = {{"pass", o.pass}, {"detail", o.detail}};
    if (!o.pass) ++failures;
  }
};

// 1 ------------------------------------------------------------------------

reference::Field random_field(std::mt19937_64& rng, const Index3& dims) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  reference::Field f{dims, std::vector<double>(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2])};
  for (auto& x : f.v) x = u(rng);
  return f;
}

FieldView view(const reference::Field& f) { return {f.v, f.dims}; }

Outcome metric_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> side(3, 5);
  const SsimOptions opts{3};
  double worst = 0.0;
  bool fixed_ok = true;
  for (int n = 0; n < 200; ++n) {
    const Index3 dims{side(rng), side(rng), side(rng)};
    const auto p = random_field(rng, dims);
    const auto t = random_field(rng, dims);
    worst = std::max({worst, rel(nmse(view(p), view(t)), reference::nmse(p, t)),
                      rel(rmse(view(p), view(t)), reference::rmse(p, t)),
                      rel(psnr(view(p), view(t)), reference::psnr(p, t)),
                      rel(ssim3d(view(p), view(t), opts), reference::ssim(p, t, 3))});
    const auto self = evaluate_pair(view(t), view(t), opts);
    fixed_ok = fixed_ok && self.nmse == 0.0 && self.rmse == 0.0 && self.ssim == 1.0 && self.psnr == kPsnrInfinity;
  }
  const double secs = seconds_since(t0);
  return {worst <= kMetricRelTol && fixed_ok && secs < kMetricSeconds,
          cat("200 pairs, max rel err ", worst, " (tol ", kMetricRelTol, "), fixed points ",
              fixed_ok ? "exact" : "NOT exact", ", ", secs, " s (limit ", kMetricSeconds, ")")};
}

// 2 ------------------------------------------------------------------------

Outcome los_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> c(0, 7);
  const GridSpec g({0, 0, 0}, 1.0, {8, 8, 8});
  std::size_t checked = 0, disagreements = 0, skipped = 0;
  for (int scene_id = 0; scene_id < 100; ++scene_id) {
    Scene scene;
    scene.size = {8, 8, 8};
    scene.boxes = reference::random_integer_boxes(rng, 8, 4);
    const auto env = voxelize(scene, g);
    const Index3 tv{c(rng), c(rng), c(rng)};
    const auto los = bresenham_los(env, TransmitterTensor(g, g.centroid(tv)));
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
      const Index3 v = g.unflat(n);
      const auto cls = reference::classify_robust(scene.boxes, g, tv, v);
      if (cls == reference::RobustLos::kAmbiguous) {
        ++skipped;
        continue;
      }
      ++checked;
      if (los.at(v[0], v[1], v[2]) != (cls == reference::RobustLos::kVisible ? 1 : 0)) ++disagreements;
    }
  }
  const double secs = seconds_since(t0);
  return {disagreements == 0 && checked > 0 && secs < kLosSeconds,
          cat("100 scenes, ", checked, " robust voxels checked (", skipped, " ambiguous skipped), ", disagreements,
              " disagreements, ", secs, " s (limit ", kLosSeconds, ")")};
}

// 3 ------------------------------------------------------------------------

Outcome structural_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  torch::manual_seed(303);
  bool rrdb_ok = true;
  for (int trial = 0; trial < 5; ++trial) {
    nn::RRDB rrdb(16, 8, 4, 0.2);
    rrdb->zero_inner();
    const auto x = torch::randn({2, 16, 3, 4, 5});
    rrdb_ok = rrdb_ok && torch::equal(rrdb(x), x) && torch::equal(rrdb->inner(x), torch::zeros_like(x));
  }
  std::mt19937_64 rng(304);
  std::uniform_int_distribution<int> small(1, 4);
  int shuffle_ok = 0;
  for (int n = 0; n < 50; ++n) {
    const std::int64_t b = small(rng), c = small(rng), x = small(rng), y = small(rng), z = small(rng);
    const auto coarse = torch::randn({b, 8 * c, x, y, z});
    const auto fine = torch::randn({b, c, 2 * x, 2 * y, 2 * z});
    if (torch::equal(nn::voxel_unshuffle(nn::voxel_shuffle(coarse)), coarse) &&
        torch::equal(nn::voxel_shuffle(nn::voxel_unshuffle(fine)), fine)) {
      ++shuffle_ok;
    }
  }
  const double secs = seconds_since(t0);
  return {rrdb_ok && shuffle_ok == 50 && secs < kStructuralSeconds,
          cat("RRDB zero-inner passthrough ", rrdb_ok ? "exact" : "BROKEN", ", voxel shuffle round trips ", shuffle_ok,
              "/50 bit-exact, ", secs, " s (limit ", kStructuralSeconds, ")")};
}

// 4 ------------------------------------------------------------------------

struct ToyNetImpl : torch::nn::Module {
  ToyNetImpl() {
    c1 = register_module("c1", torch::nn::Conv3d(torch::nn::Conv3dOptions(1, 4, 3).padding(1)));
    c2 = register_module("c2", torch::nn::Conv3d(torch::nn::Conv3dOptions(4, 4, 3).padding(1)));
    c3 = register_module("c3", torch::nn::Conv3d(torch::nn::Conv3dOptions(4, 1, 1)));
  }
  torch::Tensor forward(const torch::Tensor& x) { return c3(torch::tanh(c2(torch::tanh(c1(x))))); }
  torch::nn::Conv3d c1{nullptr}, c2{nullptr}, c3{nullptr};
};
TORCH_MODULE(ToyNet);

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  torch::manual_seed(404);
  ToyNet net;
  net->to(torch::kFloat64);
  const auto x = torch::rand({2, 1, 4, 4, 4}, torch::kFloat64);
  const LinearExtractor fx(torch::randn({2, 3, 2, 2}, torch::kFloat64));
  const LossWeights w{1.0, 0.2};
  // Targets sit at least 0.05 away from the initial output so no voxel of the
  // L1 term is near its kink within the finite-difference step.
  torch::Tensor target;
  {
    torch::NoGradGuard g;
    const auto out = net(x);
    const auto mag = 0.05 + 0.2 * torch::rand_like(out);
    const auto sign = torch::where(torch::rand_like(out) < 0.5, -torch::ones_like(out), torch::ones_like(out));
    target = out + sign * mag;
  }
  auto params = net->parameters();
  const auto loss = combined_loss(net(x), target, w, fx).total;
  const auto grads = torch::autograd::grad({loss}, params);

  auto loss_at = [&](const std::vector<torch::Tensor>& dir, double step) {
    torch::NoGradGuard g;
    for (std::size_t i = 0; i < params.size(); ++i) params[i].add_(dir[i], step);
    const double v = combined_loss(net(x), target, w, fx).total_value;
    for (std::size_t i = 0; i < params.size(); ++i) params[i].sub_(dir[i], step);
    return v;
  };

  double worst = 0.0;
  for (int d = 0; d < 20; ++d) {
    std::vector<torch::Tensor> dir;
    double norm2 = 0.0;
    for (const auto& p : params) {
      dir.push_back(torch::randn_like(p));
      norm2 += dir.back().pow(2).sum().item<double>();
    }
    double analytic = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      dir[i] /= std::sqrt(norm2);
      analytic += (grads[i] * dir[i]).sum().item<double>();
    }
    const double fd = (loss_at(dir, kFdEpsilon) - loss_at(dir, -kFdEpsilon)) / (2.0 * kFdEpsilon);
    worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-12));
  }
  const double secs = seconds_since(t0);
  return {worst <= kGradRelTol && secs < kGradSeconds,
          cat("20 directions, eps ", kFdEpsilon, ", max rel err ", worst, " (tol ", kGradRelTol, "), ", secs,
              " s (limit ", kGradSeconds, ")")};
}

// 5 ------------------------------------------------------------------------

// Every stored map must equal the oracle field sampled at that map's own
// centroids, bit for bit in float32; LR and HR labels are then two samplings
// of one field and agree wherever they are co-located.
Outcome label_consistency(const fs::path& root, double build_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = read_manifest(root);
  const auto& cfg = m.config;
  std::size_t records = 0, voxels = 0, mismatches = 0;
  for (const auto& r : m.records) {
    if (!r.hr_path) continue;
    ++records;
    std::ifstream in(root / r.scene_path);
    const Scene scene = scene_from_json(json::parse(in));
    for (const auto& [path, res] : {std::pair{root / r.lr_path, cfg.lr_resolution}, {root / *r.hr_path, cfg.resolution}}) {
      const auto stored = read_radio_map(path, false);
      const GridSpec g = scene.grid(res);
      if (!(stored.grid() == g)) {
        mismatches += g.voxel_count();
        continue;
      }
      for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        const float expect = static_cast<float>(path_loss_at(scene, cfg.oracle, r.tx_location, g.centroid(g.unflat(n))));
        ++voxels;
        if (stored.data()[n] != expect) ++mismatches;
      }
    }
  }
  const double secs = build_seconds + seconds_since(t0);
  const bool shape = cfg.env_count == 64 && cfg.tx_per_env == 4 && cfg.hr_env_count == 8;
  return {mismatches == 0 && records > 0 && shape && secs < kConsistencySeconds,
          cat(records, " HR records (N=", cfg.env_count, ", T=", cfg.tx_per_env, ", M=", cfg.hr_env_count, "), ",
              voxels, " voxels, ", mismatches, " mismatches, generation + check ", secs, " s (limit ",
              kConsistencySeconds, ")")};
}

// 6 ------------------------------------------------------------------------

double epoch_loss(const json& rec, int epoch) {
  for (const auto& e : rec["epochs"]) {
    if (e["epoch"].get<int>() == epoch) return e["train_loss"].get<double>();
  }
  throw std::runtime_error(cat("epoch ", epoch, " missing"));
}

Outcome training_smoke(const TrainingRun& run, double secs) {
  const auto p1 = run.phase_record(1), p2 = run.phase_record(2), p3 = run.phase_record(3);
  const double d1 = 1.0 - epoch_loss(p1, kPhase1Epoch) / epoch_loss(p1, 1);
  const double d2 = 1.0 - p2["epochs"].back()["train_loss"].get<double>() / epoch_loss(p2, 1);
  const double d3 = 1.0 - p3["epochs"].back()["train_loss"].get<double>() / epoch_loss(p3, 1);
  const bool hash_ok = p3["lr_hash_before"] == p3["lr_hash_after"];
  const bool ok = d1 >= kPhase1Drop && d2 >= kPhase23Drop && d3 >= kPhase23Drop && hash_ok && secs < kTrainingSeconds;
  return {ok, cat("train loss drop phase1 ", d1 * 100, "% (need ", kPhase1Drop * 100, "%), phase2 ", d2 * 100,
                  "%, phase3 ", d3 * 100, "% (need ", kPhase23Drop * 100, "% each), LR-Net hash ",
                  hash_ok ? "unchanged" : "CHANGED", ", ", secs, " s (limit ", kTrainingSeconds, ")")};
}

// 7 ------------------------------------------------------------------------

Outcome table_ordering(const std::vector<MethodEvaluation>& rows) {
  std::map<std::string, double> nmse;
  for (const auto& r : rows) nmse[r.method] = r.mean.nmse;
  const double g1 = 1.0 - nmse.at("Proposed") / nmse.at("LRNet-Trilinear");
  const double g2 = 1.0 - nmse.at("RadioUNet3D-SR") / nmse.at("RadioUNet3D-Trilinear");
  return {g1 >= kOrderingGap && g2 >= kOrderingGap,
          cat("NMSE Proposed ", nmse.at("Proposed"), " vs LRNet-Trilinear ", nmse.at("LRNet-Trilinear"), " (gain ",
              g1 * 100, "%), RadioUNet3D-SR ", nmse.at("RadioUNet3D-SR"), " vs RadioUNet3D-Trilinear ",
              nmse.at("RadioUNet3D-Trilinear"), " (gain ", g2 * 100, "%), need ", kOrderingGap * 100, "% each")};
}

// 8 ------------------------------------------------------------------------

Outcome m_trend(const SweepResult& r) {
  double n2 = 0.0, n8 = 0.0;
  for (const auto& p : r.points) {
    if (p.x == 2) n2 = p.proposed.nmse;
    if (p.x == 8) n8 = p.proposed.nmse;
  }
  const double full = r.upper_bound->nmse;
  const double gap = std::abs(n8 - full) / full;
  return {n8 <= n2 && gap <= kUpperBoundTol,
          cat("NMSE M=2 ", n2, ", M=8 ", n8, ", FullSR ", full, "; M=8 vs FullSR ", gap * 100, "% (tol ",
              kUpperBoundTol * 100, "%)")};
}

// 9 ------------------------------------------------------------------------

Outcome delta_trend(const SweepResult& r) {
  bool ok = true;
  std::string series;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    series += cat(i ? ", " : "", "dL=", r.points[i].x, ": ", r.points[i].proposed.nmse);
    if (i > 0 && r.points[i].proposed.nmse < (1.0 - kDeltaTol) * r.points[i - 1].proposed.nmse) ok = false;
  }
  return {ok, cat("NMSE ", series, " (non-decreasing within ", kDeltaTol * 100, "%)")};
}

// 10 -----------------------------------------------------------------------

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const TrainingRun& a, const TrainingRun& b, const fs::path& data_a, const fs::path& data_b) {
  bool losses_equal = true;
  std::string finals;
  for (int p = 1; p <= 3; ++p) {
    const auto ra = a.phase_record(p), rb = b.phase_record(p);
    losses_equal = losses_equal && ra["epochs"] == rb["epochs"] && ra["best_val"] == rb["best_val"];
    const double fa = ra["epochs"].back()["train_loss"], fb = rb["epochs"].back()["train_loss"];
    finals += cat(p > 1 ? ", " : "", "phase", p, " ", fa, fa == fb ? " == " : " != ", fb);
  }
  bool ckpt_equal = true;
  for (int p = 1; p <= 3; ++p) ckpt_equal = ckpt_equal && read_bytes(a.checkpoint(p)) == read_bytes(b.checkpoint(p));
  const bool manifest_equal = read_bytes(data_a / "manifest.json") == read_bytes(data_b / "manifest.json");
  return {losses_equal && ckpt_equal && manifest_equal,
          cat("final train losses ", finals, "; all epoch losses ", losses_equal ? "identical" : "DIFFER",
              "; checkpoints ", ckpt_equal ? "identical" : "DIFFER", "; rebuilt manifest ",
              manifest_equal ? "byte-identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  bool reuse = false;
  app.add_option("--work", work, "Working directory for datasets and runs");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_flag("--reuse", reuse, "Keep existing datasets and runs under --work");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                              : std::set<int>(only.begin(), only.end());
  auto wants = [&](std::initializer_list<int> ids) {
    for (int id : ids) {
      if (selected.count(id)) return true;
    }
    return false;
  };

  const fs::path root = fs::absolute(work);
  if (!reuse && fs::exists(root)) fs::remove_all(root);
  fs::create_directories(root);

  Report report;
  auto guarded = [&](int id, const std::function<Outcome()>& fn) {
    if (!selected.count(id)) return;
    try {
      report.emit(id, fn());
    } catch (const std::exception& e) {
      report.emit(id, {false, cat("error: ", e.what())});
    }
  };

  guarded(1, metric_equivalence);
  guarded(2, los_correctness);
  guarded(3, structural_identities);
  guarded(4, gradient_fidelity);

  const PipelineConfig cfg;
  const fs::path data_dir = root / "data";
  double build_seconds = 0.0;
  if (wants({5, 6, 7, 8, 9, 10})) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_dataset(cfg.dataset, data_dir);
    build_seconds = seconds_since(t0);
  }
  guarded(5, [&] { return label_consistency(data_dir, build_seconds); });
  if (!wants({6, 7, 8, 9, 10})) {
    std::cout << report.failures << " criteria failed" << std::endl;
    return report.failures == 0 ? 0 : 1;
  }

  const PipelineData data = load_pipeline_data(data_dir);
  TrainingRun main_run(root / "run_proposed", cfg, {});
  double train_seconds = 0.0;
  {
    const auto t0 = std::chrono::steady_clock::now();
    main_run.run_all(data);
    train_seconds = seconds_since(t0);
  }
  guarded(6, [&] { return training_smoke(main_run, train_seconds); });

  guarded(7, [&] {
    TrainingRun unet(root / "run_radio_unet3d", cfg, {StageOne::kRadioUNet3D, -1, false});
    // Phase 2 trains SR-Net on ground-truth LR maps only, so it is shared.
    if (!unet.completed(1)) unet.run_phase(1, data);
    if (!unet.completed(2)) unet.adopt_phase(2, main_run);
    if (!unet.completed(3)) unet.run_phase(3, data);
    const auto rows = evaluate_suite(main_run, unet, data);
    write_text_atomic(root / "table.txt", format_table(rows));
    std::cout << format_table(rows);
    return table_ordering(rows);
  });

  guarded(8, [&] {
    const auto r = sweep_m(main_run, data, {2, 8}, root / "sweep_m", true);
    write_text_atomic(root / "sweep_m.json", to_json(r).dump(2) + "\n");
    return m_trend(r);
  });

  guarded(9, [&] {
    std::vector<DeltaSetting> settings;
    for (int d : {2, 4, 8}) {
      if (d == cfg.dataset.lr_resolution) {
        settings.push_back({4.0, data_dir, main_run.dir()});
      } else {
        settings.push_back({static_cast<double>(d), root / cat("data_dl", d), root / cat("run_dl", d)});
      }
    }
    const auto r = sweep_delta(cfg, settings);
    write_text_atomic(root / "sweep_delta.json", to_json(r).dump(2) + "\n");
    return delta_trend(r);
  });

  guarded(10, [&] {
    const fs::path rebuild = root / "data_rebuild";
    if (fs::exists(rebuild)) fs::remove_all(rebuild);
    build_hybrid_dataset(cfg.dataset, rebuild);
    const fs::path rerun_dir = root / "run_proposed_rerun";
    if (fs::exists(rerun_dir)) fs::remove_all(rerun_dir);
    TrainingRun rerun(rerun_dir, cfg, {});
    rerun.run_all(data);
    return determinism(main_run, rerun, data_dir, rebuild);
  });

  write_text_atomic(root / "acceptance.json", report.results.dump(2) + "\n");
  std::cout << report.failures << " criteria failed" << std::endl;
  return report.failures == 0 ? 0 : 1;
}
