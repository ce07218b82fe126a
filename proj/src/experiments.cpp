#include "rm3d/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "rm3d/container.hpp"
#include "rm3d/errors.hpp"
#include "rm3d/grid_ops.hpp"
#include "rm3d/nn/checkpoint.hpp"
#include "rm3d/nn/convert.hpp"
#include "rm3d/strings.hpp"
#include "rm3d/trilinear.hpp"

namespace fs = std::filesystem;

namespace rm3d {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError(cat("cannot open ", p));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(cat(p, ": ", e.what()));
  }
}

std::string phase_key(int phase) {
  if (phase < 1 || phase > 3) throw ParameterError(cat("phase must be 1, 2 or 3, got ", phase));
  return std::to_string(phase);
}

}  // namespace

void PipelineConfig::validate() const {
  dataset.validate();
  lr_net.validate();
  sr_net.validate();
  training.validate();
  if (lr_net.input_resolution != dataset.resolution || lr_net.working_resolution != dataset.lr_resolution) {
    throw ResolutionMismatchError(cat("LR-Net resolutions ", lr_net.input_resolution, " -> ", lr_net.working_resolution,
                                      " do not match the dataset's ", dataset.resolution, " -> ",
                                      dataset.lr_resolution));
  }
  if (sr_net.ratio() * dataset.resolution != dataset.lr_resolution) {
    throw ResolutionMismatchError(cat("SR-Net upsamples by ", sr_net.ratio(), " but the dataset ratio is ",
                                      dataset.lr_resolution / dataset.resolution));
  }
  if (full_sr_phase2_epochs < 1 || full_sr_phase3_epochs < 1) throw ParameterError("FullSR epochs must be >= 1");
}

PipelineConfig PipelineConfig::with_lr_resolution(double lr_resolution) const {
  PipelineConfig c = *this;
  const double ratio = lr_resolution / dataset.resolution;
  const int u = static_cast<int>(std::lround(std::log2(ratio)));
  if (u < 1 || std::ldexp(1.0, u) != ratio) {
    throw ParameterError(cat("LR resolution ", lr_resolution, " is not a power-of-two multiple of ", dataset.resolution));
  }
  c.dataset.lr_resolution = lr_resolution;
  c.lr_net.working_resolution = lr_resolution;
  c.sr_net.upsample_blocks = u;
  c.validate();
  return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {{"dataset", to_json(c.dataset)},
          {"lr_net", nn::to_json(c.lr_net)},
          {"sr_net", nn::to_json(c.sr_net)},
          {"training", to_json(c.training)},
          {"init_seed", c.init_seed},
          {"full_sr_phase2_epochs", c.full_sr_phase2_epochs},
          {"full_sr_phase3_epochs", c.full_sr_phase3_epochs}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (j.contains("dataset")) c.dataset = dataset_config_from_json(j["dataset"]);
  c.lr_net.input_resolution = c.dataset.resolution;
  c.lr_net.working_resolution = c.dataset.lr_resolution;
  if (j.contains("lr_net")) {
    auto lj = j["lr_net"];
    if (!lj.contains("input_resolution")) lj["input_resolution"] = c.dataset.resolution;
    if (!lj.contains("working_resolution")) lj["working_resolution"] = c.dataset.lr_resolution;
    c.lr_net = nn::lr_config_from_json(lj);
  }
  c.sr_net.upsample_blocks =
      static_cast<int>(std::lround(std::log2(c.dataset.lr_resolution / c.dataset.resolution)));
  if (j.contains("sr_net")) {
    auto sj = j["sr_net"];
    if (!sj.contains("upsample_blocks")) sj["upsample_blocks"] = c.sr_net.upsample_blocks;
    c.sr_net = nn::sr_config_from_json(sj);
  }
  if (j.contains("training")) c.training = training_config_from_json(j["training"]);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.full_sr_phase2_epochs = j.value("full_sr_phase2_epochs", c.full_sr_phase2_epochs);
  c.full_sr_phase3_epochs = j.value("full_sr_phase3_epochs", c.full_sr_phase3_epochs);
  c.validate();
  return c;
}

PipelineData load_pipeline_data(const fs::path& root) {
  PipelineData d;
  d.manifest = read_manifest(root);
  d.root = root;
  d.lr_train = load_samples(d.manifest, root, Split::kTrain, Resolution::kLow);
  d.lr_val = load_samples(d.manifest, root, Split::kVal, Resolution::kLow);
  d.hr_train = load_samples(d.manifest, root, Split::kTrain, Resolution::kHigh);
  d.hr_val = load_samples(d.manifest, root, Split::kVal, Resolution::kHigh);
  d.test = load_samples(d.manifest, root, Split::kTest, Resolution::kHigh);
  return d;
}

HybridDatasetManifest ensure_dataset(const DatasetConfig& cfg, const fs::path& root) {
  if (fs::exists(root / "manifest.json")) {
    auto m = read_manifest(root);
    if (to_json(m.config) != to_json(cfg)) {
      throw FormatError(cat(root, " holds a dataset built with a different config"));
    }
    return m;
  }
  return build_hybrid_dataset(cfg, root);
}

std::vector<Sample> hr_prefix(const std::vector<Sample>& samples, const HybridDatasetManifest& m, int count) {
  if (count < 0 || count > static_cast<int>(m.hr_envs.size())) {
    throw ParameterError(cat("HR subset size ", count, " outside [0, ", m.hr_envs.size(), "]"));
  }
  const std::set<int> keep(m.hr_envs.begin(), m.hr_envs.begin() + count);
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (keep.count(s.env_id) && s.hr_label.defined()) out.push_back(s);
  }
  return out;
}

std::vector<Sample> with_computed_hr(const std::vector<Sample>& samples, const HybridDatasetManifest& m,
                                     const fs::path& root) {
  std::map<int, Scene> scenes;
  std::vector<Sample> out;
  for (const auto& s : samples) {
    Sample c = s;
    if (!c.hr_label.defined()) {
      auto it = scenes.find(s.env_id);
      if (it == scenes.end()) {
        it = scenes.emplace(s.env_id, scene_from_json(read_json(root / m.environment(s.env_id).scene_path))).first;
      }
      const SampleRecord* rec = nullptr;
      for (const auto& r : m.records) {
        if (r.env_id == s.env_id && r.tx_id == s.tx_id) rec = &r;
      }
      if (!rec) throw FormatError(cat("no record for env ", s.env_id, " tx ", s.tx_id));
      const auto raw = raw_map(it->second, m.config, rec->tx_location, m.config.resolution);
      c.hr_label = nn::to_tensor(normalize_rm(raw, m.config.window));
    }
    out.push_back(std::move(c));
  }
  return out;
}

nlohmann::json to_json(const RunSpec& s) {
  return {{"stage_one", s.stage_one == StageOne::kLRNet ? "lr_net" : "radio_unet3d"},
          {"hr_envs", s.hr_envs},
          {"full_sr", s.full_sr}};
}

RunSpec run_spec_from_json(const nlohmann::json& j) {
  RunSpec s;
  const std::string kind = j.value("stage_one", "lr_net");
  if (kind == "lr_net") {
    s.stage_one = StageOne::kLRNet;
  } else if (kind == "radio_unet3d") {
    s.stage_one = StageOne::kRadioUNet3D;
  } else {
    throw ParameterError(cat("unknown stage-one model '", kind, "'"));
  }
  s.hr_envs = j.value("hr_envs", -1);
  s.full_sr = j.value("full_sr", false);
  if (s.full_sr && s.hr_envs >= 0) throw ParameterError("full_sr and hr_envs are exclusive");
  return s;
}

TrainingRun::TrainingRun(fs::path dir, PipelineConfig cfg, RunSpec spec)
    : dir_(std::move(dir)), cfg_(std::move(cfg)), spec_(spec) {
  cfg_.validate();
  fs::create_directories(dir_);
  const auto state_path = dir_ / "state.json";
  if (fs::exists(state_path)) {
    state_ = read_json(state_path);
    if (state_.value("config", nlohmann::json()) != to_json(cfg_) ||
        state_.value("spec", nlohmann::json()) != to_json(spec_)) {
      throw FormatError(cat(dir_, " belongs to a run with a different config or spec"));
    }
  } else {
    state_ = {{"config", to_json(cfg_)}, {"spec", to_json(spec_)}, {"phases", nlohmann::json::object()}};
    save_state();
  }
}

void TrainingRun::save_state() const { write_text_atomic(dir_ / "state.json", state_.dump(2) + "\n"); }

void TrainingRun::record(int phase, nlohmann::json entry) {
  auto& phases = state_["phases"];
  for (int later = phase + 1; later <= 3; ++later) phases.erase(std::to_string(later));
  phases[phase_key(phase)] = std::move(entry);
  save_state();
}

bool TrainingRun::completed(int phase) const { return state_["phases"].contains(phase_key(phase)); }

nlohmann::json TrainingRun::phase_record(int phase) const {
  if (!completed(phase)) throw PhaseOrderError(cat("phase ", phase, " has not run in ", dir_));
  return state_["phases"][phase_key(phase)];
}

fs::path TrainingRun::checkpoint(int phase) const {
  static const char* names[] = {"phase1_lr.ckpt", "phase2_sr.ckpt", "phase3_sr.ckpt"};
  return dir_ / names[std::stoi(phase_key(phase)) - 1];
}

nn::LRNetConfig TrainingRun::stage_one_config() const {
  return spec_.stage_one == StageOne::kLRNet ? cfg_.lr_net : nn::LRNetConfig::radio_unet3d(cfg_.lr_net);
}

nn::LRNet TrainingRun::load_stage_one() const {
  if (!completed(1)) throw PhaseOrderError(cat("no phase-1 checkpoint in ", dir_));
  nn::LRNet net(stage_one_config());
  nn::load_checkpoint(checkpoint(1), *net);
  net->eval();
  return net;
}

nn::SRNet TrainingRun::load_stage_two() const {
  const int phase = completed(3) ? 3 : 2;
  if (!completed(phase)) throw PhaseOrderError(cat("no SR-Net checkpoint in ", dir_));
  nn::SRNet net(cfg_.sr_net);
  nn::load_checkpoint(checkpoint(phase), *net);
  net->eval();
  return net;
}

TrainingConfig TrainingRun::phase_training() const {
  TrainingConfig t = cfg_.training;
  if (spec_.full_sr) {
    t.phase2.epochs = cfg_.full_sr_phase2_epochs;
    t.phase3.epochs = cfg_.full_sr_phase3_epochs;
  }
  return t;
}

std::pair<std::vector<Sample>, std::vector<Sample>> TrainingRun::hr_samples(const PipelineData& data) {
  if (spec_.full_sr) {
    if (!full_sr_cache_) {
      full_sr_cache_.emplace(with_computed_hr(data.lr_train, data.manifest, data.root),
                             with_computed_hr(data.lr_val, data.manifest, data.root));
    }
    return *full_sr_cache_;
  }
  if (spec_.hr_envs >= 0) {
    return {hr_prefix(data.hr_train, data.manifest, spec_.hr_envs), hr_prefix(data.hr_val, data.manifest, spec_.hr_envs)};
  }
  return {data.hr_train, data.hr_val};
}

PhaseResult TrainingRun::run_phase(int phase, const PipelineData& data) {
  phase_key(phase);
  if (to_json(data.manifest.config) != to_json(cfg_.dataset)) {
    throw FormatError(cat("dataset at ", data.root, " does not match the run's dataset config"));
  }
  const TrainingConfig tc = phase_training();
  const PhaseOutput out{dir_ / cat("phase", phase, "_steps.jsonl"), dir_};
  PhaseResult result;
  if (phase == 1) {
    torch::manual_seed(cfg_.init_seed);
    nn::LRNet net(stage_one_config());
    result = train_phase1(net, data.lr_train, data.lr_val, tc, out);
    nn::save_checkpoint(checkpoint(1), {{"kind", "lr_net"}, {"config", nn::to_json(net->config())}, {"phase", 1}},
                        *net);
  } else if (phase == 2) {
    const auto [train, val] = hr_samples(data);
    torch::manual_seed(cfg_.init_seed + 1);
    nn::SRNet net(cfg_.sr_net);
    result = train_phase2(net, train, val, tc, out);
    nn::save_checkpoint(checkpoint(2), {{"kind", "sr_net"}, {"config", nn::to_json(cfg_.sr_net)}, {"phase", 2}}, *net);
  } else {
    if (!completed(1) || !completed(2)) {
      throw PhaseOrderError(cat("phase 3 needs the phase-1 LR-Net and phase-2 SR-Net checkpoints in ", dir_));
    }
    auto lr = load_stage_one();
    nn::SRNet sr(cfg_.sr_net);
    nn::load_checkpoint(checkpoint(2), *sr);
    const auto [train, val] = hr_samples(data);
    result = train_phase3(lr, sr, train, val, tc, out);
    nn::save_checkpoint(checkpoint(3), {{"kind", "sr_net"}, {"config", nn::to_json(cfg_.sr_net)}, {"phase", 3}}, *sr);
  }
  record(phase, to_json(result));
  return result;
}

void TrainingRun::run_all(const PipelineData& data) {
  for (int p = 1; p <= 3; ++p) {
    if (!completed(p)) run_phase(p, data);
  }
}

void TrainingRun::adopt_phase(int phase, const TrainingRun& from) {
  const auto entry = from.phase_record(phase);
  if (to_json(from.cfg_) != to_json(cfg_)) throw ParameterError("cannot adopt a phase from a run with another config");
  const bool same_stage_one = from.stage_one_config().use_los == stage_one_config().use_los &&
                              nn::to_json(from.stage_one_config()) == nn::to_json(stage_one_config());
  const bool same_hr = from.spec_.hr_envs == spec_.hr_envs && from.spec_.full_sr == spec_.full_sr;
  if ((phase == 1 && !same_stage_one) || (phase == 2 && !same_hr) || (phase == 3 && !(same_stage_one && same_hr))) {
    throw ParameterError(cat("phase ", phase, " of ", from.dir_, " was trained on different inputs"));
  }
  if (phase == 3 && (!completed(1) || !completed(2))) throw PhaseOrderError("adopt phases 1 and 2 before phase 3");
  fs::copy_file(from.checkpoint(phase), checkpoint(phase), fs::copy_options::overwrite_existing);
  auto rec = entry;
  rec["adopted_from"] = fs::absolute(from.dir_).string();
  record(phase, rec);
}

nlohmann::json to_json(const MethodEvaluation& e) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : e.per_sample) rows.push_back(to_json(r));
  return {{"method", e.method}, {"mean", to_json(e.mean)}, {"per_sample", rows}};
}

MethodEvaluation evaluate_method(const std::string& method, nn::LRNet& stage_one, nn::SRNet* sr,
                                 const std::vector<Sample>& test, const SsimOptions& ssim) {
  const auto preds = predict_lr(stage_one, test);
  torch::NoGradGuard guard;
  if (sr) (*sr)->eval();
  MethodEvaluation e{method, {}, {}};
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Sample& s = test[i];
    if (!s.hr_label.defined()) throw ParameterError("evaluation samples need HR labels");
    const auto truth = nn::to_radio_map(s.hr_label, s.fine);
    RadioMapTensor pred = sr ? nn::to_radio_map((*sr)->forward(s.env_tx.unsqueeze(0), preds[i].unsqueeze(0))[0], s.fine)
                             : trilinear_upsample(nn::to_radio_map(preds[i], s.coarse), s.fine);
    e.per_sample.push_back(evaluate_pair(pred, truth, ssim));
  }
  e.mean = average(e.per_sample);
  return e;
}

MethodEvaluation evaluate_truth(const std::vector<Sample>& test, const SsimOptions& ssim) {
  MethodEvaluation e{"Ground truth (self)", {}, {}};
  for (const auto& s : test) {
    const auto truth = nn::to_radio_map(s.hr_label, s.fine);
    e.per_sample.push_back(evaluate_pair(truth, truth, ssim));
  }
  e.mean = average(e.per_sample);
  return e;
}

std::vector<MethodEvaluation> evaluate_suite(const TrainingRun& proposed, const TrainingRun& radio_unet,
                                             const PipelineData& data, const SsimOptions& ssim) {
  if (proposed.spec().stage_one != StageOne::kLRNet || radio_unet.spec().stage_one != StageOne::kRadioUNet3D) {
    throw ParameterError("evaluate_suite needs an LR-Net run and a RadioUNet3D run");
  }
  auto unet = radio_unet.load_stage_one();
  auto unet_sr = radio_unet.load_stage_two();
  auto lr = proposed.load_stage_one();
  auto sr = proposed.load_stage_two();
  return {evaluate_method("RadioUNet3D-Trilinear", unet, nullptr, data.test, ssim),
          evaluate_method("RadioUNet3D-SR", unet, &unet_sr, data.test, ssim),
          evaluate_method("LRNet-Trilinear", lr, nullptr, data.test, ssim),
          evaluate_method("Proposed", lr, &sr, data.test, ssim), evaluate_truth(data.test, ssim)};
}

std::string format_table(const std::vector<MethodEvaluation>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  auto pad = [](std::string s, std::size_t w, bool left) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    return left ? s + fill : fill + s;
  };
  std::string out = pad("Method", width, true) + "  " + pad("NMSE (lower)", 12, false) + "  " +
                    pad("RMSE (lower)", 12, false) + "  " + pad("SSIM (higher)", 13, false) + "  " +
                    pad("PSNR dB (higher)", 16, false) + "\n";
  for (const auto& r : rows) {
    const std::string psnr = std::isinf(r.mean.psnr) ? "inf" : fixed(r.mean.psnr, 2);
    out += pad(r.method, width, true) + "  " + pad(fixed(r.mean.nmse, 5), 12, false) + "  " +
           pad(fixed(r.mean.rmse, 5), 12, false) + "  " + pad(fixed(r.mean.ssim, 4), 13, false) + "  " +
           pad(psnr, 16, false) + "\n";
  }
  return out;
}

nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) {
    points.push_back({{"x", p.x}, {"run", p.run}, {"proposed", to_json(p.proposed)}, {"trilinear", to_json(p.trilinear)}});
  }
  nlohmann::json j{{"parameter", r.parameter}, {"points", points}};
  j["upper_bound"] = r.upper_bound ? to_json(*r.upper_bound) : nlohmann::json(nullptr);
  return j;
}

SweepResult sweep_m(const TrainingRun& base, const PipelineData& data, const std::vector<int>& ms,
                    const fs::path& work_dir, bool include_full_sr) {
  if (base.spec().stage_one != StageOne::kLRNet || base.spec().hr_envs != -1 || base.spec().full_sr) {
    throw ParameterError("the M-sweep base must be a default LR-Net run");
  }
  if (!base.completed(3)) throw PhaseOrderError(cat("the M-sweep base ", base.dir(), " has not finished phase 3"));
  const int total = static_cast<int>(data.manifest.hr_envs.size());
  auto lr = base.load_stage_one();
  const auto trilinear = evaluate_method("LRNet-Trilinear", lr, nullptr, data.test).mean;

  auto train_variant = [&](const fs::path& dir, RunSpec spec) {
    TrainingRun run(dir, base.config(), spec);
    if (!run.completed(1)) run.adopt_phase(1, base);
    run.run_all(data);
    return run;
  };

  SweepResult result;
  result.parameter = "M";
  for (int m : ms) {
    if (m < 1 || m > total) throw ParameterError(cat("M = ", m, " outside [1, ", total, "]"));
    SweepPoint p;
    p.x = m;
    p.trilinear = trilinear;
    if (m == total) {
      auto sr = base.load_stage_two();
      p.run = base.dir().string();
      p.proposed = evaluate_method("Proposed", lr, &sr, data.test).mean;
    } else {
      const auto run = train_variant(work_dir / cat("m", m), {StageOne::kLRNet, m, false});
      auto sr = run.load_stage_two();
      p.run = run.dir().string();
      p.proposed = evaluate_method("Proposed", lr, &sr, data.test).mean;
    }
    result.points.push_back(p);
  }
  if (include_full_sr) {
    const auto run = train_variant(work_dir / "full_sr", {StageOne::kLRNet, -1, true});
    auto sr = run.load_stage_two();
    result.upper_bound = evaluate_method("Proposed-FullSR", lr, &sr, data.test).mean;
  }
  return result;
}

SweepResult sweep_delta(const PipelineConfig& base, const std::vector<DeltaSetting>& settings) {
  SweepResult result;
  result.parameter = "lr_resolution";
  for (const auto& s : settings) {
    const PipelineConfig cfg = base.with_lr_resolution(s.lr_resolution);
    ensure_dataset(cfg.dataset, s.data_root);
    const PipelineData data = load_pipeline_data(s.data_root);
    TrainingRun run(s.run_dir, cfg, {});
    run.run_all(data);
    auto lr = run.load_stage_one();
    auto sr = run.load_stage_two();
    SweepPoint p;
    p.x = s.lr_resolution;
    p.run = run.dir().string();
    p.proposed = evaluate_method("Proposed", lr, &sr, data.test).mean;
    p.trilinear = evaluate_method("LRNet-Trilinear", lr, nullptr, data.test).mean;
    result.points.push_back(p);
  }
  return result;
}

std::string sweep_svg(const SweepResult& r, const std::string& title) {
  const double w = 560, h = 360, left = 70, right = 150, top = 40, bottom = 50;
  auto db = [](double v) { return 10.0 * std::log10(std::max(v, 1e-12)); };
  std::vector<double> ys;
  double x_lo = 1e300, x_hi = -1e300;
  for (const auto& p : r.points) {
    ys.push_back(db(p.proposed.nmse));
    ys.push_back(db(p.trilinear.nmse));
    x_lo = std::min(x_lo, std::log2(p.x));
    x_hi = std::max(x_hi, std::log2(p.x));
  }
  if (r.upper_bound) ys.push_back(db(r.upper_bound->nmse));
  if (ys.empty()) throw ParameterError("cannot plot an empty sweep");
  double y_lo = std::floor(*std::min_element(ys.begin(), ys.end())) - 1.0;
  double y_hi = std::ceil(*std::max_element(ys.begin(), ys.end())) + 1.0;
  if (x_hi == x_lo) {
    x_lo -= 1.0;
    x_hi += 1.0;
  }
  auto px = [&](double x) { return left + (std::log2(x) - x_lo) / (x_hi - x_lo) * (w - left - right); };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * (h - top - bottom); };

  std::string s = cat("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"", w, "\" height=\"", h, "\">\n");
  s += cat("<rect width=\"", w, "\" height=\"", h, "\" fill=\"white\"/>\n");
  s += cat("<text x=\"", w / 2, "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">", title, "</text>\n");
  s += cat("<line x1=\"", left, "\" y1=\"", h - bottom, "\" x2=\"", w - right, "\" y2=\"", h - bottom,
           "\" stroke=\"black\"/>\n");
  s += cat("<line x1=\"", left, "\" y1=\"", top, "\" x2=\"", left, "\" y2=\"", h - bottom, "\" stroke=\"black\"/>\n");
  for (const auto& p : r.points) {
    s += cat("<text x=\"", fixed(px(p.x), 1), "\" y=\"", h - bottom + 18, "\" text-anchor=\"middle\" font-size=\"12\">",
             fixed(p.x, 0), "</text>\n");
  }
  for (double y = y_lo; y <= y_hi + 1e-9; y += std::max(1.0, std::round((y_hi - y_lo) / 6.0))) {
    s += cat("<text x=\"", left - 8, "\" y=\"", fixed(py(y) + 4, 1), "\" text-anchor=\"end\" font-size=\"12\">",
             fixed(y, 0), "</text>\n");
  }
  s += cat("<text x=\"", (left + w - right) / 2, "\" y=\"", h - 12, "\" text-anchor=\"middle\" font-size=\"13\">",
           r.parameter, "</text>\n");
  s += cat("<text x=\"18\" y=\"", (top + h - bottom) / 2, "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 ",
           (top + h - bottom) / 2, ")\">NMSE (dB)</text>\n");

  auto polyline = [&](auto value, const char* colour, const char* dash, const char* name, double legend_y) {
    std::string pts;
    for (const auto& p : r.points) pts += cat(fixed(px(p.x), 1), ",", fixed(py(db(value(p))), 1), " ");
    s += cat("<polyline points=\"", pts, "\" fill=\"none\" stroke=\"", colour, "\" stroke-width=\"2\"", dash, "/>\n");
    for (const auto& p : r.points) {
      s += cat("<circle cx=\"", fixed(px(p.x), 1), "\" cy=\"", fixed(py(db(value(p))), 1), "\" r=\"3\" fill=\"", colour,
               "\"/>\n");
    }
    s += cat("<line x1=\"", w - right + 10, "\" y1=\"", legend_y, "\" x2=\"", w - right + 34, "\" y2=\"", legend_y,
             "\" stroke=\"", colour, "\" stroke-width=\"2\"", dash, "/>\n");
    s += cat("<text x=\"", w - right + 40, "\" y=\"", legend_y + 4, "\" font-size=\"12\">", name, "</text>\n");
  };
  polyline([](const SweepPoint& p) { return p.proposed.nmse; }, "#1f5fbf", "", "Proposed", top + 10);
  polyline([](const SweepPoint& p) { return p.trilinear.nmse; }, "#c0392b", " stroke-dasharray=\"6 4\"",
           "LRNet-Trilinear", top + 30);
  if (r.upper_bound) {
    const double y = py(db(r.upper_bound->nmse));
    s += cat("<line x1=\"", left, "\" y1=\"", fixed(y, 1), "\" x2=\"", w - right, "\" y2=\"", fixed(y, 1),
             "\" stroke=\"#2e8b57\" stroke-width=\"2\" stroke-dasharray=\"2 3\"/>\n");
    s += cat("<line x1=\"", w - right + 10, "\" y1=\"", top + 50, "\" x2=\"", w - right + 34, "\" y2=\"", top + 50,
             "\" stroke=\"#2e8b57\" stroke-width=\"2\" stroke-dasharray=\"2 3\"/>\n");
    s += cat("<text x=\"", w - right + 40, "\" y=\"", top + 54, "\" font-size=\"12\">Proposed-FullSR</text>\n");
  }
  s += "</svg>\n";
  return s;
}

namespace {

struct Traced {
  std::int64_t parameters = 0;
  nn::CostRecorder cost;
};

Traced trace_lr(const nn::LRNetConfig& cfg, const Index3& dims) {
  torch::manual_seed(0);
  nn::LRNet net(cfg);
  net->eval();
  Traced t{nn::parameter_count(*net), {}};
  torch::NoGradGuard guard;
  nn::CostScope scope(t.cost);
  net->forward(torch::zeros({1, cfg.input_channels(), dims[0], dims[1], dims[2]}));
  return t;
}

Traced trace_sr(const nn::SRNetConfig& cfg, const Index3& fine, const Index3& coarse) {
  torch::manual_seed(0);
  nn::SRNet net(cfg);
  net->eval();
  Traced t{nn::parameter_count(*net), {}};
  torch::NoGradGuard guard;
  nn::CostScope scope(t.cost);
  net->forward(torch::zeros({1, 2, fine[0], fine[1], fine[2]}), torch::zeros({1, 1, coarse[0], coarse[1], coarse[2]}));
  return t;
}

ComplexityRow combine(const std::string& name, const std::vector<const Traced*>& parts) {
  ComplexityRow r{name, 0, 0.0, 0.0, 0.0};
  for (const auto* p : parts) {
    r.parameters += p->parameters;
    r.macs += p->cost.macs;
    r.activation_bytes += p->cost.activation_bytes;
    r.peak_layer_bytes = std::max(r.peak_layer_bytes, p->cost.peak_layer_bytes);
  }
  return r;
}

}  // namespace

std::vector<ComplexityRow> complexity_report(const PipelineConfig& cfg) {
  cfg.validate();
  const GridSpec fine =
      GridSpec::from_extent(cfg.dataset.scene.region_origin, cfg.dataset.scene.region_size, cfg.dataset.resolution);
  const GridSpec coarse = fine.coarsened(cfg.dataset.lr_resolution);
  const Traced lr = trace_lr(cfg.lr_net, coarse.dims());
  const Traced unet = trace_lr(nn::LRNetConfig::radio_unet3d(cfg.lr_net), coarse.dims());
  const Traced sr = trace_sr(cfg.sr_net, fine.dims(), coarse.dims());
  Traced tri;
  tri.cost.macs = 8.0 * static_cast<double>(fine.voxel_count());
  tri.cost.activation_bytes = 4.0 * static_cast<double>(fine.voxel_count());
  tri.cost.peak_layer_bytes = 4.0 * static_cast<double>(fine.voxel_count() + coarse.voxel_count());
  nn::LRNetConfig single = cfg.lr_net;
  single.working_resolution = cfg.dataset.resolution;
  const Traced one_stage = trace_lr(single, fine.dims());
  return {combine("RadioUNet3D-Trilinear", {&unet, &tri}), combine("RadioUNet3D-SR", {&unet, &sr}),
          combine("LRNet-Trilinear", {&lr, &tri}), combine("Proposed", {&lr, &sr}),
          combine("Single-Stage", {&one_stage})};
}

nlohmann::json to_json(const std::vector<ComplexityRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"method", r.method},
                   {"parameters", r.parameters},
                   {"macs", r.macs},
                   {"activation_bytes", r.activation_bytes},
                   {"peak_layer_bytes", r.peak_layer_bytes}});
  }
  return out;
}

std::string format_complexity(const std::vector<ComplexityRow>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  auto pad = [](std::string s, std::size_t w, bool left) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    return left ? s + fill : fill + s;
  };
  std::string out = pad("Method", width, true) + "  " + pad("Params", 10, false) + "  " + pad("GMAC", 9, false) + "  " +
                    pad("Act. MB", 9, false) + "  " + pad("Peak MB", 9, false) + "\n";
  for (const auto& r : rows) {
    out += pad(r.method, width, true) + "  " + pad(std::to_string(r.parameters), 10, false) + "  " +
           pad(fixed(r.macs / 1e9, 4), 9, false) + "  " + pad(fixed(r.activation_bytes / 1048576.0, 2), 9, false) +
           "  " + pad(fixed(r.peak_layer_bytes / 1048576.0, 2), 9, false) + "\n";
  }
  return out;
}

namespace {

std::array<std::uint8_t, 3> colormap(double v) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  v = std::clamp(v, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(v));
  const double t = v - i;
  std::array<std::uint8_t, 3> c{};
  for (int n = 0; n < 3; ++n) c[n] = static_cast<std::uint8_t>(std::lround(stops[i][n] + t * (stops[i + 1][n] - stops[i][n])));
  return c;
}

RadioMapTensor as_normalized(const RadioMapTensor& m) { return m.normalized() ? m : normalize_rm(m, {}); }

}  // namespace

std::vector<fs::path> render_slices(const RadioMapTensor& map, const RadioMapTensor* other,
                                    const std::vector<int>& altitudes, const fs::path& prefix, int pixel_scale) {
  const Index3& d = map.grid().dims();
  if (other && !(other->grid() == map.grid())) throw ShapeError("render_slices: the two maps have different grids");
  if (pixel_scale < 1) throw ParameterError("pixel_scale must be >= 1");
  for (int k : altitudes) {
    if (k < 0 || k >= d[2]) throw std::out_of_range(cat("altitude index ", k, " outside [0, ", d[2], ")"));
  }
  const RadioMapTensor a = as_normalized(map);
  std::optional<RadioMapTensor> b;
  if (other) b = as_normalized(*other);
  const int panels = other ? 2 : 1;
  const int gap = other ? pixel_scale : 0;
  const int pw = d[0] * pixel_scale, ph = d[1] * pixel_scale;
  const int width = panels * pw + gap, height = ph;
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());

  std::vector<fs::path> written;
  for (int k : altitudes) {
    const std::string header = cat("P6\n", width, " ", height, "\n255\n");
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + static_cast<std::size_t>(width) * height * 3);
    for (int row = 0; row < height; ++row) {
      const int j = d[1] - 1 - row / pixel_scale;  // y grows upwards
      for (int col = 0; col < width; ++col) {
        std::array<std::uint8_t, 3> c{255, 255, 255};
        if (col < pw) {
          c = colormap(a.at(col / pixel_scale, j, k));
        } else if (b && col >= pw + gap) {
          c = colormap(b->at((col - pw - gap) / pixel_scale, j, k));
        }
        bytes.insert(bytes.end(), c.begin(), c.end());
      }
    }
    const fs::path path = prefix.string() + cat("_k", k, ".ppm");
    write_file_atomic(path, bytes);
    written.push_back(path);
  }
  return written;
}

}  // namespace rm3d
