#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rm3d/dataset.hpp"
#include "rm3d/metrics.hpp"
#include "rm3d/nn/lr_net.hpp"
#include "rm3d/nn/sr_net.hpp"
#include "rm3d/training.hpp"

namespace rm3d {

struct PipelineConfig {
  DatasetConfig dataset;
  nn::LRNetConfig lr_net;
  nn::SRNetConfig sr_net;
  TrainingConfig training;
  // Seeds network initialization (LR-Net with init_seed, SR-Net with
  // init_seed + 1).
  std::uint64_t init_seed = 1;
  // Phase 2/3 epochs for Proposed-FullSR, where every pool environment
  // carries an HR label and an epoch is correspondingly longer.
  int full_sr_phase2_epochs = 12;
  int full_sr_phase3_epochs = 4;

  // Resolutions must chain: lr_net works at dataset.lr_resolution from
  // dataset.resolution, and 2^U equals their ratio.
  void validate() const;
  // Same setup at another LR resolution (U and the LR-Net working
  // resolution follow).
  PipelineConfig with_lr_resolution(double lr_resolution) const;
};

nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct PipelineData {
  HybridDatasetManifest manifest;
  std::filesystem::path root;
  std::vector<Sample> lr_train, lr_val;
  std::vector<Sample> hr_train, hr_val;
  std::vector<Sample> test;
};

PipelineData load_pipeline_data(const std::filesystem::path& root);

// Builds the dataset unless root already holds one with the same config;
// a different config under root is an error.
HybridDatasetManifest ensure_dataset(const DatasetConfig& cfg, const std::filesystem::path& root);

// HR samples of the first `count` HR environments (manifest order).
std::vector<Sample> hr_prefix(const std::vector<Sample>& samples, const HybridDatasetManifest& m, int count);

// Copies of the samples with HR labels computed from the stored scenes,
// for the all-environments upper bound.
std::vector<Sample> with_computed_hr(const std::vector<Sample>& samples, const HybridDatasetManifest& m,
                                     const std::filesystem::path& root);

enum class StageOne { kLRNet, kRadioUNet3D };

struct RunSpec {
  StageOne stage_one = StageOne::kLRNet;
  // Train SR-Net on the first hr_envs HR environments; -1 keeps all.
  int hr_envs = -1;
  // HR labels for every pool environment (Proposed-FullSR).
  bool full_sr = false;
};

nlohmann::json to_json(const RunSpec& s);
RunSpec run_spec_from_json(const nlohmann::json& j);

// One two-stage training run in a directory: state.json records completed
// phases, checkpoints are phase1_lr.ckpt, phase2_sr.ckpt, phase3_sr.ckpt
// and per-step logs phase<n>_steps.jsonl.
class TrainingRun {
 public:
  // Creates the directory or reopens it; an existing state must carry the
  // same config and spec (FormatError otherwise).
  TrainingRun(std::filesystem::path dir, PipelineConfig cfg, RunSpec spec);

  // Phase 3 requires phases 1 and 2 (PhaseOrderError). Rerunning a phase
  // drops every later phase from the state.
  PhaseResult run_phase(int phase, const PipelineData& data);
  // Runs whatever of phases 1-3 is missing.
  void run_all(const PipelineData& data);
  // Takes over a phase from another run with identical training inputs.
  void adopt_phase(int phase, const TrainingRun& from);

  bool completed(int phase) const;
  nlohmann::json phase_record(int phase) const;
  std::filesystem::path checkpoint(int phase) const;

  nn::LRNetConfig stage_one_config() const;
  nn::LRNet load_stage_one() const;
  // Phase-3 weights when available, else phase 2.
  nn::SRNet load_stage_two() const;

  const std::filesystem::path& dir() const { return dir_; }
  const PipelineConfig& config() const { return cfg_; }
  const RunSpec& spec() const { return spec_; }

 private:
  void save_state() const;
  void record(int phase, nlohmann::json entry);
  std::pair<std::vector<Sample>, std::vector<Sample>> hr_samples(const PipelineData& data);
  TrainingConfig phase_training() const;

  std::filesystem::path dir_;
  PipelineConfig cfg_;
  RunSpec spec_;
  nlohmann::json state_;
  std::optional<std::pair<std::vector<Sample>, std::vector<Sample>>> full_sr_cache_;
};

struct MethodEvaluation {
  std::string method;
  MetricReport mean;
  std::vector<MetricReport> per_sample;
};

nlohmann::json to_json(const MethodEvaluation& e);

// Stage-one predictions upsampled by SR-Net, or by trilinear interpolation
// when sr is null, scored against the HR test labels.
MethodEvaluation evaluate_method(const std::string& method, nn::LRNet& stage_one, nn::SRNet* sr,
                                 const std::vector<Sample>& test, const SsimOptions& ssim = {});
// Ground truth scored against itself.
MethodEvaluation evaluate_truth(const std::vector<Sample>& test, const SsimOptions& ssim = {});

// The four methods (RadioUNet3D-Trilinear, RadioUNet3D-SR, LRNet-Trilinear,
// Proposed) plus the self-evaluation row.
std::vector<MethodEvaluation> evaluate_suite(const TrainingRun& proposed, const TrainingRun& radio_unet,
                                             const PipelineData& data, const SsimOptions& ssim = {});

// Aligned text table with NMSE, RMSE, SSIM, PSNR columns.
std::string format_table(const std::vector<MethodEvaluation>& rows);

struct SweepPoint {
  double x = 0.0;
  std::string run;
  MetricReport proposed;
  MetricReport trilinear;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepPoint> points;
  std::optional<MetricReport> upper_bound;
};

nlohmann::json to_json(const SweepResult& r);

// Phases 2-3 retrained per M on the first M HR environments, phase 1
// shared with `base`. When M covers every HR environment the base run is
// the sweep point itself. The FullSR upper bound runs under work_dir/full_sr.
SweepResult sweep_m(const TrainingRun& base, const PipelineData& data, const std::vector<int>& ms,
                    const std::filesystem::path& work_dir, bool include_full_sr);

struct DeltaSetting {
  double lr_resolution = 4.0;
  std::filesystem::path data_root;
  std::filesystem::path run_dir;
};

// One dataset and full three-phase run per LR resolution.
SweepResult sweep_delta(const PipelineConfig& base, const std::vector<DeltaSetting>& settings);

// Line plot of NMSE (dB) against the swept parameter.
std::string sweep_svg(const SweepResult& r, const std::string& title);

struct ComplexityRow {
  std::string method;
  std::int64_t parameters = 0;
  double macs = 0.0;
  double activation_bytes = 0.0;
  double peak_layer_bytes = 0.0;
};

// Per-sample inference cost from one traced forward pass per network;
// trilinear interpolation costs 8 MACs per fine voxel. Includes the
// untrained Single-Stage analog (LR-Net run directly at the fine grid).
std::vector<ComplexityRow> complexity_report(const PipelineConfig& cfg);
nlohmann::json to_json(const std::vector<ComplexityRow>& rows);
std::string format_complexity(const std::vector<ComplexityRow>& rows);

// Writes one binary PPM per altitude index (k along the last axis), named
// <prefix>_k<k>.ppm: the map alone, or map | other side by side. Values
// are read on the normalized [0, 1] scale. Altitudes outside the grid throw
// std::out_of_range before anything is written.
std::vector<std::filesystem::path> render_slices(const RadioMapTensor& map, const RadioMapTensor* other,
                                                 const std::vector<int>& altitudes,
                                                 const std::filesystem::path& prefix, int pixel_scale = 8);

}  // namespace rm3d
