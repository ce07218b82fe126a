#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"
#include "rm3d/dataset.hpp"
#include "rm3d/losses.hpp"
#include "rm3d/nn/lr_net.hpp"
#include "rm3d/nn/sr_net.hpp"

namespace rm3d {

struct PhaseSchedule {
  int epochs = 1;
  double learning_rate = 2e-4;
  int batch_size = 4;
  double warmup_fraction = 0.05;
  double plateau_factor = 0.5;
  int plateau_patience = 3;
  double weight_decay = 1e-2;

  void validate() const;
};

struct TrainingConfig {
  PhaseSchedule phase1{40, 2e-4, 32};
  PhaseSchedule phase2{60, 2e-4, 4};
  PhaseSchedule phase3{20, 1e-5, 4};
  LossWeights weights;
  nlohmann::json extractor = {{"kind", "random_conv"}, {"seed", 1234}, {"taps", 3}, {"width", 8}};
  std::uint64_t seed = 17;

  void validate() const;
};

nlohmann::json to_json(const PhaseSchedule& s);
nlohmann::json to_json(const TrainingConfig& c);
TrainingConfig training_config_from_json(const nlohmann::json& j);

// Linear warmup then plateau reductions driven by the per-epoch validation
// loss (an improvement is a relative drop of more than 1e-4).
class WarmupPlateauSchedule {
 public:
  WarmupPlateauSchedule(const PhaseSchedule& s, std::int64_t total_steps);
  double rate(std::int64_t step) const;
  // Returns true when the rate was reduced.
  bool observe(double validation_loss);
  double scale() const { return scale_; }
  std::int64_t warmup_steps() const { return warmup_; }

 private:
  PhaseSchedule s_;
  std::int64_t warmup_;
  double scale_ = 1.0;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  double learning_rate = 0.0;
};

struct PhaseResult {
  int phase = 0;
  std::vector<EpochStats> epochs;
  std::vector<double> lr_trace;
  double best_val = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;
  std::int64_t steps = 0;
  // Parameters tracked by the optimizer.
  std::int64_t optimized_parameters = 0;
  // Phase 3 only: LR-Net hash before and after.
  std::uint64_t lr_hash_before = 0;
  std::uint64_t lr_hash_after = 0;
};

nlohmann::json to_json(const PhaseResult& r);

struct PhaseOutput {
  // Per-step JSON lines {step, mse, l1, perceptual, total, ...}; empty path
  // disables logging.
  std::filesystem::path step_log;
  // Where the divergence dump goes if the loss turns non-finite.
  std::filesystem::path dump_dir;
};

// Stage-1 input for one config: all three channels, or env/tx only.
torch::Tensor lr_network_input(const torch::Tensor& lr_inputs, const nn::LRNetConfig& cfg);

// LR-Net on D_L at the working resolution. Leaves the best-validation
// weights in `net` (final weights when val is empty).
PhaseResult train_phase1(nn::LRNet& net, const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const TrainingConfig& cfg, const PhaseOutput& out = {});

// SR-Net on D_H with ground-truth LR maps as inputs.
PhaseResult train_phase2(nn::SRNet& net, const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const TrainingConfig& cfg, const PhaseOutput& out = {});

// SR-Net fine-tuned on frozen LR-Net predictions; LR-Net is never handed to
// the optimizer and its hash is checked.
PhaseResult train_phase3(nn::LRNet& lr_net, nn::SRNet& sr_net, const std::vector<Sample>& train,
                         const std::vector<Sample>& val, const TrainingConfig& cfg, const PhaseOutput& out = {});

// Mean combined loss, evaluation mode, batch-wise.
double lr_loss(nn::LRNet& net, const std::vector<Sample>& samples, const TrainingConfig& cfg);
double sr_loss_on_labels(nn::SRNet& net, const std::vector<Sample>& samples, const TrainingConfig& cfg);
double end_to_end_loss(nn::LRNet& lr_net, nn::SRNet& sr_net, const std::vector<Sample>& samples,
                       const TrainingConfig& cfg);

// LR-Net predictions (B, 1, x, y, z) for every sample, evaluation mode.
std::vector<torch::Tensor> predict_lr(nn::LRNet& net, const std::vector<Sample>& samples);

}  // namespace rm3d
