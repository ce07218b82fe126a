#include "rm3d/training.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "rm3d/container.hpp"
#include "rm3d/strings.hpp"

namespace rm3d {

namespace {

nlohmann::json schedule_json(const PhaseSchedule& s) {
  return {{"epochs", s.epochs},
          {"learning_rate", s.learning_rate},
          {"batch_size", s.batch_size},
          {"warmup_fraction", s.warmup_fraction},
          {"plateau_factor", s.plateau_factor},
          {"plateau_patience", s.plateau_patience},
          {"weight_decay", s.weight_decay}};
}

PhaseSchedule schedule_from_json(const nlohmann::json& j, PhaseSchedule s) {
  s.epochs = j.value("epochs", s.epochs);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.warmup_fraction = j.value("warmup_fraction", s.warmup_fraction);
  s.plateau_factor = j.value("plateau_factor", s.plateau_factor);
  s.plateau_patience = j.value("plateau_patience", s.plateau_patience);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  return s;
}

// Copies of every parameter and buffer, used for best-validation restore.
class Snapshot {
 public:
  void capture(const torch::nn::Module& m) {
    torch::NoGradGuard guard;
    tensors_.clear();
    for (const auto& p : m.parameters()) tensors_.push_back(p.detach().clone());
    for (const auto& b : m.buffers()) tensors_.push_back(b.detach().clone());
  }
  bool empty() const { return tensors_.empty(); }
  void restore(torch::nn::Module& m) const {
    torch::NoGradGuard guard;
    std::size_t n = 0;
    for (auto& p : m.parameters()) p.copy_(tensors_.at(n++));
    for (auto& b : m.buffers()) b.copy_(tensors_.at(n++));
  }

 private:
  std::vector<torch::Tensor> tensors_;
};

struct StepOutput {
  torch::Tensor pred;
  torch::Tensor target;
};

using StepFn = std::function<StepOutput(const std::vector<std::size_t>&)>;
using ValFn = std::function<std::optional<double>()>;

PhaseResult run_loop(int phase, torch::nn::Module& model, std::vector<torch::Tensor> params, std::size_t sample_count,
                     const PhaseSchedule& sched, const TrainingConfig& cfg, const StepFn& step_fn,
                     const ValFn& val_fn, const PhaseOutput& out) {
  sched.validate();
  if (sample_count == 0) throw ParameterError(cat("phase ", phase, " needs a non-empty training split"));
  const auto fx = make_extractor(cfg.extractor);
  torch::manual_seed(cfg.seed * 31 + static_cast<std::uint64_t>(phase));

  PhaseResult result;
  result.phase = phase;
  for (const auto& p : params) result.optimized_parameters += p.numel();
  torch::optim::AdamW opt(params, torch::optim::AdamWOptions(sched.learning_rate).weight_decay(sched.weight_decay));

  const std::size_t bs = static_cast<std::size_t>(sched.batch_size);
  const std::int64_t per_epoch = static_cast<std::int64_t>((sample_count + bs - 1) / bs);
  WarmupPlateauSchedule lr_sched(sched, per_epoch * sched.epochs);

  std::ofstream log;
  if (!out.step_log.empty()) {
    if (out.step_log.has_parent_path()) std::filesystem::create_directories(out.step_log.parent_path());
    log.open(out.step_log, std::ios::trunc);
  }

  Snapshot best;
  std::int64_t step = 0;
  const std::uint64_t order_seed = cfg.seed * 1000003ull + static_cast<std::uint64_t>(phase);
  for (int epoch = 1; epoch <= sched.epochs; ++epoch) {
    model.train();
    double sum = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : epoch_batches(sample_count, bs, order_seed, epoch)) {
      const double rate = lr_sched.rate(step);
      for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(rate);
      opt.zero_grad();
      const StepOutput so = step_fn(idx);
      const LossBreakdown loss = combined_loss(so.pred, so.target, cfg.weights, *fx);
      if (!std::isfinite(loss.total_value)) {
        if (!out.dump_dir.empty()) {
          const nlohmann::json dump{{"phase", phase},       {"epoch", epoch},   {"step", step},
                                    {"learning_rate", rate}, {"mse", loss.mse}, {"l1", loss.l1},
                                    {"perceptual", loss.perceptual}, {"history", to_json(result)["epochs"]}};
          write_text_atomic(out.dump_dir / "divergence.json", dump.dump(2) + "\n");
        }
        throw DivergenceError(cat("phase ", phase, " loss became non-finite at step ", step));
      }
      loss.total.backward();
      opt.step();
      result.lr_trace.push_back(rate);
      if (log.is_open()) {
        log << nlohmann::json{{"step", step},       {"phase", phase}, {"epoch", epoch},
                              {"mse", loss.mse},     {"l1", loss.l1},  {"perceptual", loss.perceptual},
                              {"total", loss.total_value}, {"lr", rate}}
                   .dump()
            << "\n";
      }
      sum += loss.total_value * static_cast<double>(idx.size());
      seen += idx.size();
      ++step;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = sum / static_cast<double>(seen);
    stats.learning_rate = lr_sched.rate(step - 1);
    stats.val_loss = val_fn();
    const double monitor = stats.val_loss.value_or(stats.train_loss);
    if (stats.val_loss && (best.empty() || *stats.val_loss < result.best_val)) {
      result.best_val = *stats.val_loss;
      result.best_epoch = epoch;
      best.capture(model);
    }
    lr_sched.observe(monitor);
    result.epochs.push_back(stats);
  }
  result.steps = step;
  if (!best.empty()) {
    best.restore(model);
  } else {
    result.best_epoch = sched.epochs;
  }
  model.eval();
  return result;
}

template <typename Fn>
double batched_mean(std::size_t count, std::size_t bs, Fn&& fn) {
  double sum = 0.0;
  for (std::size_t n = 0; n < count; n += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t i = n; i < std::min(count, n + bs); ++i) idx.push_back(i);
    sum += fn(idx) * static_cast<double>(idx.size());
  }
  return sum / static_cast<double>(count);
}

std::vector<Sample> require_hr(const std::vector<Sample>& s, const char* what) {
  for (const auto& x : s) {
    if (!x.hr_label.defined()) throw ParameterError(cat(what, ": every sample needs an HR label"));
  }
  return s;
}

torch::Tensor stack_lr_predictions(const std::vector<torch::Tensor>& preds, const std::vector<std::size_t>& idx) {
  std::vector<torch::Tensor> parts;
  for (auto i : idx) parts.push_back(preds.at(i));
  return torch::stack(parts);
}

}  // namespace

void PhaseSchedule::validate() const {
  if (epochs < 1 || batch_size < 1) throw ParameterError("phase schedule needs epochs >= 1 and batch_size >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ParameterError("warmup_fraction must be in [0, 1)");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ParameterError("plateau_factor must be in (0, 1)");
  if (plateau_patience < 0 || !(weight_decay >= 0.0)) throw ParameterError("invalid plateau patience or weight decay");
}

void TrainingConfig::validate() const {
  phase1.validate();
  phase2.validate();
  phase3.validate();
  weights.validate();
  if (!(phase3.learning_rate < phase2.learning_rate)) {
    throw ParameterError("phase-3 learning rate must be below the phase-2 rate");
  }
}

nlohmann::json to_json(const PhaseSchedule& s) { return schedule_json(s); }

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"phase1", schedule_json(c.phase1)},
          {"phase2", schedule_json(c.phase2)},
          {"phase3", schedule_json(c.phase3)},
          {"lambda", c.weights.lambda},
          {"gamma", c.weights.gamma},
          {"extractor", c.extractor},
          {"seed", c.seed}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  if (j.contains("phase1")) c.phase1 = schedule_from_json(j["phase1"], c.phase1);
  if (j.contains("phase2")) c.phase2 = schedule_from_json(j["phase2"], c.phase2);
  if (j.contains("phase3")) c.phase3 = schedule_from_json(j["phase3"], c.phase3);
  c.weights.lambda = j.value("lambda", c.weights.lambda);
  c.weights.gamma = j.value("gamma", c.weights.gamma);
  if (j.contains("extractor")) c.extractor = j["extractor"];
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

WarmupPlateauSchedule::WarmupPlateauSchedule(const PhaseSchedule& s, std::int64_t total_steps)
    : s_(s), warmup_(std::max<std::int64_t>(1, std::llround(s.warmup_fraction * static_cast<double>(total_steps)))) {}

double WarmupPlateauSchedule::rate(std::int64_t step) const {
  const double ramp = std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(warmup_));
  return s_.learning_rate * scale_ * ramp;
}

bool WarmupPlateauSchedule::observe(double loss) {
  if (loss < best_ * (1.0 - 1e-4)) {
    best_ = loss;
    bad_ = 0;
    return false;
  }
  if (++bad_ > s_.plateau_patience) {
    scale_ *= s_.plateau_factor;
    bad_ = 0;
    return true;
  }
  return false;
}

nlohmann::json to_json(const PhaseResult& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss ? nlohmann::json(*e.val_loss) : nlohmann::json(nullptr)},
                      {"lr", e.learning_rate}});
  }
  nlohmann::json j{{"phase", r.phase},
                   {"epochs", epochs},
                   {"best_epoch", r.best_epoch},
                   {"steps", r.steps},
                   {"optimized_parameters", r.optimized_parameters}};
  j["best_val"] = std::isnan(r.best_val) ? nlohmann::json(nullptr) : nlohmann::json(r.best_val);
  if (r.phase == 3) {
    j["lr_hash_before"] = cat(std::hex, r.lr_hash_before);
    j["lr_hash_after"] = cat(std::hex, r.lr_hash_after);
  }
  return j;
}

torch::Tensor lr_network_input(const torch::Tensor& lr_inputs, const nn::LRNetConfig& cfg) {
  const int ch_dim = lr_inputs.dim() - 4;
  return cfg.use_los ? lr_inputs : lr_inputs.narrow(ch_dim, 0, 2);
}

std::vector<torch::Tensor> predict_lr(nn::LRNet& net, const std::vector<Sample>& samples) {
  torch::NoGradGuard guard;
  net->eval();
  std::vector<torch::Tensor> out;
  constexpr std::size_t kBatch = 32;
  for (std::size_t n = 0; n < samples.size(); n += kBatch) {
    std::vector<torch::Tensor> parts;
    for (std::size_t i = n; i < std::min(samples.size(), n + kBatch); ++i) parts.push_back(samples[i].lr_inputs);
    const auto pred = net->forward(lr_network_input(torch::stack(parts), net->config()));
    for (std::int64_t b = 0; b < pred.size(0); ++b) out.push_back(pred[b]);
  }
  return out;
}

double lr_loss(nn::LRNet& net, const std::vector<Sample>& samples, const TrainingConfig& cfg) {
  torch::NoGradGuard guard;
  net->eval();
  const auto fx = make_extractor(cfg.extractor);
  return batched_mean(samples.size(), 32, [&](const std::vector<std::size_t>& idx) {
    const Batch b = load_batch(samples, idx);
    return combined_loss(net->forward(lr_network_input(b.lr_inputs, net->config())), b.lr_label, cfg.weights, *fx)
        .total_value;
  });
}

double sr_loss_on_labels(nn::SRNet& net, const std::vector<Sample>& samples, const TrainingConfig& cfg) {
  torch::NoGradGuard guard;
  net->eval();
  const auto fx = make_extractor(cfg.extractor);
  return batched_mean(samples.size(), 4, [&](const std::vector<std::size_t>& idx) {
    const Batch b = load_batch(samples, idx);
    return combined_loss(net->forward(b.env_tx, b.lr_label), b.hr_label, cfg.weights, *fx).total_value;
  });
}

double end_to_end_loss(nn::LRNet& lr_net, nn::SRNet& sr_net, const std::vector<Sample>& samples,
                       const TrainingConfig& cfg) {
  const auto preds = predict_lr(lr_net, samples);
  torch::NoGradGuard guard;
  sr_net->eval();
  const auto fx = make_extractor(cfg.extractor);
  return batched_mean(samples.size(), 4, [&](const std::vector<std::size_t>& idx) {
    const Batch b = load_batch(samples, idx);
    return combined_loss(sr_net->forward(b.env_tx, stack_lr_predictions(preds, idx)), b.hr_label, cfg.weights, *fx)
        .total_value;
  });
}

PhaseResult train_phase1(nn::LRNet& net, const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const TrainingConfig& cfg, const PhaseOutput& out) {
  cfg.validate();
  auto step = [&](const std::vector<std::size_t>& idx) {
    const Batch b = load_batch(train, idx);
    return StepOutput{net->forward(lr_network_input(b.lr_inputs, net->config())), b.lr_label};
  };
  auto validate = [&]() -> std::optional<double> {
    if (val.empty()) return std::nullopt;
    return lr_loss(net, val, cfg);
  };
  return run_loop(1, *net, net->parameters(), train.size(), cfg.phase1, cfg, step, validate, out);
}

PhaseResult train_phase2(nn::SRNet& net, const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const TrainingConfig& cfg, const PhaseOutput& out) {
  cfg.validate();
  require_hr(train, "phase 2");
  require_hr(val, "phase 2");
  auto step = [&](const std::vector<std::size_t>& idx) {
    const Batch b = load_batch(train, idx);
    return StepOutput{net->forward(b.env_tx, b.lr_label), b.hr_label};
  };
  auto validate = [&]() -> std::optional<double> {
    if (val.empty()) return std::nullopt;
    return sr_loss_on_labels(net, val, cfg);
  };
  return run_loop(2, *net, net->parameters(), train.size(), cfg.phase2, cfg, step, validate, out);
}

PhaseResult train_phase3(nn::LRNet& lr_net, nn::SRNet& sr_net, const std::vector<Sample>& train,
                         const std::vector<Sample>& val, const TrainingConfig& cfg, const PhaseOutput& out) {
  cfg.validate();
  require_hr(train, "phase 3");
  require_hr(val, "phase 3");
  lr_net->eval();
  for (auto& p : lr_net->parameters()) p.set_requires_grad(false);
  const std::uint64_t before = nn::parameter_hash(*lr_net);

  const auto train_preds = predict_lr(lr_net, train);
  const auto val_preds = predict_lr(lr_net, val);
  auto step = [&](const std::vector<std::size_t>& idx) {
    const Batch b = load_batch(train, idx);
    return StepOutput{sr_net->forward(b.env_tx, stack_lr_predictions(train_preds, idx)), b.hr_label};
  };
  const auto fx = make_extractor(cfg.extractor);
  auto validate = [&]() -> std::optional<double> {
    if (val.empty()) return std::nullopt;
    torch::NoGradGuard guard;
    sr_net->eval();
    return batched_mean(val.size(), 4, [&](const std::vector<std::size_t>& idx) {
      const Batch b = load_batch(val, idx);
      return combined_loss(sr_net->forward(b.env_tx, stack_lr_predictions(val_preds, idx)), b.hr_label, cfg.weights,
                           *fx)
          .total_value;
    });
  };
  PhaseResult r = run_loop(3, *sr_net, sr_net->parameters(), train.size(), cfg.phase3, cfg, step, validate, out);
  r.lr_hash_before = before;
  r.lr_hash_after = nn::parameter_hash(*lr_net);
  if (r.lr_hash_after != before) throw PhaseOrderError("LR-Net parameters changed during phase 3");
  return r;
}

}  // namespace rm3d
