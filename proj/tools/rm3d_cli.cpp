#include <torch/torch.h>

#include <chrono>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rm3d/container.hpp"
#include "rm3d/errors.hpp"
#include "rm3d/experiments.hpp"
#include "rm3d/grid_ops.hpp"
#include "rm3d/nn/convert.hpp"
#include "rm3d/strings.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rm3d;

namespace {

void log_event(const std::string& event, json fields = json::object()) {
  fields["event"] = event;
  fields["time"] = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
  std::cerr << fields.dump() << std::endl;
}

// "a.b.c=value": value is parsed as JSON when possible, else kept as a string.
void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ParameterError(cat("override '", assignment, "' is not key=value"));
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw FormatError(cat("cannot open config ", path));
    j = json::parse(in);
  }
  for (const auto& o : overrides) apply_override(j, o);
  return pipeline_config_from_json(j);
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_text_atomic(p, text);
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stoi(item));
  return out;
}

RunSpec make_spec(const std::string& stage_one, int hr_envs, bool full_sr) {
  return run_spec_from_json({{"stage_one", stage_one}, {"hr_envs", hr_envs}, {"full_sr", full_sr}});
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Two-stage 3D radio map estimation: data, training and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Pipeline config (JSON)");
  app.add_option("--set", overrides, "Override a config value, e.g. training.phase1.epochs=5");

  std::string out_dir = "out", data_dir = "data", run_dir = "runs/proposed";

  auto* generate = app.add_subcommand("generate", "Generate scenes, transmitters and raw maps without a manifest");
  int gen_count = 1;
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_option("--count", gen_count, "Number of scenes")->check(CLI::PositiveNumber);

  auto* build = app.add_subcommand("build-dataset", "Build the hybrid dataset and its manifest");
  build->add_option("--data", data_dir, "Dataset root")->required();

  auto* train = app.add_subcommand("train", "Run one training phase");
  int phase = 1, hr_envs = -1;
  std::string stage_one = "lr_net";
  bool full_sr = false;
  train->add_option("--phase", phase, "Phase (1, 2 or 3)")->required()->check(CLI::Range(1, 3));
  train->add_option("--data", data_dir, "Dataset root")->required();
  train->add_option("--run", run_dir, "Run directory")->required();
  train->add_option("--stage-one", stage_one, "lr_net or radio_unet3d");
  train->add_option("--hr-envs", hr_envs, "Use only the first M HR environments");
  train->add_flag("--full-sr", full_sr, "HR labels for every pool environment");

  auto* evaluate = app.add_subcommand("evaluate", "Score the four methods on the test split");
  std::string baseline_run = "runs/radio_unet3d";
  evaluate->add_option("--data", data_dir, "Dataset root")->required();
  evaluate->add_option("--run", run_dir, "Proposed run directory")->required();
  evaluate->add_option("--baseline-run", baseline_run, "RadioUNet3D run directory")->required();
  evaluate->add_option("--out", out_dir, "Output directory");

  auto* sweep_m_cmd = app.add_subcommand("sweep-m", "NMSE against the number of HR environments");
  std::string ms_csv = "1,2,4,8", work_dir = "runs/sweep_m";
  bool no_full = false;
  sweep_m_cmd->add_option("--data", data_dir, "Dataset root")->required();
  sweep_m_cmd->add_option("--run", run_dir, "Completed base run (all HR environments)")->required();
  sweep_m_cmd->add_option("--work", work_dir, "Directory for the per-M runs");
  sweep_m_cmd->add_option("--m", ms_csv, "Comma-separated M values");
  sweep_m_cmd->add_flag("--no-full-sr", no_full, "Skip the FullSR upper bound");
  sweep_m_cmd->add_option("--out", out_dir, "Output directory");

  auto* sweep_d_cmd = app.add_subcommand("sweep-delta", "NMSE against the LR resolution");
  std::string deltas_csv = "2,4,8", delta_work = "runs/sweep_delta";
  sweep_d_cmd->add_option("--delta", deltas_csv, "Comma-separated LR resolutions");
  sweep_d_cmd->add_option("--work", delta_work, "Directory for datasets and runs");
  sweep_d_cmd->add_option("--out", out_dir, "Output directory");

  auto* complexity = app.add_subcommand("complexity", "Parameter, MAC and activation-memory report");
  complexity->add_option("--out", out_dir, "Output directory");

  auto* render = app.add_subcommand("render-slices", "Write horizontal slices as PPM images");
  std::string map_path, other_path, altitudes_csv = "4,16,28", prefix = "out/slice";
  int sample_index = -1;
  render->add_option("--map", map_path, "Raw (dB) radio map container");
  render->add_option("--other", other_path, "Second map shown on the right");
  render->add_option("--data", data_dir, "Dataset root (with --run and --sample)");
  render->add_option("--run", run_dir, "Run whose prediction is drawn next to the truth");
  render->add_option("--sample", sample_index, "Test sample index");
  render->add_option("--altitudes", altitudes_csv, "Comma-separated altitude indices");
  render->add_option("--prefix", prefix, "Output file prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig cfg = load_config(config_path, overrides);

    if (*generate) {
      const auto& dc = cfg.dataset;
      fs::create_directories(fs::path(out_dir));
      for (int e = 0; e < gen_count; ++e) {
        const Scene scene = generate_scene(dc.scene, dc.seed * 1000003ull + static_cast<std::uint64_t>(e));
        std::mt19937_64 rng(dc.seed * 7919ull + static_cast<std::uint64_t>(e));
        const Vec3 tx = sample_transmitter(scene, dc.transmitter, rng);
        const std::string name = env_name(e);
        const fs::path base = fs::path(out_dir) / name;
        write_text(base.string() + "_scene.json", scene_to_json(scene, dc.oracle).dump(2) + "\n");
        write_environment(base.string() + "_env.df3d", voxelize(scene, scene.grid(dc.resolution)));
        write_transmitter(base.string() + "_tx.df3d", TransmitterTensor(scene.grid(dc.resolution), tx));
        write_radio_map(base.string() + "_hr.df3d", raw_map(scene, dc, tx, dc.resolution));
        write_radio_map(base.string() + "_lr.df3d", raw_map(scene, dc, tx, dc.lr_resolution));
        log_event("generated", {{"scene", name}, {"boxes", scene.boxes.size()}, {"tx", tx}});
      }
    } else if (*build) {
      const auto m = build_hybrid_dataset(cfg.dataset, data_dir);
      log_event("dataset_built", {{"root", data_dir},
                                  {"records", m.records.size()},
                                  {"train_envs", m.count(Split::kTrain)},
                                  {"val_envs", m.count(Split::kVal)},
                                  {"test_envs", m.count(Split::kTest)}});
    } else if (*train) {
      const PipelineData data = load_pipeline_data(data_dir);
      TrainingRun run(run_dir, cfg, make_spec(stage_one, hr_envs, full_sr));
      log_event("phase_start", {{"phase", phase}, {"run", run_dir}});
      const auto r = run.run_phase(phase, data);
      json summary = to_json(r);
      summary.erase("epochs");
      log_event("phase_done", summary);
    } else if (*evaluate) {
      const PipelineData data = load_pipeline_data(data_dir);
      const TrainingRun proposed(run_dir, cfg, {});
      const TrainingRun unet(baseline_run, cfg, make_spec("radio_unet3d", -1, false));
      const auto rows = evaluate_suite(proposed, unet, data);
      json j = json::array();
      for (const auto& r : rows) j.push_back(to_json(r));
      write_text(fs::path(out_dir) / "evaluation.json", j.dump(2) + "\n");
      const std::string table = format_table(rows);
      write_text(fs::path(out_dir) / "evaluation.txt", table);
      std::cout << table;
    } else if (*sweep_m_cmd) {
      const PipelineData data = load_pipeline_data(data_dir);
      const TrainingRun base(run_dir, cfg, {});
      const auto r = sweep_m(base, data, parse_ints(ms_csv), work_dir, !no_full);
      write_text(fs::path(out_dir) / "sweep_m.json", to_json(r).dump(2) + "\n");
      write_text(fs::path(out_dir) / "sweep_m.svg", sweep_svg(r, "NMSE vs number of HR environments"));
      std::cout << to_json(r).dump(2) << "\n";
    } else if (*sweep_d_cmd) {
      std::vector<DeltaSetting> settings;
      for (int d : parse_ints(deltas_csv)) {
        settings.push_back({static_cast<double>(d), fs::path(delta_work) / cat("data_dl", d),
                            fs::path(delta_work) / cat("run_dl", d)});
      }
      const auto r = sweep_delta(cfg, settings);
      write_text(fs::path(out_dir) / "sweep_delta.json", to_json(r).dump(2) + "\n");
      write_text(fs::path(out_dir) / "sweep_delta.svg", sweep_svg(r, "NMSE vs LR resolution"));
      std::cout << to_json(r).dump(2) << "\n";
    } else if (*complexity) {
      const auto rows = complexity_report(cfg);
      write_text(fs::path(out_dir) / "complexity.json", to_json(rows).dump(2) + "\n");
      const std::string table = format_complexity(rows);
      write_text(fs::path(out_dir) / "complexity.txt", table);
      std::cout << table;
    } else if (*render) {
      const auto altitudes = parse_ints(altitudes_csv);
      std::vector<fs::path> files;
      if (!map_path.empty()) {
        const auto a = normalize_rm(read_radio_map(map_path, false), cfg.dataset.window);
        if (other_path.empty()) {
          files = render_slices(a, nullptr, altitudes, prefix);
        } else {
          const auto b = normalize_rm(read_radio_map(other_path, false), cfg.dataset.window);
          files = render_slices(a, &b, altitudes, prefix);
        }
      } else {
        if (sample_index < 0) throw ParameterError("render-slices needs --map or --data/--run/--sample");
        const auto m = read_manifest(data_dir);
        const auto test = load_samples(m, data_dir, Split::kTest, Resolution::kHigh);
        if (sample_index >= static_cast<int>(test.size())) throw std::out_of_range("sample index out of range");
        const TrainingRun run(run_dir, cfg, {});
        auto lr = run.load_stage_one();
        auto sr = run.load_stage_two();
        const std::vector<Sample> one{test[sample_index]};
        const auto pred_lr = predict_lr(lr, one);
        torch::NoGradGuard guard;
        const auto pred = nn::to_radio_map(sr->forward(one[0].env_tx.unsqueeze(0), pred_lr[0].unsqueeze(0))[0], one[0].fine);
        const auto truth = nn::to_radio_map(one[0].hr_label, one[0].fine);
        files = render_slices(pred, &truth, altitudes, prefix);
      }
      for (const auto& f : files) log_event("wrote", {{"file", f.string()}});
    }
  } catch (const std::exception& e) {
    log_event("error", {{"message", e.what()}});
    return 1;
  }
  return 0;
}
