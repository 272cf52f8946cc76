// vcpsim command line: scene-suite generation, single rounds with optional
// wire recording, the eps_c sweep, the module ablation ladder, the
// staleness grid, the bandwidth budget gate, and wire-log inspection.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "vcpsim/config.hpp"
#include "vcpsim/experiments.hpp"
#include "vcpsim/protocol.hpp"
#include "vcpsim/suite.hpp"

namespace fs = std::filesystem;
using namespace vcpsim;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "experiment config (JSON)");
  cmd->add_option("--out", args->out_dir, "output directory");
  cmd->add_option("--seed", args->seed, "suite base seed")
      ->each([args](const std::string&) { args->seed_set = true; });
  cmd->add_option("--workers", args->workers, "parallel scene workers");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? default_config()
                             : load_config_file(args.config_path);
  if (args.seed_set) cfg.suite.base_seed = args.seed;
  if (args.workers > 0) cfg.workers = args.workers;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "."
                                                    : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  std::fprintf(stderr, "wrote %s\n", path.string().c_str());
}

std::string hex_dump(const std::vector<std::uint8_t>& bytes,
                     std::size_t limit = 64) {
  std::string out;
  char buf[8];
  for (std::size_t i = 0; i < bytes.size() && i < limit; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", bytes[i]);
    if (i > 0) out += (i % 16 == 0) ? "\n" : " ";
    out += buf;
  }
  if (bytes.size() > limit) out += " ...";
  return out;
}

int cmd_generate(const CommonArgs& common) {
  const ExperimentConfig cfg = resolve_config(common);
  const auto suite = build_suite(cfg);
  const fs::path dir = fs::path(cfg.output_dir) / "scenes";
  fs::create_directories(dir);

  nlohmann::ordered_json manifest;
  manifest["base_seed"] = cfg.suite.base_seed;
  manifest["scenes"] = nlohmann::ordered_json::array();
  for (const SuiteScene& ss : suite) {
    const std::string name = family_name(ss.family) + "_" +
                             std::to_string(ss.index) + ".json";
    write_text(dir / name, scene_to_json(ss.scene));
    nlohmann::ordered_json entry;
    entry["file"] = name;
    entry["family"] = family_name(ss.family);
    entry["index"] = ss.index;
    entry["seed"] = ss.seed;
    if (ss.hidden_object >= 0) entry["hidden_object"] = ss.hidden_object;
    if (ss.out_of_range_object >= 0)
      entry["out_of_range_object"] = ss.out_of_range_object;
    manifest["scenes"].push_back(entry);
  }
  write_text(fs::path(cfg.output_dir) / "suite_manifest.json",
             manifest.dump(2) + "\n");
  std::printf("generated %zu scenes under %s\n", suite.size(),
              dir.string().c_str());
  return 0;
}

int cmd_run(const CommonArgs& common, const std::string& scene_path,
            const std::string& family_opt, int index, double staleness_ms,
            const std::string& record_path) {
  const ExperimentConfig cfg = resolve_config(common);

  Scene scene;
  RoundConfig rc = cfg.round;
  if (!scene_path.empty()) {
    std::ifstream in(scene_path);
    if (!in) throw std::runtime_error("cannot open scene " + scene_path);
    std::stringstream buf;
    buf << in.rdbuf();
    scene = scene_from_json(buf.str());
  } else {
    const auto family = family_from_name(family_opt);
    if (!family) {
      throw std::runtime_error("unknown family '" + family_opt +
                               "' (use --scene or a valid --family)");
    }
    const SuiteScene ss = make_suite_scene(*family, index, cfg);
    scene = ss.scene;
    rc = round_config_for(cfg, *family);
  }

  Bus bus;
  bus.set_recording(!record_path.empty());
  const RoundTrace trace =
      staleness_ms > 0.0
          ? run_with_staleness(scene, 0, rc, staleness_ms, &bus)
          : run_round(scene, 0, rc, &bus);
  if (!record_path.empty()) {
    bus.write_log(record_path);
    std::fprintf(stderr, "recorded %zu payloads to %s\n",
                 bus.records().size(), record_path.c_str());
  }
  std::cout << round_trace_to_json(trace);
  return 0;
}

int cmd_sweep(const CommonArgs& common) {
  const ExperimentConfig cfg = resolve_config(common);
  const auto suite = build_suite(cfg);
  const auto records = sweep_epsilon_c(cfg, suite);
  write_text(fs::path(cfg.output_dir) / "sweep_eps_c.csv",
             sweep_records_to_csv(records));
  return 0;
}

int cmd_ablate(const CommonArgs& common) {
  const ExperimentConfig cfg = resolve_config(common);
  const auto suite = build_suite(cfg);
  const auto rows = run_ablation(cfg, suite);
  write_text(fs::path(cfg.output_dir) / "ablation.csv", ablation_to_csv(rows));
  return 0;
}

int cmd_latency(const CommonArgs& common) {
  const ExperimentConfig cfg = resolve_config(common);
  const auto motion = build_motion_suite(cfg);
  const auto rows = run_latency_grid(cfg, motion);
  write_text(fs::path(cfg.output_dir) / "latency.csv",
             latency_rows_to_csv(rows));
  std::printf("pipeline latency model: total %.1f ms, demand round +%.1f ms\n",
              total_latency_ms(cfg.latency),
              demand_round_overhead_ms(cfg.latency));
  return 0;
}

int cmd_budget(const CommonArgs& common) {
  const ExperimentConfig cfg = resolve_config(common);
  const auto suite = build_suite(cfg);
  const BudgetOutcome outcome = check_budget(cfg, suite);
  std::cout << budget_report(outcome, cfg);
  return outcome.pass ? 0 : 1;
}

int cmd_inspect(const std::string& log_path) {
  const auto records = Bus::read_log(log_path);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const Bus::Record& rec : records) {
    nlohmann::ordered_json entry;
    entry["seq"] = rec.seq;
    entry["sender"] = rec.sender;
    entry["receiver"] = rec.receiver;
    entry["bytes"] = rec.bytes.size();
    switch (rec.kind) {
      case PayloadKind::kDemand: {
        entry["kind"] = "demand";
        const DemandMessage msg = decode_demand(rec.bytes);
        entry["mask_rows"] = msg.mask.rows;
        entry["mask_cols"] = msg.mask.cols;
        entry["demanded_cells"] = msg.mask.true_count();
        break;
      }
      case PayloadKind::kFeatures: {
        entry["kind"] = "features";
        const FeatureMessage msg =
            decode_feature_message(rec.bytes, Pose2{}, nullptr);
        nlohmann::ordered_json scales = nlohmann::ordered_json::array();
        for (const SparseGrid& sg : msg.scales) {
          scales.push_back({{"scale", sg.scale},
                            {"cells", sg.entries.size()}});
        }
        entry["scales"] = scales;
        break;
      }
      case PayloadKind::kDetections: {
        entry["kind"] = "detections";
        const DetectionMessage msg = decode_detections(rec.bytes, Pose2{});
        entry["boxes"] = msg.boxes.size();
        break;
      }
    }
    entry["hex"] = hex_dump(rec.bytes);
    j.push_back(entry);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic multi-agent collaborative perception simulator"};
  app.require_subcommand(1);

  CommonArgs common;

  CLI::App* generate = app.add_subcommand(
      "generate", "generate the fixture scene suite as JSON files");
  add_common(generate, &common);

  std::string scene_path, family = "occlusion", record_path;
  int scene_index = 0;
  double staleness_ms = 0.0;
  CLI::App* run = app.add_subcommand(
      "run", "run a single collaboration round and print the trace");
  add_common(run, &common);
  run->add_option("--scene", scene_path, "scene JSON file");
  run->add_option("--family", family, "suite family to build a scene from");
  run->add_option("--index", scene_index, "scene index within the family");
  run->add_option("--staleness-ms", staleness_ms,
                  "sample collaborators this many ms in the past");
  run->add_option("--record", record_path, "write all wire bytes to a log");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "eps_c sweep with late fusion on and off (CSV)");
  add_common(sweep, &common);

  CLI::App* ablate =
      app.add_subcommand("ablate", "six-step module ablation ladder (CSV)");
  add_common(ablate, &common);

  CLI::App* latency = app.add_subcommand(
      "latency", "staleness grid over the motion suite (CSV)");
  add_common(latency, &common);

  CLI::App* budget = app.add_subcommand(
      "budget", "check the per-agent bandwidth budget at the operating point");
  add_common(budget, &common);

  std::string log_path;
  CLI::App* inspect = app.add_subcommand(
      "inspect", "dump a recorded wire log as JSON with hex previews");
  inspect->add_option("--log", log_path, "wire log file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(common);
    if (run->parsed())
      return cmd_run(common, scene_path, family, scene_index, staleness_ms,
                     record_path);
    if (sweep->parsed()) return cmd_sweep(common);
    if (ablate->parsed()) return cmd_ablate(common);
    if (latency->parsed()) return cmd_latency(common);
    if (budget->parsed()) return cmd_budget(common);
    if (inspect->parsed()) return cmd_inspect(log_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: {\"message\": \"%s\"}\n", e.what());
    return 2;
  }
  return 0;
}
