#include "vcpsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace vcpsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& obj, const std::string& scope,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" +
                        (scope.empty() ? key : scope + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const std::string& scope, const std::string& key,
          T* out) {
  if (!obj.contains(key)) return;
  try {
    *out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for key '" +
                      (scope.empty() ? key : scope + "." + key) + "'");
  }
}

void require_range(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config: key '" + key + "' " + what);
}

}  // namespace

void ExperimentConfig::validate() const {
  round.validate();
  latency.validate();
  require_range(suite.scenes_per_family > 0, "suite.scenes_per_family",
                "must be > 0");
  require_range(suite.latency_scene_count > 0, "suite.latency_scene_count",
                "must be > 0");
  require_range(!suite.families.empty(), "suite.families",
                "must not be empty");
  require_range(suite.motion_speed >= 0.0, "suite.motion_speed",
                "must be >= 0");
  require_range(!eps_c_grid.empty(), "selection.eps_c_grid",
                "must not be empty");
  for (double e : eps_c_grid) {
    require_range(e >= 0.0 && e <= 1.0, "selection.eps_c_grid",
                  "entries must be in [0,1]");
  }
  for (std::size_t i = 1; i < eps_c_grid.size(); ++i) {
    require_range(eps_c_grid[i] > eps_c_grid[i - 1], "selection.eps_c_grid",
                  "must be strictly increasing");
  }
  for (double l : latency_grid_ms) {
    require_range(l >= 0.0, "latency.grid_ms", "entries must be >= 0");
  }
  require_range(budget_mbps >= 0.0, "budget_mbps", "must be >= 0");
  require_range(rate_hz > 0.0, "rate_hz", "must be > 0");
  require_range(fp_injection_count >= 0, "false_positive_injection.count",
                "must be >= 0");
  require_range(fp_injection_conf >= 0.0 && fp_injection_conf <= 1.0,
                "false_positive_injection.confidence", "must be in [0,1]");
  require_range(workers >= 1, "workers", "must be >= 1");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["suite"] = {{"families", cfg.suite.families},
                {"scenes_per_family", cfg.suite.scenes_per_family},
                {"base_seed", cfg.suite.base_seed},
                {"motion_speed", cfg.suite.motion_speed},
                {"latency_scene_count", cfg.suite.latency_scene_count}};
  j["grid"] = {{"x_min", cfg.round.grid.x_min}, {"x_max", cfg.round.grid.x_max},
               {"y_min", cfg.round.grid.y_min}, {"y_max", cfg.round.grid.y_max},
               {"cell", cfg.round.grid.cell},
               {"strides", cfg.round.grid.strides}};
  j["sampler"] = {{"rays", cfg.round.rays},
                  {"ground_step", cfg.round.ground_step},
                  {"d_max", cfg.round.d_max}};
  j["selection"] = {{"eps_a", cfg.round.eps_a},
                    {"eps_c", cfg.round.eps_c},
                    {"use_supply", cfg.round.use_supply},
                    {"use_demand", cfg.round.use_demand},
                    {"eps_c_grid", cfg.eps_c_grid}};
  j["compression"] = {
      {"c0", cfg.round.c0},
      {"channels", cfg.round.nominal_channels},
      {"fp16", cfg.round.precision == ValuePrecision::kHalf}};
  j["detector"] = {{"theta_det", cfg.round.detector.theta_det},
                   {"min_cells", cfg.round.detector.min_cells},
                   {"score_scale", cfg.round.detector.score_scale}};
  j["late_fusion"] = {{"enabled", cfg.round.late_enabled},
                      {"naive", cfg.round.naive_late},
                      {"eps_l", cfg.round.late.eps_l},
                      {"beta", cfg.round.late.beta},
                      {"nms_iou", cfg.round.late.nms_iou}};
  j["latency"] = {{"backbone_ms", cfg.latency.backbone_ms},
                  {"demand_gen_ms", cfg.latency.demand_gen_ms},
                  {"supply_gen_ms", cfg.latency.supply_gen_ms},
                  {"comm_ms", cfg.latency.comm_ms},
                  {"downstream_ms", cfg.latency.downstream_ms},
                  {"grid_ms", cfg.latency_grid_ms}};
  j["false_positive_injection"] = {{"count", cfg.fp_injection_count},
                                   {"confidence", cfg.fp_injection_conf}};
  j["max_collaborators"] = cfg.round.max_collaborators;
  j["budget_mbps"] = cfg.budget_mbps;
  j["rate_hz"] = cfg.rate_hz;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  check_keys(j, "",
             {"suite", "grid", "sampler", "selection", "compression",
              "detector", "late_fusion", "latency",
              "false_positive_injection", "max_collaborators", "budget_mbps",
              "rate_hz", "output_dir", "workers"});

  ExperimentConfig cfg;
  if (j.contains("suite")) {
    const json& s = j["suite"];
    check_keys(s, "suite",
               {"families", "scenes_per_family", "base_seed", "motion_speed",
                "latency_scene_count"});
    read(s, "suite", "families", &cfg.suite.families);
    read(s, "suite", "scenes_per_family", &cfg.suite.scenes_per_family);
    read(s, "suite", "base_seed", &cfg.suite.base_seed);
    read(s, "suite", "motion_speed", &cfg.suite.motion_speed);
    read(s, "suite", "latency_scene_count", &cfg.suite.latency_scene_count);
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "grid", {"x_min", "x_max", "y_min", "y_max", "cell",
                           "strides"});
    read(g, "grid", "x_min", &cfg.round.grid.x_min);
    read(g, "grid", "x_max", &cfg.round.grid.x_max);
    read(g, "grid", "y_min", &cfg.round.grid.y_min);
    read(g, "grid", "y_max", &cfg.round.grid.y_max);
    read(g, "grid", "cell", &cfg.round.grid.cell);
    read(g, "grid", "strides", &cfg.round.grid.strides);
  }
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    check_keys(s, "sampler", {"rays", "ground_step", "d_max"});
    read(s, "sampler", "rays", &cfg.round.rays);
    read(s, "sampler", "ground_step", &cfg.round.ground_step);
    read(s, "sampler", "d_max", &cfg.round.d_max);
  }
  if (j.contains("selection")) {
    const json& s = j["selection"];
    check_keys(s, "selection",
               {"eps_a", "eps_c", "use_supply", "use_demand", "eps_c_grid"});
    read(s, "selection", "eps_a", &cfg.round.eps_a);
    read(s, "selection", "eps_c", &cfg.round.eps_c);
    read(s, "selection", "use_supply", &cfg.round.use_supply);
    read(s, "selection", "use_demand", &cfg.round.use_demand);
    read(s, "selection", "eps_c_grid", &cfg.eps_c_grid);
  }
  if (j.contains("compression")) {
    const json& c = j["compression"];
    check_keys(c, "compression", {"c0", "channels", "fp16"});
    read(c, "compression", "c0", &cfg.round.c0);
    read(c, "compression", "channels", &cfg.round.nominal_channels);
    bool fp16 = cfg.round.precision == ValuePrecision::kHalf;
    read(c, "compression", "fp16", &fp16);
    cfg.round.precision =
        fp16 ? ValuePrecision::kHalf : ValuePrecision::kFloat32;
  }
  if (j.contains("detector")) {
    const json& d = j["detector"];
    check_keys(d, "detector", {"theta_det", "min_cells", "score_scale"});
    read(d, "detector", "theta_det", &cfg.round.detector.theta_det);
    read(d, "detector", "min_cells", &cfg.round.detector.min_cells);
    read(d, "detector", "score_scale", &cfg.round.detector.score_scale);
  }
  if (j.contains("late_fusion")) {
    const json& l = j["late_fusion"];
    check_keys(l, "late_fusion", {"enabled", "naive", "eps_l", "beta",
                                  "nms_iou"});
    read(l, "late_fusion", "enabled", &cfg.round.late_enabled);
    read(l, "late_fusion", "naive", &cfg.round.naive_late);
    read(l, "late_fusion", "eps_l", &cfg.round.late.eps_l);
    read(l, "late_fusion", "beta", &cfg.round.late.beta);
    read(l, "late_fusion", "nms_iou", &cfg.round.late.nms_iou);
  }
  if (j.contains("latency")) {
    const json& l = j["latency"];
    check_keys(l, "latency",
               {"backbone_ms", "demand_gen_ms", "supply_gen_ms", "comm_ms",
                "downstream_ms", "grid_ms"});
    read(l, "latency", "backbone_ms", &cfg.latency.backbone_ms);
    read(l, "latency", "demand_gen_ms", &cfg.latency.demand_gen_ms);
    read(l, "latency", "supply_gen_ms", &cfg.latency.supply_gen_ms);
    read(l, "latency", "comm_ms", &cfg.latency.comm_ms);
    read(l, "latency", "downstream_ms", &cfg.latency.downstream_ms);
    read(l, "latency", "grid_ms", &cfg.latency_grid_ms);
  }
  if (j.contains("false_positive_injection")) {
    const json& f = j["false_positive_injection"];
    check_keys(f, "false_positive_injection", {"count", "confidence"});
    read(f, "false_positive_injection", "count", &cfg.fp_injection_count);
    read(f, "false_positive_injection", "confidence",
         &cfg.fp_injection_conf);
  }
  read(j, "", "max_collaborators", &cfg.round.max_collaborators);
  read(j, "", "budget_mbps", &cfg.budget_mbps);
  read(j, "", "rate_hz", &cfg.rate_hz);
  read(j, "", "output_dir", &cfg.output_dir);
  read(j, "", "workers", &cfg.workers);

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write file " + path);
  out << config_to_json(cfg);
}

}  // namespace vcpsim
