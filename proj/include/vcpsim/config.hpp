// Experiment configuration: a single JSON document covering the scene
// suite, grid, selection thresholds, compression, detector, late fusion,
// latency model, and budget. Loading is strict: unknown or out-of-range
// keys fail with an error naming the offending key.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcpsim/protocol.hpp"

namespace vcpsim {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct SuiteConfig {
  std::vector<std::string> families = {"occlusion", "long_range",
                                       "false_positive", "motion",
                                       "dense_urban"};
  int scenes_per_family = 10;
  std::uint64_t base_seed = 424242;
  double motion_speed = 10.0;  // m/s, motion family
  int latency_scene_count = 50;  // motion scenes for the staleness grid
};

struct ExperimentConfig {
  SuiteConfig suite;
  RoundConfig round;
  std::vector<double> eps_c_grid = {0.01, 0.02, 0.03, 0.05, 0.07};
  std::vector<double> latency_grid_ms = {0.0, 50.0, 100.0, 200.0};
  LatencyProfile latency;
  double budget_mbps = 6.75;  // 27 Mbps shared by up to 4 collaborators
  double rate_hz = 10.0;
  int fp_injection_count = 20;
  double fp_injection_conf = 0.2;
  std::string output_dir = "out";
  int workers = 1;

  void validate() const;
};

ExperimentConfig default_config();

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& cfg, const std::string& path);

}  // namespace vcpsim
