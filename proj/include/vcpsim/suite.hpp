// The in-repo scenario families. Each family is a constructed, seeded
// generator whose layout guarantees the behaviour its experiments measure
// (an occluded object recoverable through fusion, long-range sparsity,
// weak detections for false-positive stress, moving objects, urban
// density). Generators verify their guarantees and re-jitter on failure.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vcpsim/config.hpp"
#include "vcpsim/scene.hpp"

namespace vcpsim {

enum class Family {
  kOcclusion,
  kLongRange,
  kFalsePositive,
  kMotion,
  kDenseUrban,
};

std::string family_name(Family f);
std::optional<Family> family_from_name(const std::string& name);

struct SuiteScene {
  Family family = Family::kOcclusion;
  int index = 0;
  std::uint64_t seed = 0;
  Scene scene;
  AgentId ego = 0;
  // Occlusion family bookkeeping: the object hidden from the ego and the
  // object placed outside the ego grid (reachable only through late fusion).
  ObjectId hidden_object = -1;
  ObjectId out_of_range_object = -1;
};

// Documented derivation: hash_mix(hash_mix(base_seed, family ordinal), index).
std::uint64_t suite_scene_seed(std::uint64_t base_seed, Family f, int index);

SuiteScene make_suite_scene(Family f, int index, const ExperimentConfig& cfg);

std::vector<SuiteScene> build_suite(const ExperimentConfig& cfg);

// Motion-family scenes for the staleness grid (latency_scene_count of them).
std::vector<SuiteScene> build_motion_suite(const ExperimentConfig& cfg);

// Per-family round configuration: the false-positive family runs with
// spurious detection injection, everything else without.
RoundConfig round_config_for(const ExperimentConfig& cfg, Family f);

}  // namespace vcpsim
