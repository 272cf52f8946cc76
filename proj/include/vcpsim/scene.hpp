// Synthetic multi-agent worlds: agent poses, ground-truth objects with
// linear motion, and per-agent occluded 2D lidar-like sampling.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcpsim/geometry.hpp"

namespace vcpsim {

using ObjectId = std::int32_t;
constexpr ObjectId kBackground = -1;

struct SceneAgent {
  AgentId id = 0;
  Pose2 pose;
};

struct SceneObject {
  ObjectId id = 0;
  BevBox shape;   // confidence fixed at 1, source_agent unused
  Vec2 velocity;  // m/s, world frame
};

struct Scene {
  std::vector<SceneAgent> agents;
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
  double timestamp = 0.0;

  const SceneAgent* find_agent(AgentId id) const;

  // Object boxes displaced by velocity * t. objects_at(0) equals the
  // stored objects exactly.
  std::vector<SceneObject> objects_at(double t) const;
};

struct SceneConfig {
  int num_agents = 3;       // 1..5
  int num_objects = 12;
  double half_extent = 25.6;        // placement square, meters
  double occluder_fraction = 0.15;  // share of bus-sized objects
  double motion_speed = 0.0;        // m/s; 0 = static scene
  double min_agent_separation = 5.0;
  double agent_clearance = 3.0;   // objects keep this far from agents
  double object_clearance = 1.2;  // gap enforced between object boxes
  int max_retries = 200;
};

// Deterministic for a fixed (config, seed). Agents are at least
// min_agent_separation apart; objects have pairwise rotated IoU of zero.
// Throws std::runtime_error when placement cannot be satisfied within the
// retry budget (over-dense config).
Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

struct SamplerConfig {
  // Perception range, axis-aligned in the observing agent's frame.
  double x_min = -25.6;
  double x_max = 25.6;
  double y_min = -25.6;
  double y_max = 25.6;
  int rays = 1440;           // equally spaced over [0, 2pi)
  double ground_step = 1.0;  // radial spacing of background returns
  double d_max = 0.0;        // dropout scale; 0 = range half-diagonal
};

struct LidarPoint {
  double x = 0.0;  // agent frame
  double y = 0.0;
  ObjectId object_id = kBackground;
};

struct PointCloud {
  AgentId agent = 0;
  std::vector<LidarPoint> points;
};

// Casts `rays` rays from the agent pose. Each ray yields at most one
// foreground point on the nearest intersected object edge (hard occlusion),
// dropped with probability min(1, d / d_max), plus background returns along
// the free segment at ground_step intervals under the same dropout law.
// Deterministic given (scene.seed, agent, geometry); the dropout stream does
// not depend on t, so a moving object sampled at t matches the same object
// pre-displaced by velocity*t and sampled at 0.
PointCloud sample_lidar(const Scene& scene, AgentId agent, double t,
                        const SamplerConfig& cfg);

// JSON document (schema versioned) for fixture reuse across runs.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

}  // namespace vcpsim
