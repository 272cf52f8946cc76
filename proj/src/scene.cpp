#include "vcpsim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "vcpsim/rng.hpp"

namespace vcpsim {

namespace {

constexpr double kPi = std::numbers::pi;

BevBox inflate(const BevBox& b, double margin) {
  BevBox out = b;
  out.length += margin;
  out.width += margin;
  return out;
}

double dist2(Vec2 a, Vec2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Distance along a unit-direction ray from the origin to the boundary of an
// axis-aligned rectangle containing the origin.
double ray_exit_distance(double dx, double dy, const SamplerConfig& cfg) {
  double t = std::numeric_limits<double>::infinity();
  if (dx > 1e-12) t = std::min(t, cfg.x_max / dx);
  if (dx < -1e-12) t = std::min(t, cfg.x_min / dx);
  if (dy > 1e-12) t = std::min(t, cfg.y_max / dy);
  if (dy < -1e-12) t = std::min(t, cfg.y_min / dy);
  return t;
}

// Intersection of ray origin+t*(dx,dy), t>0 with segment ab; returns the ray
// parameter t or infinity.
double ray_segment(double dx, double dy, Vec2 a, Vec2 b) {
  const double ex = b.x - a.x, ey = b.y - a.y;
  const double denom = dx * ey - dy * ex;
  if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const double t = (a.x * ey - a.y * ex) / denom;
  const double u = (a.x * dy - a.y * dx) / denom;
  if (t <= 1e-9 || u < 0.0 || u > 1.0)
    return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace

const SceneAgent* Scene::find_agent(AgentId id) const {
  for (const SceneAgent& a : agents) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

std::vector<SceneObject> Scene::objects_at(double t) const {
  std::vector<SceneObject> out = objects;
  if (t == 0.0) return out;
  for (SceneObject& o : out) {
    o.shape.cx += o.velocity.x * t;
    o.shape.cy += o.velocity.y * t;
  }
  return out;
}

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  if (config.num_agents < 1 || config.num_agents > 5) {
    throw std::invalid_argument("generate_scene: num_agents must be in [1,5]");
  }
  if (config.num_objects < 0) {
    throw std::invalid_argument("generate_scene: num_objects must be >= 0");
  }

  Scene scene;
  scene.seed = seed;
  Rng rng = Rng(seed).fork(0x5ce4e);

  const double agent_span = 0.6 * config.half_extent;
  for (int i = 0; i < config.num_agents; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
      const Pose2 pose{rng.uniform(-agent_span, agent_span),
                       rng.uniform(-agent_span, agent_span),
                       rng.uniform(-kPi, kPi)};
      bool ok = true;
      for (const SceneAgent& other : scene.agents) {
        if (dist2({pose.x, pose.y}, {other.pose.x, other.pose.y}) <
            config.min_agent_separation * config.min_agent_separation) {
          ok = false;
          break;
        }
      }
      if (ok) {
        scene.agents.push_back({static_cast<AgentId>(i), pose});
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw std::runtime_error(
          "generate_scene: could not place agents with the required "
          "separation; config too dense");
    }
  }

  const double obj_span = config.half_extent - 3.0;
  for (int i = 0; i < config.num_objects; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
      const bool occluder = rng.next_unit() < config.occluder_fraction;
      BevBox shape;
      shape.cx = rng.uniform(-obj_span, obj_span);
      shape.cy = rng.uniform(-obj_span, obj_span);
      if (occluder) {
        shape.length = rng.uniform(7.0, 10.0);
        shape.width = rng.uniform(2.4, 2.8);
      } else {
        shape.length = rng.uniform(3.8, 5.0);
        shape.width = rng.uniform(1.7, 2.1);
      }
      shape.yaw = rng.uniform(-kPi, kPi);
      shape.confidence = 1.0;

      bool ok = true;
      for (const SceneAgent& agent : scene.agents) {
        if (dist2({shape.cx, shape.cy}, {agent.pose.x, agent.pose.y}) <
            (config.agent_clearance + 0.5 * shape.length) *
                (config.agent_clearance + 0.5 * shape.length)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        const BevBox grown = inflate(shape, config.object_clearance);
        for (const SceneObject& other : scene.objects) {
          if (rotated_iou(grown, inflate(other.shape, config.object_clearance)) >
              0.0) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) continue;

      SceneObject obj;
      obj.id = 100 + i;
      obj.shape = shape;
      if (config.motion_speed > 0.0) {
        const double heading = rng.uniform(-kPi, kPi);
        obj.velocity = {config.motion_speed * std::cos(heading),
                        config.motion_speed * std::sin(heading)};
      }
      scene.objects.push_back(obj);
      placed = true;
      break;
    }
    if (!placed) {
      throw std::runtime_error(
          "generate_scene: could not place objects without overlap; config "
          "too dense");
    }
  }
  return scene;
}

PointCloud sample_lidar(const Scene& scene, AgentId agent, double t,
                        const SamplerConfig& cfg) {
  const SceneAgent* who = scene.find_agent(agent);
  if (who == nullptr) {
    throw std::invalid_argument("sample_lidar: unknown agent id");
  }
  const double d_max =
      cfg.d_max > 0.0
          ? cfg.d_max
          : 0.5 * std::hypot(cfg.x_max - cfg.x_min, cfg.y_max - cfg.y_min);

  // Object edges in the agent frame at time t.
  const Pose2 to_agent = inverse(who->pose);
  struct Edge {
    Vec2 a, b;
    ObjectId id;
  };
  std::vector<Edge> edges;
  for (const SceneObject& obj : scene.objects_at(t)) {
    const BevBox local = transform_box(to_agent, obj.shape);
    const auto corners = box_corners(local);
    for (int k = 0; k < 4; ++k) {
      edges.push_back({corners[k], corners[(k + 1) % 4], obj.id});
    }
  }

  const std::uint64_t stream =
      hash_mix(hash_mix(scene.seed, 0x11da5), static_cast<std::uint64_t>(agent));

  PointCloud pc;
  pc.agent = agent;
  for (int ray = 0; ray < cfg.rays; ++ray) {
    const double phi = 2.0 * kPi * ray / cfg.rays;
    const double dx = std::cos(phi), dy = std::sin(phi);
    const double d_exit = ray_exit_distance(dx, dy, cfg);

    double d_hit = std::numeric_limits<double>::infinity();
    ObjectId hit_id = kBackground;
    for (const Edge& e : edges) {
      const double d = ray_segment(dx, dy, e.a, e.b);
      if (d < d_hit) {
        d_hit = d;
        hit_id = e.id;
      }
    }

    const std::uint64_t ray_stream =
        hash_mix(stream, static_cast<std::uint64_t>(ray));
    const double free_len = std::min(d_hit, d_exit);

    // Background returns along the free segment; no returns within one
    // ground_step of the sensor.
    for (int s = 1;; ++s) {
      const double jitter =
          u64_to_unit(splitmix64(hash_mix(ray_stream, 0x6000 + s)));
      const double d = (s + jitter) * cfg.ground_step;
      if (d >= free_len) break;
      const double drop = std::min(1.0, d / d_max);
      if (u64_to_unit(splitmix64(hash_mix(ray_stream, 0x9000 + s))) < drop)
        continue;
      pc.points.push_back({d * dx, d * dy, kBackground});
    }

    if (hit_id != kBackground && d_hit < d_exit) {
      const double drop = std::min(1.0, d_hit / d_max);
      if (u64_to_unit(splitmix64(hash_mix(ray_stream, 0x1))) >= drop) {
        pc.points.push_back({d_hit * dx, d_hit * dy, hit_id});
      }
    }
  }
  return pc;
}

std::string scene_to_json(const Scene& scene) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["seed"] = scene.seed;
  j["timestamp"] = scene.timestamp;
  j["agents"] = nlohmann::ordered_json::array();
  for (const SceneAgent& a : scene.agents) {
    j["agents"].push_back({{"id", a.id},
                           {"x", a.pose.x},
                           {"y", a.pose.y},
                           {"yaw", a.pose.yaw}});
  }
  j["objects"] = nlohmann::ordered_json::array();
  for (const SceneObject& o : scene.objects) {
    j["objects"].push_back({{"id", o.id},
                            {"cx", o.shape.cx},
                            {"cy", o.shape.cy},
                            {"length", o.shape.length},
                            {"width", o.shape.width},
                            {"yaw", o.shape.yaw},
                            {"vx", o.velocity.x},
                            {"vy", o.velocity.y}});
  }
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scene_from_json: parse error: ") +
                             e.what());
  }
  if (!j.contains("schema") || j["schema"].get<int>() != 1) {
    throw std::runtime_error("scene_from_json: unsupported schema version");
  }
  Scene scene;
  scene.seed = j.at("seed").get<std::uint64_t>();
  scene.timestamp = j.at("timestamp").get<double>();
  for (const auto& a : j.at("agents")) {
    SceneAgent agent;
    agent.id = a.at("id").get<AgentId>();
    agent.pose = {a.at("x").get<double>(), a.at("y").get<double>(),
                  a.at("yaw").get<double>()};
    for (const SceneAgent& other : scene.agents) {
      if (other.id == agent.id)
        throw std::runtime_error("scene_from_json: duplicate agent id");
    }
    scene.agents.push_back(agent);
  }
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.id = o.at("id").get<ObjectId>();
    obj.shape.cx = o.at("cx").get<double>();
    obj.shape.cy = o.at("cy").get<double>();
    obj.shape.length = o.at("length").get<double>();
    obj.shape.width = o.at("width").get<double>();
    obj.shape.yaw = o.at("yaw").get<double>();
    obj.shape.confidence = 1.0;
    obj.velocity = {o.at("vx").get<double>(), o.at("vy").get<double>()};
    for (const SceneObject& other : scene.objects) {
      if (other.id == obj.id)
        throw std::runtime_error("scene_from_json: duplicate object id");
    }
    scene.objects.push_back(obj);
  }
  return scene;
}

}  // namespace vcpsim
