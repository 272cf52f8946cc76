#include "vcpsim/suite.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vcpsim/pillars.hpp"
#include "vcpsim/rng.hpp"
#include "vcpsim/supply_demand.hpp"

namespace vcpsim {

namespace {

constexpr double kPi = std::numbers::pi;

Vec2 polar(double bearing, double dist) {
  return {dist * std::cos(bearing), dist * std::sin(bearing)};
}

BevBox make_car(Vec2 at, double yaw, Rng& rng) {
  BevBox b;
  b.cx = at.x;
  b.cy = at.y;
  b.length = rng.uniform(4.2, 4.8);
  b.width = rng.uniform(1.8, 2.0);
  b.yaw = yaw;
  b.confidence = 1.0;
  return b;
}

BevBox inflate(const BevBox& b, double margin) {
  BevBox out = b;
  out.length += margin;
  out.width += margin;
  return out;
}

bool placement_ok(const Scene& scene, const BevBox& candidate,
                  double clearance = 1.2, double agent_clear = 3.0) {
  for (const SceneObject& o : scene.objects) {
    if (rotated_iou(inflate(candidate, clearance),
                    inflate(o.shape, clearance)) > 0.0) {
      return false;
    }
  }
  for (const SceneAgent& a : scene.agents) {
    const double d = std::hypot(candidate.cx - a.pose.x,
                                candidate.cy - a.pose.y);
    if (d < agent_clear + 0.5 * candidate.length) return false;
  }
  return true;
}

// Points carrying `id` in the cloud, together with their spread along the
// object's body axes. Used to verify that an observer sees two faces.
struct ViewStats {
  int points = 0;
  double spread_len = 0.0;
  double spread_wid = 0.0;
};

ViewStats view_of(const PointCloud& pc, const Pose2& observer,
                  const SceneObject& obj) {
  ViewStats stats;
  const double c = std::cos(obj.shape.yaw), s = std::sin(obj.shape.yaw);
  double lmin = 1e300, lmax = -1e300, wmin = 1e300, wmax = -1e300;
  for (const LidarPoint& p : pc.points) {
    if (p.object_id != obj.id) continue;
    ++stats.points;
    const Vec2 world = transform_point(observer, {p.x, p.y});
    const double dx = world.x - obj.shape.cx, dy = world.y - obj.shape.cy;
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    lmin = std::min(lmin, u);
    lmax = std::max(lmax, u);
    wmin = std::min(wmin, v);
    wmax = std::max(wmax, v);
  }
  if (stats.points > 0) {
    stats.spread_len = lmax - lmin;
    stats.spread_wid = wmax - wmin;
  }
  return stats;
}

int count_points_with_id(const PointCloud& pc, ObjectId id) {
  int n = 0;
  for (const LidarPoint& p : pc.points) n += (p.object_id == id);
  return n;
}

// Transmitted-cell counts for the scene, with and without the demand mask
// (supply stays on). Used to enforce strictly positive demand savings on
// every occlusion scene.
struct SelectionCounts {
  std::size_t with_demand = 0;
  std::size_t full_demand = 0;
};

SelectionCounts selection_counts(const Scene& scene, AgentId ego,
                                 const RoundConfig& rc) {
  SelectionCounts counts;
  const SceneAgent* ego_agent = scene.find_agent(ego);
  const PointCloud ego_pc = sample_lidar(scene, ego, 0.0, rc.sampler());
  const DensityMap density = rasterize_density(ego_pc, rc.grid);
  const BinaryMask demand = demand_mask(density, rc.eps_a);
  for (const SceneAgent& a : scene.agents) {
    if (a.id == ego) continue;
    const PointCloud pc = sample_lidar(scene, a.id, 0.0, rc.sampler());
    const std::vector<DenseGrid> ev = build_evidence(pc, rc.grid);
    const BinaryMask supply = supply_mask(confidence_map(ev), rc.eps_c);
    const BinaryMask warped =
        warp_mask(demand, ego_agent->pose, a.pose, rc.grid);
    for (const SparseGrid& sg :
         select_sparse(ev, selection_mask(warped, supply), rc.grid)) {
      counts.with_demand += sg.entries.size();
    }
    for (const SparseGrid& sg : select_sparse(ev, supply, rc.grid)) {
      counts.full_demand += sg.entries.size();
    }
  }
  return counts;
}

bool inside_grid(const Pose2& frame, const GridSpec& grid, Vec2 world_pt,
                 double margin) {
  const Vec2 local = transform_point(inverse(frame), world_pt);
  return local.x > grid.x_min + margin && local.x < grid.x_max - margin &&
         local.y > grid.y_min + margin && local.y < grid.y_max - margin;
}

// ---------------------------------------------------------------------------
// occlusion family
//
// Layout: a large broadside occluder between the ego and a hidden car; a
// second collaborator has a clear diagonal (two-face) view of the hidden
// car. A shared visible car sits near the ego with the first collaborator
// behind the ego, so the collaborator supplies cells the ego already
// observes densely (the demand mask must strictly save bytes). One more car
// sits past the far collaborator, outside the ego grid.
// ---------------------------------------------------------------------------
std::optional<SuiteScene> try_occlusion(std::uint64_t seed, int attempt,
                                        const ExperimentConfig& cfg) {
  Rng rng(hash_mix(seed, static_cast<std::uint64_t>(attempt)));
  const RoundConfig& rc = cfg.round;

  Scene scene;
  scene.seed = hash_mix(seed, 0xa11ce + attempt);

  const Pose2 ego_pose{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                       rng.uniform(-kPi, kPi)};
  scene.agents.push_back({0, ego_pose});
  const Vec2 ego{ego_pose.x, ego_pose.y};

  const double theta0 = rng.uniform(-kPi, kPi);

  // Occluder: broadside to the line of sight.
  const double d_occ = rng.uniform(10.5, 12.5);
  BevBox occ;
  {
    const Vec2 at = ego + polar(theta0, d_occ);
    occ.cx = at.x;
    occ.cy = at.y;
    occ.length = rng.uniform(8.5, 10.0);
    occ.width = rng.uniform(2.4, 2.8);
    occ.yaw = normalize_angle(theta0 + kPi / 2 + rng.uniform(-0.1, 0.1));
    occ.confidence = 1.0;
  }
  scene.objects.push_back({100, occ, {}});

  // Hidden car in the occluder's shadow.
  const double d_hidden = rng.uniform(18.5, 21.0);
  const double hidden_yaw = rng.uniform(-kPi, kPi);
  BevBox hidden = make_car(
      ego + polar(theta0 + rng.uniform(-0.03, 0.03), d_hidden), hidden_yaw,
      rng);
  if (!placement_ok(scene, hidden)) return std::nullopt;
  scene.objects.push_back({101, hidden, {}});

  // Shared visible car, broadside to the ego.
  const double theta_v = theta0 + rng.uniform(1.2, 1.8) *
                                      (rng.next_unit() < 0.5 ? 1.0 : -1.0);
  BevBox visible = make_car(ego + polar(theta_v, rng.uniform(6.0, 8.0)),
                            normalize_angle(theta_v + kPi / 2), rng);
  if (!placement_ok(scene, visible)) return std::nullopt;
  scene.objects.push_back({102, visible, {}});

  // Collaborator 1: behind the ego on the visible-car sight line.
  {
    const Vec2 away = ego - polar(theta_v, rng.uniform(5.4, 7.0));
    const Pose2 pose{away.x + rng.uniform(-1.0, 1.0),
                     away.y + rng.uniform(-1.0, 1.0),
                     rng.uniform(-kPi, kPi)};
    if (std::hypot(pose.x - ego.x, pose.y - ego.y) <
        cfg.round.grid.cell + 5.0) {
      return std::nullopt;
    }
    scene.agents.push_back({1, pose});
  }

  // Collaborator 2: diagonal two-face view of the hidden car.
  Pose2 collab2_pose;
  {
    const double side = rng.next_unit() < 0.5 ? 1.0 : -1.0;
    const double view = hidden_yaw + side * rng.uniform(0.6, 1.0);
    const Vec2 at =
        Vec2{hidden.cx, hidden.cy} + polar(view, rng.uniform(7.0, 9.0));
    collab2_pose = {at.x, at.y, rng.uniform(-kPi, kPi)};
    for (const SceneAgent& a : scene.agents) {
      if (std::hypot(collab2_pose.x - a.pose.x, collab2_pose.y - a.pose.y) <
          5.2) {
        return std::nullopt;
      }
    }
    scene.agents.push_back({2, collab2_pose});
  }

  // Held-out car past collaborator 2, outside the ego grid.
  BevBox heldout;
  {
    const Vec2 dir{collab2_pose.x - ego.x, collab2_pose.y - ego.y};
    const double len = std::hypot(dir.x, dir.y);
    const double reach = rng.uniform(5.5, 7.0);
    const Vec2 at{collab2_pose.x + dir.x / len * reach + rng.uniform(-1, 1),
                  collab2_pose.y + dir.y / len * reach + rng.uniform(-1, 1)};
    heldout = make_car(at, rng.uniform(-kPi, kPi), rng);
    if (!placement_ok(scene, heldout)) return std::nullopt;
    if (inside_grid(ego_pose, rc.grid, at, -0.8)) return std::nullopt;
    if (!inside_grid(collab2_pose, rc.grid, at, 2.0)) return std::nullopt;
    scene.objects.push_back({103, heldout, {}});
  }

  // Filler cars, kept away from the two critical sight lines by the
  // view-based verification below.
  const int fillers = 2 + static_cast<int>(rng.next_below(3));
  for (int i = 0; i < fillers; ++i) {
    for (int tries = 0; tries < 20; ++tries) {
      const Vec2 at = ego + polar(rng.uniform(-kPi, kPi),
                                  rng.uniform(6.0, 22.0));
      BevBox car = make_car(at, rng.uniform(-kPi, kPi), rng);
      if (!placement_ok(scene, car)) continue;
      if (!inside_grid(ego_pose, rc.grid, at, 2.0)) continue;
      scene.objects.push_back({110 + i, car, {}});
      break;
    }
  }

  // --- verification ---
  const PointCloud ego_pc = sample_lidar(scene, 0, 0.0, rc.sampler());
  if (count_points_with_id(ego_pc, 101) != 0) return std::nullopt;
  if (count_points_with_id(ego_pc, 102) < 25) return std::nullopt;

  const PointCloud c2_pc = sample_lidar(scene, 2, 0.0, rc.sampler());
  const SceneObject& hidden_obj = scene.objects[1];
  const ViewStats hidden_view = view_of(c2_pc, collab2_pose, hidden_obj);
  if (hidden_view.points < 40 ||
      hidden_view.spread_len < 0.82 * hidden_obj.shape.length ||
      hidden_view.spread_wid < 0.75 * hidden_obj.shape.width) {
    return std::nullopt;
  }
  const SceneObject& heldout_obj = scene.objects[3];
  const ViewStats heldout_view = view_of(c2_pc, collab2_pose, heldout_obj);
  if (heldout_view.points < 40 ||
      heldout_view.spread_len < 0.82 * heldout_obj.shape.length ||
      heldout_view.spread_wid < 0.75 * heldout_obj.shape.width) {
    return std::nullopt;
  }

  const SelectionCounts counts = selection_counts(scene, 0, rc);
  if (counts.with_demand >= counts.full_demand) return std::nullopt;

  SuiteScene out;
  out.family = Family::kOcclusion;
  out.seed = seed;
  out.scene = std::move(scene);
  out.hidden_object = 101;
  out.out_of_range_object = 103;
  return out;
}

// ---------------------------------------------------------------------------
// long-range family
//
// A band of cars far from every agent (their feature cells carry one or two
// points, so raising eps_c starves them), a couple of near cars for a
// stable base, a far-out collaborator with a car beyond the ego grid next
// to it.
// ---------------------------------------------------------------------------
std::optional<SuiteScene> try_long_range(std::uint64_t seed, int attempt,
                                         const ExperimentConfig& cfg) {
  Rng rng(hash_mix(seed, 0x10e6 + attempt));
  const RoundConfig& rc = cfg.round;

  Scene scene;
  scene.seed = hash_mix(seed, 0x10e60 + attempt);

  const Pose2 ego_pose{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                       rng.uniform(-kPi, kPi)};
  scene.agents.push_back({0, ego_pose});
  const Vec2 ego{ego_pose.x, ego_pose.y};

  const double far_bearing = rng.uniform(-kPi, kPi);

  // Collaborator 1 opposite the far band, collaborator 2 out along it.
  const Pose2 c1{ego.x + 11.0 * std::cos(far_bearing + kPi / 2) +
                     rng.uniform(-2, 2),
                 ego.y + 11.0 * std::sin(far_bearing + kPi / 2) +
                     rng.uniform(-2, 2),
                 rng.uniform(-kPi, kPi)};
  scene.agents.push_back({1, c1});
  const Vec2 c2_at = ego + polar(far_bearing, rng.uniform(28.0, 31.0));
  const Pose2 c2{c2_at.x, c2_at.y, rng.uniform(-kPi, kPi)};
  scene.agents.push_back({2, c2});

  // Far cars: 17..22 m from every agent.
  int placed_far = 0;
  for (int i = 0; i < 4 && placed_far < 3; ++i) {
    for (int tries = 0; tries < 25; ++tries) {
      const Vec2 at =
          ego + polar(far_bearing + rng.uniform(-0.55, 0.55),
                      rng.uniform(17.5, 21.5));
      BevBox car = make_car(at, rng.uniform(-kPi, kPi), rng);
      if (!placement_ok(scene, car)) continue;
      if (!inside_grid(ego_pose, rc.grid, at, 2.0)) continue;
      bool far_from_all = true;
      for (const SceneAgent& a : scene.agents) {
        if (std::hypot(at.x - a.pose.x, at.y - a.pose.y) < 16.5) {
          far_from_all = false;
          break;
        }
      }
      if (!far_from_all) continue;
      scene.objects.push_back({100 + placed_far, car, {}});
      ++placed_far;
      break;
    }
  }
  if (placed_far < 2) return std::nullopt;

  // Near cars.
  for (int i = 0; i < 2; ++i) {
    for (int tries = 0; tries < 20; ++tries) {
      const Vec2 at = ego + polar(rng.uniform(-kPi, kPi),
                                  rng.uniform(5.5, 8.5));
      BevBox car = make_car(at, rng.uniform(-kPi, kPi), rng);
      if (!placement_ok(scene, car)) continue;
      scene.objects.push_back({120 + i, car, {}});
      break;
    }
  }

  // Car outside the ego grid, close to collaborator 2.
  for (int tries = 0; tries < 25; ++tries) {
    const Vec2 at = c2_at + polar(far_bearing + rng.uniform(-0.7, 0.7),
                                  rng.uniform(6.5, 8.5));
    BevBox car = make_car(at, rng.uniform(-kPi, kPi), rng);
    if (!placement_ok(scene, car)) continue;
    if (inside_grid(ego_pose, rc.grid, at, -0.8)) continue;
    if (!inside_grid(c2, rc.grid, at, 2.0)) continue;
    scene.objects.push_back({130, car, {}});
    break;
  }

  SuiteScene out;
  out.family = Family::kLongRange;
  out.seed = seed;
  out.scene = std::move(scene);
  return out;
}

// ---------------------------------------------------------------------------
// false-positive family
//
// Cars at medium range whose fused two-face views form correct but
// low-confidence ego detections, plus strong near cars. Spurious boxes are
// injected into the collaborator detection messages at run time; some land
// next to real objects so naive merging overrides the weak correct boxes.
// ---------------------------------------------------------------------------
std::optional<SuiteScene> try_false_positive(std::uint64_t seed, int attempt,
                                             const ExperimentConfig& cfg) {
  Rng rng(hash_mix(seed, 0xfa15e + attempt));
  const RoundConfig& rc = cfg.round;

  Scene scene;
  scene.seed = hash_mix(seed, 0xfa150 + attempt);

  const Pose2 ego_pose{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                       rng.uniform(-kPi, kPi)};
  scene.agents.push_back({0, ego_pose});
  const Vec2 ego{ego_pose.x, ego_pose.y};

  // Medium-range cars seen face-on by the ego; a side collaborator sees the
  // second face so the fused component is a correct but weak L.
  const double band = rng.uniform(-kPi, kPi);
  int placed_weak = 0;
  std::vector<Vec2> weak_at;
  for (int i = 0; i < 3 && placed_weak < 2; ++i) {
    for (int tries = 0; tries < 25; ++tries) {
      const double bearing = band + rng.uniform(-0.5, 0.5);
      const Vec2 at = ego + polar(bearing, rng.uniform(14.0, 16.5));
      // Broadside to the ego: the ego sees the long face only.
      BevBox car = make_car(at, normalize_angle(bearing + kPi / 2), rng);
      if (!placement_ok(scene, car)) continue;
      if (!inside_grid(ego_pose, rc.grid, at, 2.5)) continue;
      scene.objects.push_back({100 + placed_weak, car, {}});
      weak_at.push_back(at);
      ++placed_weak;
      break;
    }
  }
  if (placed_weak < 2) return std::nullopt;

  // Side collaborator at a right angle to the band, 14..16 m from the weak
  // cars so its view of them stays sparse too.
  {
    const Vec2 mid = 0.5 * (weak_at[0] + weak_at[1]);
    const double side = rng.next_unit() < 0.5 ? 1.0 : -1.0;
    const Vec2 at = mid + polar(band + side * kPi / 2,
                                rng.uniform(14.0, 16.0));
    const Pose2 pose{at.x, at.y, rng.uniform(-kPi, kPi)};
    if (std::hypot(at.x - ego.x, at.y - ego.y) < 5.2) return std::nullopt;
    scene.agents.push_back({1, pose});
  }

  // Strong near cars.
  for (int i = 0; i < 3; ++i) {
    for (int tries = 0; tries < 20; ++tries) {
      const Vec2 at = ego + polar(rng.uniform(-kPi, kPi),
                                  rng.uniform(5.5, 9.0));
      BevBox car = make_car(at, rng.uniform(-kPi, kPi), rng);
      if (!placement_ok(scene, car)) continue;
      scene.objects.push_back({110 + i, car, {}});
      break;
    }
  }

  SuiteScene out;
  out.family = Family::kFalsePositive;
  out.seed = seed;
  out.scene = std::move(scene);
  return out;
}

// ---------------------------------------------------------------------------
// motion family: open field of cars all moving at the configured speed.
// ---------------------------------------------------------------------------
std::optional<SuiteScene> try_motion(std::uint64_t seed, int attempt,
                                     const ExperimentConfig& cfg) {
  Rng rng(hash_mix(seed, 0x30710 + attempt));

  Scene scene;
  scene.seed = hash_mix(seed, 0x307100 + attempt);

  const Pose2 ego_pose{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                       rng.uniform(-kPi, kPi)};
  scene.agents.push_back({0, ego_pose});
  const Vec2 ego{ego_pose.x, ego_pose.y};

  for (int i = 1; i <= 2; ++i) {
    for (int tries = 0; tries < 25; ++tries) {
      const Vec2 at = ego + polar(rng.uniform(-kPi, kPi),
                                  rng.uniform(10.0, 14.0));
      bool ok = true;
      for (const SceneAgent& a : scene.agents) {
        if (std::hypot(at.x - a.pose.x, at.y - a.pose.y) < 5.2) ok = false;
      }
      if (!ok) continue;
      scene.agents.push_back(
          {static_cast<AgentId>(i), {at.x, at.y, rng.uniform(-kPi, kPi)}});
      break;
    }
  }
  if (scene.agents.size() < 3) return std::nullopt;

  int placed = 0;
  for (int i = 0; i < 12 && placed < 8; ++i) {
    for (int tries = 0; tries < 20; ++tries) {
      const Vec2 at = ego + polar(rng.uniform(-kPi, kPi),
                                  rng.uniform(8.0, 18.0));
      BevBox car = make_car(at, rng.uniform(-kPi, kPi), rng);
      if (!placement_ok(scene, car)) continue;
      if (!inside_grid(ego_pose, cfg.round.grid, at, 3.5)) continue;
      SceneObject obj{100 + placed, car, {}};
      const double heading = rng.uniform(-kPi, kPi);
      obj.velocity = {cfg.suite.motion_speed * std::cos(heading),
                      cfg.suite.motion_speed * std::sin(heading)};
      scene.objects.push_back(obj);
      ++placed;
      break;
    }
  }
  if (placed < 6) return std::nullopt;

  SuiteScene out;
  out.family = Family::kMotion;
  out.seed = seed;
  out.scene = std::move(scene);
  return out;
}

SuiteScene make_dense_urban(std::uint64_t seed, const ExperimentConfig& cfg) {
  SceneConfig sc;
  sc.num_agents = 4;
  sc.num_objects = 22;
  sc.half_extent = std::min(cfg.round.grid.x_max, cfg.round.grid.y_max) - 2.0;
  sc.occluder_fraction = 0.2;

  SuiteScene out;
  out.family = Family::kDenseUrban;
  out.seed = seed;
  out.scene = generate_scene(sc, seed);
  return out;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::kOcclusion: return "occlusion";
    case Family::kLongRange: return "long_range";
    case Family::kFalsePositive: return "false_positive";
    case Family::kMotion: return "motion";
    case Family::kDenseUrban: return "dense_urban";
  }
  return "unknown";
}

std::optional<Family> family_from_name(const std::string& name) {
  for (Family f : {Family::kOcclusion, Family::kLongRange,
                   Family::kFalsePositive, Family::kMotion,
                   Family::kDenseUrban}) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

std::uint64_t suite_scene_seed(std::uint64_t base_seed, Family f, int index) {
  return hash_mix(hash_mix(base_seed, static_cast<std::uint64_t>(f)),
                  static_cast<std::uint64_t>(index));
}

SuiteScene make_suite_scene(Family f, int index, const ExperimentConfig& cfg) {
  const std::uint64_t seed = suite_scene_seed(cfg.suite.base_seed, f, index);
  constexpr int kMaxAttempts = 60;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::optional<SuiteScene> candidate;
    switch (f) {
      case Family::kOcclusion:
        candidate = try_occlusion(seed, attempt, cfg);
        break;
      case Family::kLongRange:
        candidate = try_long_range(seed, attempt, cfg);
        break;
      case Family::kFalsePositive:
        candidate = try_false_positive(seed, attempt, cfg);
        break;
      case Family::kMotion:
        candidate = try_motion(seed, attempt, cfg);
        break;
      case Family::kDenseUrban:
        candidate = make_dense_urban(hash_mix(seed, attempt), cfg);
        break;
    }
    if (candidate) {
      candidate->index = index;
      return std::move(*candidate);
    }
  }
  throw std::runtime_error("make_suite_scene: could not satisfy the " +
                           family_name(f) + " family constraints for index " +
                           std::to_string(index));
}

std::vector<SuiteScene> build_suite(const ExperimentConfig& cfg) {
  std::vector<SuiteScene> suite;
  for (const std::string& name : cfg.suite.families) {
    const std::optional<Family> f = family_from_name(name);
    if (!f) {
      throw ConfigError("config: unknown family '" + name +
                        "' in suite.families");
    }
    for (int i = 0; i < cfg.suite.scenes_per_family; ++i) {
      suite.push_back(make_suite_scene(*f, i, cfg));
    }
  }
  return suite;
}

std::vector<SuiteScene> build_motion_suite(const ExperimentConfig& cfg) {
  std::vector<SuiteScene> suite;
  for (int i = 0; i < cfg.suite.latency_scene_count; ++i) {
    suite.push_back(make_suite_scene(Family::kMotion, 1000 + i, cfg));
  }
  return suite;
}

RoundConfig round_config_for(const ExperimentConfig& cfg, Family f) {
  RoundConfig rc = cfg.round;
  if (f == Family::kFalsePositive) {
    rc.spurious_count = cfg.fp_injection_count;
    rc.spurious_conf = cfg.fp_injection_conf;
  } else {
    rc.spurious_count = 0;
  }
  return rc;
}

}  // namespace vcpsim
