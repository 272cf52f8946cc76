#include "vcpsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "vcpsim/rng.hpp"

namespace vcpsim {

void LatencyProfile::validate() const {
  if (backbone_ms < 0 || demand_gen_ms < 0 || supply_gen_ms < 0 ||
      comm_ms < 0 || downstream_ms < 0) {
    throw std::invalid_argument("LatencyProfile: components must be >= 0");
  }
}

double total_latency_ms(const LatencyProfile& p) {
  p.validate();
  return std::max(p.backbone_ms + p.supply_gen_ms,
                  p.demand_gen_ms + p.comm_ms) +
         p.comm_ms + p.downstream_ms;
}

double single_round_latency_ms(const LatencyProfile& p) {
  p.validate();
  return p.backbone_ms + p.supply_gen_ms + p.comm_ms + p.downstream_ms;
}

double demand_round_overhead_ms(const LatencyProfile& p) {
  return total_latency_ms(p) - single_round_latency_ms(p);
}

void Bus::deliver(AgentId sender, AgentId receiver, PayloadKind kind,
                  const std::vector<std::uint8_t>& bytes) {
  if (!recording_) return;
  Record rec;
  rec.seq = static_cast<std::uint32_t>(records_.size());
  rec.sender = sender;
  rec.receiver = receiver;
  rec.kind = kind;
  rec.bytes = bytes;
  records_.push_back(std::move(rec));
}

void Bus::write_log(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("Bus::write_log: cannot open " + path);
  const char magic[4] = {'V', 'C', 'P', 'L'};
  out.write(magic, 4);
  auto put_u32 = [&out](std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
  };
  put_u32(1);  // version
  put_u32(static_cast<std::uint32_t>(records_.size()));
  for (const Record& rec : records_) {
    put_u32(rec.seq);
    put_u32(static_cast<std::uint32_t>(rec.sender));
    put_u32(static_cast<std::uint32_t>(rec.receiver));
    put_u32(static_cast<std::uint32_t>(rec.kind));
    put_u32(static_cast<std::uint32_t>(rec.bytes.size()));
    out.write(reinterpret_cast<const char*>(rec.bytes.data()),
              static_cast<std::streamsize>(rec.bytes.size()));
  }
}

std::vector<Bus::Record> Bus::read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("Bus::read_log: cannot open " + path);
  auto get_u32 = [&in, &path]() {
    char b[4];
    in.read(b, 4);
    if (!in) throw std::runtime_error("Bus::read_log: truncated log " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i]))
           << (8 * i);
    return v;
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || magic[0] != 'V' || magic[1] != 'C' || magic[2] != 'P' ||
      magic[3] != 'L') {
    throw std::runtime_error("Bus::read_log: bad log magic");
  }
  if (get_u32() != 1) throw std::runtime_error("Bus::read_log: bad version");
  const std::uint32_t count = get_u32();
  std::vector<Record> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Record rec;
    rec.seq = get_u32();
    rec.sender = static_cast<AgentId>(get_u32());
    rec.receiver = static_cast<AgentId>(get_u32());
    rec.kind = static_cast<PayloadKind>(get_u32());
    const std::uint32_t len = get_u32();
    rec.bytes.resize(len);
    in.read(reinterpret_cast<char*>(rec.bytes.data()), len);
    if (!in) throw std::runtime_error("Bus::read_log: truncated payload");
    records.push_back(std::move(rec));
  }
  return records;
}

SamplerConfig RoundConfig::sampler() const {
  SamplerConfig s;
  s.x_min = grid.x_min;
  s.x_max = grid.x_max;
  s.y_min = grid.y_min;
  s.y_max = grid.y_max;
  s.rays = rays;
  s.ground_step = ground_step;
  s.d_max = d_max;
  return s;
}

void RoundConfig::validate() const {
  grid.validate();
  if (eps_a <= 0.0 || eps_a > 1.0)
    throw std::invalid_argument("RoundConfig: eps_a must be in (0,1]");
  if (eps_c < 0.0 || eps_c > 1.0)
    throw std::invalid_argument("RoundConfig: eps_c must be in [0,1]");
  if (nominal_channels.size() != grid.strides.size())
    throw std::invalid_argument(
        "RoundConfig: one nominal channel count per scale required");
  for (int ch : nominal_channels) {
    if (c0 <= 0 || ch % c0 != 0)
      throw std::invalid_argument(
          "RoundConfig: c0 must divide every nominal channel count");
  }
  if (max_collaborators < 0)
    throw std::invalid_argument("RoundConfig: max_collaborators must be >= 0");
  late.validate();
}

std::size_t RoundTrace::link_bytes_to_ego() const {
  std::size_t total = 0;
  for (const CollaboratorReport& c : collaborators) {
    total += c.bytes.link_bytes_to_ego();
  }
  return total;
}

namespace {

struct EgoState {
  Pose2 pose;
  std::vector<DenseGrid> evidence;
  BinaryMask demand;
  std::vector<std::uint8_t> demand_wire;
};

struct CollaboratorBundle {
  AgentId id = 0;
  Pose2 pose;  // as known to the ego (static agents: current pose)
  std::vector<std::uint8_t> feature_wire;
  std::vector<std::uint8_t> detection_wire;
  ByteReport bytes;
  std::size_t feature_entries = 0;
};

// Spurious low-confidence boxes for the false-positive fixtures. Half are
// scattered, half sit next to real objects (clutter echoes) so that naive
// merging lets them override genuine weak detections during NMS.
std::vector<BevBox> spurious_boxes(const Scene& scene, AgentId sender,
                                   const RoundConfig& cfg) {
  std::vector<BevBox> out;
  if (cfg.spurious_count <= 0) return out;
  Rng rng(hash_mix(hash_mix(scene.seed, 0x5b0c5),
                   static_cast<std::uint64_t>(sender)));
  const double span = 0.9 * std::min(cfg.grid.x_max, cfg.grid.y_max);
  for (int i = 0; i < cfg.spurious_count; ++i) {
    BevBox b;
    if (i % 2 == 0 || scene.objects.empty()) {
      b.cx = rng.uniform(-span, span);
      b.cy = rng.uniform(-span, span);
      b.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    } else {
      const SceneObject& target =
          scene.objects[rng.next_below(scene.objects.size())];
      const double bearing = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double offset = rng.uniform(1.2, 2.4);
      b.cx = target.shape.cx + offset * std::cos(bearing);
      b.cy = target.shape.cy + offset * std::sin(bearing);
      b.yaw = normalize_angle(target.shape.yaw + rng.uniform(-0.4, 0.4));
    }
    b.length = rng.uniform(3.8, 5.0);
    b.width = rng.uniform(1.7, 2.1);
    b.confidence = cfg.spurious_conf;
    b.source_agent = sender;
    out.push_back(b);
  }
  return out;
}

CollaboratorBundle process_collaborator(const Scene& scene,
                                        const SceneAgent& collab,
                                        const EgoState& ego_state,
                                        const RoundConfig& cfg,
                                        double obs_time) {
  CollaboratorBundle bundle;
  bundle.id = collab.id;
  bundle.pose = collab.pose;

  const PointCloud pc =
      sample_lidar(scene, collab.id, obs_time, cfg.sampler());
  const std::vector<DenseGrid> evidence = build_evidence(pc, cfg.grid);
  const ConfidenceMap conf = confidence_map(evidence);

  const BinaryMask supply =
      cfg.use_supply ? supply_mask(conf, cfg.eps_c)
                     : full_mask(conf.rows, conf.cols, true);
  // The ego's demand mask lives on the ego grid; evaluate it on this
  // collaborator's grid before combining.
  const BinaryMask demand_here =
      cfg.use_demand
          ? warp_mask(ego_state.demand, ego_state.pose, collab.pose, cfg.grid)
          : full_mask(conf.rows, conf.cols, true);
  const BinaryMask selection = selection_mask(demand_here, supply);
  const std::vector<SparseGrid> sparse =
      select_sparse(evidence, selection, cfg.grid);

  FeatureMessage fmsg;
  fmsg.sender = collab.id;
  fmsg.c0 = cfg.c0;
  fmsg.precision = cfg.precision;
  fmsg.pose = collab.pose;
  fmsg.scales = sparse;
  bundle.feature_wire = encode_feature_message(fmsg, cfg.nominal_channels);
  for (const SparseGrid& sg : sparse) bundle.feature_entries += sg.entries.size();

  // Late-fusion payload: this agent's own single-view detections.
  FusedEvidence local;
  local.grids = evidence;
  std::vector<BevBox> local_boxes = detect(local, cfg.grid, cfg.detector);
  for (BevBox& b : local_boxes) b.source_agent = collab.id;
  const Pose2 world_to_local = inverse(collab.pose);
  for (const BevBox& b : spurious_boxes(scene, collab.id, cfg)) {
    local_boxes.push_back(transform_box(world_to_local, b));
  }
  DetectionMessage dmsg;
  dmsg.sender = collab.id;
  dmsg.pose = collab.pose;
  dmsg.boxes = std::move(local_boxes);
  bundle.detection_wire = encode_detections(dmsg);

  bundle.bytes.demand_bytes = ego_state.demand_wire.size();
  bundle.bytes.feature_bytes = bundle.feature_wire.size();
  bundle.bytes.detection_bytes = bundle.detection_wire.size();
  return bundle;
}

RoundTrace run_round_impl(const Scene& scene, AgentId ego,
                          const RoundConfig& cfg, double latency_ms, Bus* bus,
                          bool run_parallel) {
  cfg.validate();
  const SceneAgent* ego_agent = scene.find_agent(ego);
  if (ego_agent == nullptr) {
    throw std::invalid_argument("run_round: ego agent not in scene");
  }
  const double t = scene.timestamp;
  const double obs_time = t - latency_ms / 1000.0;

  RoundTrace trace;
  trace.ego = ego;

  // Ego-side perception and demand.
  EgoState ego_state;
  ego_state.pose = ego_agent->pose;
  const PointCloud ego_pc = sample_lidar(scene, ego, t, cfg.sampler());
  ego_state.evidence = build_evidence(ego_pc, cfg.grid);
  const DensityMap density = rasterize_density(ego_pc, cfg.grid);
  ego_state.demand = cfg.use_demand
                         ? demand_mask(density, cfg.eps_a)
                         : full_mask(density.rows, density.cols, true);
  DemandMessage demand_msg;
  demand_msg.sender = ego;
  demand_msg.mask = ego_state.demand;
  ego_state.demand_wire = encode_demand(demand_msg);

  // Nearest-first collaborator cap.
  std::vector<const SceneAgent*> collaborators;
  for (const SceneAgent& a : scene.agents) {
    if (a.id != ego) collaborators.push_back(&a);
  }
  std::sort(collaborators.begin(), collaborators.end(),
            [&](const SceneAgent* a, const SceneAgent* b) {
              const double da = std::hypot(a->pose.x - ego_state.pose.x,
                                           a->pose.y - ego_state.pose.y);
              const double db = std::hypot(b->pose.x - ego_state.pose.x,
                                           b->pose.y - ego_state.pose.y);
              if (da != db) return da < db;
              return a->id < b->id;
            });
  if (static_cast<int>(collaborators.size()) > cfg.max_collaborators) {
    collaborators.resize(cfg.max_collaborators);
  }
  std::sort(collaborators.begin(), collaborators.end(),
            [](const SceneAgent* a, const SceneAgent* b) {
              return a->id < b->id;
            });

  std::vector<CollaboratorBundle> bundles(collaborators.size());
  if (run_parallel && collaborators.size() > 1) {
    std::vector<std::thread> threads;
    threads.reserve(collaborators.size());
    for (std::size_t i = 0; i < collaborators.size(); ++i) {
      threads.emplace_back([&, i]() {
        bundles[i] = process_collaborator(scene, *collaborators[i],
                                          ego_state, cfg, obs_time);
      });
    }
    for (std::thread& th : threads) th.join();
  } else {
    for (std::size_t i = 0; i < collaborators.size(); ++i) {
      bundles[i] = process_collaborator(scene, *collaborators[i],
                                        ego_state, cfg, obs_time);
    }
  }

  if (bus != nullptr) {
    for (const CollaboratorBundle& b : bundles) {
      bus->deliver(ego, b.id, PayloadKind::kDemand, ego_state.demand_wire);
    }
    for (const CollaboratorBundle& b : bundles) {
      bus->deliver(b.id, ego, PayloadKind::kFeatures, b.feature_wire);
      bus->deliver(b.id, ego, PayloadKind::kDetections, b.detection_wire);
    }
  }

  // Ego-side decode, transform, fuse (sender order is already sorted).
  std::vector<std::vector<SparseGrid>> received;
  std::vector<DetectionMessage> detections;
  for (const CollaboratorBundle& b : bundles) {
    trace.collaborators.push_back({b.id, b.bytes, b.feature_entries});
    if (auto grids = try_decode_features(b.feature_wire, b.id, b.pose,
                                         ego_state.pose, cfg.grid,
                                         &trace.warnings)) {
      received.push_back(std::move(*grids));
    }
    if (auto msg = try_decode_detections(b.detection_wire, b.id, b.pose,
                                         &trace.warnings)) {
      detections.push_back(std::move(*msg));
    }
  }

  const FusedEvidence fused = max_fuse(ego_state.evidence, received);
  trace.intermediate = detect(fused, cfg.grid, cfg.detector);
  for (BevBox& b : trace.intermediate) b.source_agent = ego;

  if (cfg.late_enabled) {
    if (cfg.naive_late) {
      trace.final_boxes = naive_late_fuse(trace.intermediate, detections,
                                          ego_state.pose, cfg.late.nms_iou);
    } else {
      trace.final_boxes =
          late_fuse(trace.intermediate, detections, ego_state.pose, cfg.late);
    }
  }

  LatencyProfile profile;
  trace.latency_ms = total_latency_ms(profile);
  return trace;
}

}  // namespace

std::optional<std::vector<SparseGrid>> try_decode_features(
    const std::vector<std::uint8_t>& bytes, AgentId sender,
    const Pose2& sender_pose, const Pose2& ego_pose, const GridSpec& spec,
    std::vector<std::string>* warnings) {
  try {
    const FeatureMessage msg = decode_feature_message(bytes, sender_pose, &spec);
    return transform_sparse(msg.scales, msg.pose, ego_pose, spec);
  } catch (const MessageError& e) {
    if (warnings != nullptr) {
      warnings->push_back("collaborator " + std::to_string(sender) +
                          ": feature payload dropped: " + e.what());
    }
    return std::nullopt;
  }
}

std::optional<DetectionMessage> try_decode_detections(
    const std::vector<std::uint8_t>& bytes, AgentId sender,
    const Pose2& sender_pose, std::vector<std::string>* warnings) {
  try {
    return decode_detections(bytes, sender_pose);
  } catch (const MessageError& e) {
    if (warnings != nullptr) {
      warnings->push_back("collaborator " + std::to_string(sender) +
                          ": detection payload dropped: " + e.what());
    }
    return std::nullopt;
  }
}

RoundTrace run_round(const Scene& scene, AgentId ego, const RoundConfig& cfg,
                     Bus* bus, bool run_parallel) {
  return run_round_impl(scene, ego, cfg, 0.0, bus, run_parallel);
}

RoundTrace run_with_staleness(const Scene& scene, AgentId ego,
                              const RoundConfig& cfg, double latency_ms,
                              Bus* bus, bool run_parallel) {
  if (latency_ms < 0.0) {
    throw std::invalid_argument("run_with_staleness: latency must be >= 0");
  }
  return run_round_impl(scene, ego, cfg, latency_ms, bus, run_parallel);
}

namespace {

nlohmann::ordered_json boxes_to_json(const std::vector<BevBox>& boxes) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const BevBox& b : boxes) {
    arr.push_back({{"cx", b.cx},
                   {"cy", b.cy},
                   {"length", b.length},
                   {"width", b.width},
                   {"yaw", b.yaw},
                   {"confidence", b.confidence},
                   {"source_agent", b.source_agent}});
  }
  return arr;
}

}  // namespace

std::string round_trace_to_json(const RoundTrace& trace) {
  nlohmann::ordered_json j;
  j["ego"] = trace.ego;
  j["collaborators"] = nlohmann::ordered_json::array();
  for (const CollaboratorReport& c : trace.collaborators) {
    j["collaborators"].push_back(
        {{"id", c.id},
         {"demand_bytes", c.bytes.demand_bytes},
         {"feature_bytes", c.bytes.feature_bytes},
         {"detection_bytes", c.bytes.detection_bytes},
         {"link_bytes_to_ego", c.bytes.link_bytes_to_ego()}});
  }
  j["intermediate"] = boxes_to_json(trace.intermediate);
  if (trace.final_boxes) {
    j["final"] = boxes_to_json(*trace.final_boxes);
  }
  j["latency_ms"] = trace.latency_ms;
  j["warnings"] = trace.warnings;
  return j.dump(2) + "\n";
}

}  // namespace vcpsim
