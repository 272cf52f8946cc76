// One collaboration round per frame: demand broadcast, supply-demand
// selection at each collaborator, feature + detection replies, fusion and
// late fusion at the ego. Also the two-round latency model and the
// stale-observation variant.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vcpsim/eval.hpp"
#include "vcpsim/fusion.hpp"
#include "vcpsim/late_fusion.hpp"
#include "vcpsim/scene.hpp"
#include "vcpsim/wire.hpp"

namespace vcpsim {

struct LatencyProfile {
  double backbone_ms = 15.0;
  double demand_gen_ms = 1.0;
  double supply_gen_ms = 3.0;
  double comm_ms = 20.0;  // per communication round
  double downstream_ms = 0.0;

  void validate() const;  // all non-negative
};

// Critical path of the two-round pipeline. The demand round runs in
// parallel with the backbone + supply generator, so:
//   max(backbone + supply_gen, demand_gen + comm) + comm + downstream
double total_latency_ms(const LatencyProfile& p);

// Single-round baseline without the demand exchange:
//   backbone + supply_gen + comm + downstream
double single_round_latency_ms(const LatencyProfile& p);

// What the demand-mask round adds over the single-round baseline.
double demand_round_overhead_ms(const LatencyProfile& p);

// In-process message bus. Delivery is synchronous; when recording, every
// payload is captured in order and can be dumped to a replayable log.
class Bus {
 public:
  struct Record {
    std::uint32_t seq = 0;
    AgentId sender = 0;
    AgentId receiver = 0;
    PayloadKind kind = PayloadKind::kDemand;
    std::vector<std::uint8_t> bytes;
  };

  void set_recording(bool on) { recording_ = on; }
  void deliver(AgentId sender, AgentId receiver, PayloadKind kind,
               const std::vector<std::uint8_t>& bytes);
  const std::vector<Record>& records() const { return records_; }

  void write_log(const std::string& path) const;
  static std::vector<Record> read_log(const std::string& path);

 private:
  bool recording_ = false;
  std::vector<Record> records_;
};

struct RoundConfig {
  GridSpec grid;
  int rays = 1440;
  double ground_step = 1.0;
  double d_max = 0.0;  // 0 = range half-diagonal

  double eps_a = 0.125;  // 4/32
  double eps_c = 0.01;
  bool use_supply = true;
  bool use_demand = true;

  int c0 = 16;
  std::vector<int> nominal_channels = {64, 128, 256};
  ValuePrecision precision = ValuePrecision::kHalf;

  DetectorParams detector;
  LateFusionParams late;
  bool late_enabled = true;
  bool naive_late = false;  // ablation: merge without filter/suppression

  int max_collaborators = 4;  // nearest-first cap

  // Fault injection for the false-positive fixtures: spurious boxes added
  // to every collaborator's detection message.
  int spurious_count = 0;
  double spurious_conf = 0.2;

  SamplerConfig sampler() const;
  void validate() const;
};

struct CollaboratorReport {
  AgentId id = 0;
  ByteReport bytes;
  std::size_t feature_entries = 0;  // transmitted cells, summed over scales
};

struct RoundTrace {
  AgentId ego = 0;
  std::vector<CollaboratorReport> collaborators;  // sorted by id
  std::vector<BevBox> intermediate;               // ego frame
  std::optional<std::vector<BevBox>> final_boxes; // present iff late fusion on
  double latency_ms = 0.0;                        // model, not wall clock
  std::vector<std::string> warnings;

  const std::vector<BevBox>& output() const {
    return final_boxes ? *final_boxes : intermediate;
  }
  std::size_t link_bytes_to_ego() const;
};

// Decode helpers used on the ego side. Malformed payloads yield nullopt and
// append a warning instead of aborting the round.
std::optional<std::vector<SparseGrid>> try_decode_features(
    const std::vector<std::uint8_t>& bytes, AgentId sender,
    const Pose2& sender_pose, const Pose2& ego_pose, const GridSpec& spec,
    std::vector<std::string>* warnings);
std::optional<DetectionMessage> try_decode_detections(
    const std::vector<std::uint8_t>& bytes, AgentId sender,
    const Pose2& sender_pose, std::vector<std::string>* warnings);

// Executes one full round for the given ego agent. Deterministic for fixed
// inputs; with run_parallel the per-collaborator work runs on threads and
// must produce identical results (fusion order is always sorted by sender).
// A collaborator whose payload fails to decode is skipped with a warning.
RoundTrace run_round(const Scene& scene, AgentId ego, const RoundConfig& cfg,
                     Bus* bus = nullptr, bool run_parallel = false);

// As run_round, but collaborator observations (and poses) are taken at
// t - latency_ms/1000 while the ego and the ground truth stay at t, so
// moving objects drift inside collaborator messages. No compensation.
RoundTrace run_with_staleness(const Scene& scene, AgentId ego,
                              const RoundConfig& cfg, double latency_ms,
                              Bus* bus = nullptr, bool run_parallel = false);

std::string round_trace_to_json(const RoundTrace& trace);

}  // namespace vcpsim
