// Wire layer: canonical little-endian binary encodings for the three
// inter-agent payloads, half-precision conversion, and the byte accounting
// behind every bandwidth figure. Layouts are documented in FORMAT.md and
// pinned by golden fixtures under tests/golden/.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcpsim/geometry.hpp"
#include "vcpsim/supply_demand.hpp"

namespace vcpsim {

class MessageError : public std::runtime_error {
 public:
  explicit MessageError(const std::string& what) : std::runtime_error(what) {}
};

// IEEE-754 binary16, round-to-nearest-even.
std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);

enum class ValuePrecision : std::uint8_t { kHalf = 0, kFloat32 = 1 };

enum class PayloadKind : std::uint16_t {
  kDemand = 1,
  kFeatures = 2,
  kDetections = 3,
};

constexpr std::size_t kHeaderBytes = 16;
constexpr std::size_t kScaleHeaderBytes = 8;
constexpr std::size_t kBytesPerDetection = 24;

struct DemandMessage {
  AgentId sender = 0;
  BinaryMask mask;  // base scale
};

struct FeatureMessage {
  AgentId sender = 0;
  int c0 = 16;  // channel compression ratio
  ValuePrecision precision = ValuePrecision::kHalf;
  Pose2 pose;  // sender pose; exchanged out of band, not billed
  std::vector<SparseGrid> scales;
};

struct DetectionMessage {
  AgentId sender = 0;
  Pose2 pose;  // sender pose; exchanged out of band, not billed
  std::vector<BevBox> boxes;  // sender frame
};

struct ByteReport {
  std::size_t demand_bytes = 0;
  std::size_t feature_bytes = 0;
  std::size_t detection_bytes = 0;

  std::size_t total_bytes() const {
    return demand_bytes + feature_bytes + detection_bytes;
  }
  // Collaborator-to-ego volume: what the per-agent budget is charged for.
  // The demand mask travels ego-to-collaborator and is reported separately.
  std::size_t link_bytes_to_ego() const {
    return feature_bytes + detection_bytes;
  }
};

// bytes-per-frame at rate_hz frames per second, in megabits per second.
double bytes_to_mbps(double bytes_per_frame, double rate_hz = 10.0);

// Value payload size for one transmitted cell: (channels/c0) values at the
// given precision plus two u16 coordinates.
std::size_t feature_cell_bytes(int nominal_channels, int c0,
                               ValuePrecision precision);

// ceil(rows*cols/8) bitmap plus the 16-byte header.
std::size_t demand_message_bytes(int rows, int cols);

std::size_t detection_message_bytes(std::size_t num_boxes);

std::vector<std::uint8_t> encode_demand(const DemandMessage& msg);
DemandMessage decode_demand(const std::vector<std::uint8_t>& bytes);

// nominal_channels holds the modeled channel count per scale (the byte
// accounting follows these, not the two evidence channels actually carried);
// c0 must divide each entry.
std::vector<std::uint8_t> encode_feature_message(
    const FeatureMessage& msg, const std::vector<int>& nominal_channels);

// Inverse of encode up to one half-ulp on values (fp16 mode). The sender
// pose is supplied by the caller from its pose table. When `spec` is given,
// coordinates are validated against the per-scale grid bounds.
FeatureMessage decode_feature_message(const std::vector<std::uint8_t>& bytes,
                                      const Pose2& sender_pose,
                                      const GridSpec* spec = nullptr);

std::vector<std::uint8_t> encode_detections(const DetectionMessage& msg);
DetectionMessage decode_detections(const std::vector<std::uint8_t>& bytes,
                                   const Pose2& sender_pose);

// Peeks at a payload header; throws MessageError if malformed.
struct PayloadInfo {
  PayloadKind kind;
  AgentId sender;
};
PayloadInfo peek_payload(const std::vector<std::uint8_t>& bytes);

}  // namespace vcpsim
