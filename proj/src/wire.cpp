#include "vcpsim/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace vcpsim {

namespace {

constexpr std::uint8_t kMagic[4] = {'V', 'C', 'P', 'M'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kFlagFloat32 = 0x01;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>* out) : out_(out) {}
  void u8(std::uint8_t v) { out_->push_back(v); }
  void u16(std::uint16_t v) {
    out_->push_back(static_cast<std::uint8_t>(v & 0xff));
    out_->push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      out_->push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::vector<std::uint8_t>* out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] |
                                                 (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const {
    if (pos_ != in_.size())
      throw MessageError("malformed message: trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size())
      throw MessageError("malformed message: truncated payload");
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, PayloadKind kind, AgentId sender,
                  std::uint32_t count, std::uint8_t flags) {
  for (std::uint8_t m : kMagic) w.u8(m);
  w.u8(kVersion);
  w.u8(flags);
  w.u16(static_cast<std::uint16_t>(kind));
  w.u32(static_cast<std::uint32_t>(sender));
  w.u32(count);
}

struct Header {
  std::uint8_t flags;
  PayloadKind kind;
  AgentId sender;
  std::uint32_t count;
};

Header read_header(Reader& r) {
  for (std::uint8_t m : kMagic) {
    if (r.u8() != m) throw MessageError("malformed message: bad magic");
  }
  if (r.u8() != kVersion)
    throw MessageError("malformed message: unsupported version");
  Header h;
  h.flags = r.u8();
  const std::uint16_t kind = r.u16();
  if (kind < 1 || kind > 3)
    throw MessageError("malformed message: unknown payload kind");
  h.kind = static_cast<PayloadKind>(kind);
  h.sender = static_cast<AgentId>(r.u32());
  h.count = r.u32();
  return h;
}

}  // namespace

std::uint16_t float_to_half(float f) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000);
  const std::int32_t exp = static_cast<std::int32_t>((bits >> 23) & 0xff) - 127;
  std::uint32_t mant = bits & 0x7fffff;

  if (exp == 128) {  // inf / nan
    return static_cast<std::uint16_t>(sign | 0x7c00 | (mant ? 0x200 : 0));
  }
  if (exp > 15) {  // overflow to inf
    return static_cast<std::uint16_t>(sign | 0x7c00);
  }
  if (exp >= -14) {  // normal range
    std::uint16_t h = static_cast<std::uint16_t>(
        sign | ((exp + 15) << 10) | (mant >> 13));
    // round to nearest even on the 13 dropped bits
    const std::uint32_t rem = mant & 0x1fff;
    if (rem > 0x1000 || (rem == 0x1000 && (h & 1))) ++h;
    return h;
  }
  if (exp >= -25) {  // subnormal half
    mant |= 0x800000;
    const int shift = -exp - 1;  // 14..24 low bits dropped
    std::uint16_t h = static_cast<std::uint16_t>(sign | (mant >> shift));
    const std::uint32_t dropped = mant & ((1u << shift) - 1);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (dropped > halfway || (dropped == halfway && (h & 1))) ++h;
    return h;
  }
  return sign;  // underflow to signed zero
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1f;
  const std::uint32_t mant = h & 0x3ff;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {  // subnormal: renormalize
      int e = -1;
      std::uint32_t m = mant;
      while (!(m & 0x400)) {
        m <<= 1;
        ++e;
      }
      bits = sign | ((127 - 15 - e) << 23) | ((m & 0x3ff) << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000 | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

double bytes_to_mbps(double bytes_per_frame, double rate_hz) {
  return bytes_per_frame * rate_hz * 8.0 / 1e6;
}

std::size_t feature_cell_bytes(int nominal_channels, int c0,
                               ValuePrecision precision) {
  if (c0 <= 0 || nominal_channels % c0 != 0) {
    throw std::invalid_argument(
        "feature_cell_bytes: c0 must divide nominal_channels");
  }
  const std::size_t per_value = precision == ValuePrecision::kHalf ? 2 : 4;
  return static_cast<std::size_t>(nominal_channels / c0) * per_value + 4;
}

std::size_t demand_message_bytes(int rows, int cols) {
  return kHeaderBytes +
         (static_cast<std::size_t>(rows) * cols + 7) / 8;
}

std::size_t detection_message_bytes(std::size_t num_boxes) {
  return kHeaderBytes + num_boxes * kBytesPerDetection;
}

std::vector<std::uint8_t> encode_demand(const DemandMessage& msg) {
  const BinaryMask& m = msg.mask;
  if (m.rows <= 0 || m.cols <= 0 || m.rows > 0xffff || m.cols > 0xffff) {
    throw std::invalid_argument("encode_demand: mask dims must fit u16");
  }
  std::vector<std::uint8_t> out;
  out.reserve(demand_message_bytes(m.rows, m.cols));
  Writer w(&out);
  write_header(w, PayloadKind::kDemand, msg.sender,
               (static_cast<std::uint32_t>(m.rows) << 16) |
                   static_cast<std::uint32_t>(m.cols),
               0);
  std::uint8_t acc = 0;
  int nbits = 0;
  for (std::size_t i = 0; i < m.v.size(); ++i) {
    if (m.v[i]) acc |= static_cast<std::uint8_t>(1u << nbits);
    if (++nbits == 8) {
      w.u8(acc);
      acc = 0;
      nbits = 0;
    }
  }
  if (nbits > 0) w.u8(acc);
  return out;
}

DemandMessage decode_demand(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const Header h = read_header(r);
  if (h.kind != PayloadKind::kDemand)
    throw MessageError("malformed message: expected demand payload");
  const int rows = static_cast<int>(h.count >> 16);
  const int cols = static_cast<int>(h.count & 0xffff);
  if (rows <= 0 || cols <= 0)
    throw MessageError("malformed message: empty demand dims");
  const std::size_t nbytes = (static_cast<std::size_t>(rows) * cols + 7) / 8;
  if (r.remaining() != nbytes)
    throw MessageError("malformed message: demand bitmap size mismatch");

  DemandMessage msg;
  msg.sender = h.sender;
  msg.mask = BinaryMask(0, rows, cols);
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < msg.mask.v.size(); ++i) {
    if (i % 8 == 0) acc = r.u8();
    msg.mask.v[i] = (acc >> (i % 8)) & 1;
  }
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode_feature_message(
    const FeatureMessage& msg, const std::vector<int>& nominal_channels) {
  if (nominal_channels.size() != msg.scales.size()) {
    throw std::invalid_argument(
        "encode_feature_message: one nominal channel count per scale required");
  }
  const bool half = msg.precision == ValuePrecision::kHalf;
  std::vector<std::uint8_t> out;
  Writer w(&out);
  write_header(w, PayloadKind::kFeatures, msg.sender,
               static_cast<std::uint32_t>(msg.scales.size()),
               half ? 0 : kFlagFloat32);
  for (std::size_t l = 0; l < msg.scales.size(); ++l) {
    const SparseGrid& sg = msg.scales[l];
    if (msg.c0 <= 0 || nominal_channels[l] % msg.c0 != 0) {
      throw std::invalid_argument(
          "encode_feature_message: c0 must divide every nominal channel count");
    }
    const int vpe = nominal_channels[l] / msg.c0;  // values per entry
    if (sg.rows > 0x10000 || sg.cols > 0x10000) {
      throw std::invalid_argument(
          "encode_feature_message: grid dims exceed u16 coordinates");
    }
    w.u16(static_cast<std::uint16_t>(sg.scale));
    w.u16(static_cast<std::uint16_t>(vpe));
    w.u32(static_cast<std::uint32_t>(sg.entries.size()));
    for (const SparseEntry& e : sg.entries) {
      w.u16(e.row);
      w.u16(e.col);
      for (int i = 0; i < vpe; ++i) {
        const float v = i < kEvidenceChannels ? e.values[i] : 0.f;
        if (half) {
          w.u16(float_to_half(v));
        } else {
          w.f32(v);
        }
      }
    }
  }
  return out;
}

FeatureMessage decode_feature_message(const std::vector<std::uint8_t>& bytes,
                                      const Pose2& sender_pose,
                                      const GridSpec* spec) {
  Reader r(bytes);
  const Header h = read_header(r);
  if (h.kind != PayloadKind::kFeatures)
    throw MessageError("malformed message: expected feature payload");
  const bool half = (h.flags & kFlagFloat32) == 0;

  FeatureMessage msg;
  msg.sender = h.sender;
  msg.pose = sender_pose;
  msg.precision = half ? ValuePrecision::kHalf : ValuePrecision::kFloat32;
  for (std::uint32_t l = 0; l < h.count; ++l) {
    SparseGrid sg;
    sg.scale = r.u16();
    const int vpe = r.u16();
    const std::uint32_t n = r.u32();
    if (spec != nullptr) {
      if (sg.scale >= spec->num_scales())
        throw MessageError("malformed message: scale out of range");
      sg.rows = spec->rows_at(sg.scale);
      sg.cols = spec->cols_at(sg.scale);
    }
    sg.entries.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      SparseEntry e;
      e.row = r.u16();
      e.col = r.u16();
      if (spec != nullptr && (e.row >= sg.rows || e.col >= sg.cols)) {
        throw MessageError("malformed message: cell coordinate out of bounds");
      }
      for (int k = 0; k < vpe; ++k) {
        const float v = half ? half_to_float(r.u16()) : r.f32();
        if (k < kEvidenceChannels) e.values[k] = v;
      }
      sg.entries.push_back(e);
    }
    msg.scales.push_back(std::move(sg));
  }
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode_detections(const DetectionMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(detection_message_bytes(msg.boxes.size()));
  Writer w(&out);
  write_header(w, PayloadKind::kDetections, msg.sender,
               static_cast<std::uint32_t>(msg.boxes.size()), 0);
  for (const BevBox& b : msg.boxes) {
    w.f32(static_cast<float>(b.cx));
    w.f32(static_cast<float>(b.cy));
    w.f32(static_cast<float>(b.length));
    w.f32(static_cast<float>(b.width));
    w.f32(static_cast<float>(b.yaw));
    w.f32(static_cast<float>(b.confidence));
  }
  return out;
}

DetectionMessage decode_detections(const std::vector<std::uint8_t>& bytes,
                                   const Pose2& sender_pose) {
  Reader r(bytes);
  const Header h = read_header(r);
  if (h.kind != PayloadKind::kDetections)
    throw MessageError("malformed message: expected detection payload");
  if (r.remaining() != h.count * kBytesPerDetection)
    throw MessageError("malformed message: detection payload size mismatch");

  DetectionMessage msg;
  msg.sender = h.sender;
  msg.pose = sender_pose;
  msg.boxes.reserve(h.count);
  for (std::uint32_t i = 0; i < h.count; ++i) {
    BevBox b;
    b.cx = r.f32();
    b.cy = r.f32();
    b.length = r.f32();
    b.width = r.f32();
    b.yaw = r.f32();
    b.confidence = r.f32();
    b.source_agent = h.sender;
    if (!(b.confidence >= 0.f && b.confidence <= 1.f) || b.length <= 0.f ||
        b.width <= 0.f) {
      throw MessageError("malformed message: invalid detection box");
    }
    msg.boxes.push_back(b);
  }
  r.expect_end();
  return msg;
}

PayloadInfo peek_payload(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const Header h = read_header(r);
  return {h.kind, h.sender};
}

}  // namespace vcpsim
