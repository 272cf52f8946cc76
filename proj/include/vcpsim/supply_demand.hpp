// Collaboration region selection: demand mask from point density, supply
// mask from foreground confidence, their combination, and sparse feature
// extraction under the combined mask.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vcpsim/pillars.hpp"

namespace vcpsim {

struct BinaryMask {
  int scale = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> v;  // row-major, 0/1

  BinaryMask() = default;
  BinaryMask(int scale_, int r, int c)
      : scale(scale_), rows(r), cols(c), v(static_cast<size_t>(r) * c, 0) {}
  std::uint8_t& at(int r, int c) {
    return v[static_cast<size_t>(r) * cols + c];
  }
  std::uint8_t at(int r, int c) const {
    return v[static_cast<size_t>(r) * cols + c];
  }
  std::size_t true_count() const;
};

BinaryMask full_mask(int rows, int cols, bool value);

// Cell is demanded iff density < eps_a (strict).
BinaryMask demand_mask(const DensityMap& density, double eps_a);

// Cell is supplied iff confidence > eps_c (strict).
BinaryMask supply_mask(const ConfidenceMap& conf, double eps_c);

// Element-wise AND; throws std::invalid_argument on dimension mismatch.
BinaryMask selection_mask(const BinaryMask& demand_of_ego,
                          const BinaryMask& supply_of_sender);

// Resamples a base-scale mask from src_pose's frame into dst_pose's frame:
// each destination cell looks up the source cell its center falls in; cells
// mapping outside the source range come out false.
BinaryMask warp_mask(const BinaryMask& src, const Pose2& src_pose,
                     const Pose2& dst_pose, const GridSpec& spec);

struct SparseEntry {
  std::uint16_t row = 0;
  std::uint16_t col = 0;
  std::array<float, kEvidenceChannels> values = {0.f, 0.f};
};

struct SparseGrid {
  int scale = 0;
  int rows = 0;
  int cols = 0;
  std::vector<SparseEntry> entries;  // sorted by (row, col)
};

// Applies a base-scale mask to every scale. The mask is downsampled to each
// scale by logical-OR pooling over stride x stride blocks, so a coarse cell
// is kept iff at least one of its base descendants is selected. Entries are
// stored sorted by (row, col).
std::vector<SparseGrid> select_sparse(const std::vector<DenseGrid>& evidence,
                                      const BinaryMask& mask,
                                      const GridSpec& spec);

// OR-pool of a base mask down to the given scale (exposed for tests).
BinaryMask or_pool(const BinaryMask& base, int scale, const GridSpec& spec);

}  // namespace vcpsim
