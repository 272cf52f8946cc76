// BEV rasterization: point density map, the two-channel evidence grid that
// stands in for learned pillar features, and the per-cell confidence map.
#pragma once

#include <cstdint>
#include <vector>

#include "vcpsim/scene.hpp"

namespace vcpsim {

// Cap on points counted per pillar; density is count/kMaxPointsPerPillar.
constexpr int kMaxPointsPerPillar = 32;

// Evidence channels: 0 = clamped density, 1 = foreground point fraction.
constexpr int kEvidenceChannels = 2;

struct GridSpec {
  double x_min = -25.6;
  double x_max = 25.6;
  double y_min = -25.6;
  double y_max = 25.6;
  double cell = 0.4;                    // meters, square cells
  std::vector<int> strides = {1, 2, 4};  // one per scale, ascending

  int base_rows() const;  // along y
  int base_cols() const;  // along x
  int rows_at(int scale) const { return base_rows() / strides.at(scale); }
  int cols_at(int scale) const { return base_cols() / strides.at(scale); }
  int num_scales() const { return static_cast<int>(strides.size()); }

  // Center of a cell at the given scale, in the grid's frame.
  Vec2 cell_center(int scale, int row, int col) const;

  // Base-scale cell index for a point; false when outside the range.
  bool locate(Vec2 p, int* row, int* col) const;

  // Throws std::invalid_argument when dimensions and strides do not divide.
  void validate() const;
};

struct Grid2D {
  int rows = 0;
  int cols = 0;
  std::vector<float> v;  // row-major

  Grid2D() = default;
  Grid2D(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.f) {}
  float& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

using DensityMap = Grid2D;
using ConfidenceMap = Grid2D;

struct DenseGrid {
  int scale = 0;  // index into GridSpec::strides
  int rows = 0;
  int cols = 0;
  int channels = kEvidenceChannels;
  std::vector<float> v;  // row-major, channel-minor

  DenseGrid() = default;
  DenseGrid(int scale_, int r, int c, int ch)
      : scale(scale_),
        rows(r),
        cols(c),
        channels(ch),
        v(static_cast<size_t>(r) * c * ch, 0.f) {}
  float& at(int r, int c, int ch) {
    return v[(static_cast<size_t>(r) * cols + c) * channels + ch];
  }
  float at(int r, int c, int ch) const {
    return v[(static_cast<size_t>(r) * cols + c) * channels + ch];
  }
};

// Per base cell: min(point count, 32) / 32.
DensityMap rasterize_density(const PointCloud& pc, const GridSpec& spec);

// Scale 0 carries (clamped density, foreground fraction); each coarser scale
// is the channel-wise max-pool of the previous one.
std::vector<DenseGrid> build_evidence(const PointCloud& pc,
                                      const GridSpec& spec);

// Per base cell: density channel * foreground-fraction channel.
ConfidenceMap confidence_map(const std::vector<DenseGrid>& evidence);

}  // namespace vcpsim
