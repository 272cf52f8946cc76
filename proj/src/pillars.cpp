#include "vcpsim/pillars.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vcpsim {

namespace {

int span_cells(double lo, double hi, double cell) {
  return static_cast<int>(std::llround((hi - lo) / cell));
}

}  // namespace

int GridSpec::base_rows() const { return span_cells(y_min, y_max, cell); }
int GridSpec::base_cols() const { return span_cells(x_min, x_max, cell); }

Vec2 GridSpec::cell_center(int scale, int row, int col) const {
  const double size = cell * strides.at(scale);
  return {x_min + (col + 0.5) * size, y_min + (row + 0.5) * size};
}

bool GridSpec::locate(Vec2 p, int* row, int* col) const {
  if (p.x < x_min || p.x >= x_max || p.y < y_min || p.y >= y_max) return false;
  *col = static_cast<int>((p.x - x_min) / cell);
  *row = static_cast<int>((p.y - y_min) / cell);
  *col = std::clamp(*col, 0, base_cols() - 1);
  *row = std::clamp(*row, 0, base_rows() - 1);
  return true;
}

void GridSpec::validate() const {
  if (cell <= 0.0) throw std::invalid_argument("GridSpec: cell must be > 0");
  if (x_max <= x_min || y_max <= y_min)
    throw std::invalid_argument("GridSpec: empty range");
  const double eps = 1e-9;
  if (std::abs((x_max - x_min) / cell - base_cols()) > eps ||
      std::abs((y_max - y_min) / cell - base_rows()) > eps) {
    throw std::invalid_argument("GridSpec: range is not a whole number of cells");
  }
  if (strides.empty() || strides.front() != 1)
    throw std::invalid_argument("GridSpec: strides must start at 1");
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (strides[i] <= 0)
      throw std::invalid_argument("GridSpec: strides must be positive");
    if (base_rows() % strides[i] != 0 || base_cols() % strides[i] != 0)
      throw std::invalid_argument("GridSpec: stride does not divide grid dims");
    if (i > 0 && strides[i] % strides[i - 1] != 0)
      throw std::invalid_argument("GridSpec: each stride must divide the next");
  }
}

DensityMap rasterize_density(const PointCloud& pc, const GridSpec& spec) {
  const int rows = spec.base_rows(), cols = spec.base_cols();
  std::vector<int> counts(static_cast<size_t>(rows) * cols, 0);
  for (const LidarPoint& p : pc.points) {
    int r, c;
    if (spec.locate({p.x, p.y}, &r, &c)) {
      ++counts[static_cast<size_t>(r) * cols + c];
    }
  }
  DensityMap out(rows, cols);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out.v[i] = static_cast<float>(std::min(counts[i], kMaxPointsPerPillar)) /
               static_cast<float>(kMaxPointsPerPillar);
  }
  return out;
}

std::vector<DenseGrid> build_evidence(const PointCloud& pc,
                                      const GridSpec& spec) {
  const int rows = spec.base_rows(), cols = spec.base_cols();
  std::vector<int> total(static_cast<size_t>(rows) * cols, 0);
  std::vector<int> foreground(total.size(), 0);
  for (const LidarPoint& p : pc.points) {
    int r, c;
    if (!spec.locate({p.x, p.y}, &r, &c)) continue;
    const std::size_t idx = static_cast<size_t>(r) * cols + c;
    ++total[idx];
    if (p.object_id != kBackground) ++foreground[idx];
  }

  std::vector<DenseGrid> grids;
  grids.reserve(spec.num_scales());
  DenseGrid base(0, rows, cols, kEvidenceChannels);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t idx = static_cast<size_t>(r) * cols + c;
      base.at(r, c, 0) =
          static_cast<float>(std::min(total[idx], kMaxPointsPerPillar)) /
          static_cast<float>(kMaxPointsPerPillar);
      base.at(r, c, 1) =
          total[idx] > 0 ? static_cast<float>(foreground[idx]) /
                               static_cast<float>(total[idx])
                         : 0.f;
    }
  }
  grids.push_back(std::move(base));

  for (int scale = 1; scale < spec.num_scales(); ++scale) {
    const int ratio = spec.strides[scale] / spec.strides[scale - 1];
    const DenseGrid& prev = grids.back();
    DenseGrid pooled(scale, prev.rows / ratio, prev.cols / ratio,
                     kEvidenceChannels);
    for (int r = 0; r < pooled.rows; ++r) {
      for (int c = 0; c < pooled.cols; ++c) {
        for (int ch = 0; ch < kEvidenceChannels; ++ch) {
          float m = 0.f;
          for (int dr = 0; dr < ratio; ++dr) {
            for (int dc = 0; dc < ratio; ++dc) {
              m = std::max(m, prev.at(r * ratio + dr, c * ratio + dc, ch));
            }
          }
          pooled.at(r, c, ch) = m;
        }
      }
    }
    grids.push_back(std::move(pooled));
  }
  return grids;
}

ConfidenceMap confidence_map(const std::vector<DenseGrid>& evidence) {
  if (evidence.empty()) return {};
  const DenseGrid& base = evidence.front();
  ConfidenceMap out(base.rows, base.cols);
  for (int r = 0; r < base.rows; ++r) {
    for (int c = 0; c < base.cols; ++c) {
      out.at(r, c) = base.at(r, c, 0) * base.at(r, c, 1);
    }
  }
  return out;
}

}  // namespace vcpsim
