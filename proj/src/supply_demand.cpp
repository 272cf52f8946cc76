#include "vcpsim/supply_demand.hpp"

#include <numeric>
#include <stdexcept>

namespace vcpsim {

std::size_t BinaryMask::true_count() const {
  return std::accumulate(v.begin(), v.end(), std::size_t{0});
}

BinaryMask full_mask(int rows, int cols, bool value) {
  BinaryMask m(0, rows, cols);
  if (value) std::fill(m.v.begin(), m.v.end(), std::uint8_t{1});
  return m;
}

BinaryMask demand_mask(const DensityMap& density, double eps_a) {
  if (eps_a <= 0.0 || eps_a > 1.0) {
    throw std::invalid_argument("demand_mask: eps_a must be in (0,1]");
  }
  BinaryMask m(0, density.rows, density.cols);
  for (std::size_t i = 0; i < density.v.size(); ++i) {
    m.v[i] = density.v[i] < eps_a ? 1 : 0;
  }
  return m;
}

BinaryMask supply_mask(const ConfidenceMap& conf, double eps_c) {
  if (eps_c < 0.0 || eps_c > 1.0) {
    throw std::invalid_argument("supply_mask: eps_c must be in [0,1]");
  }
  BinaryMask m(0, conf.rows, conf.cols);
  for (std::size_t i = 0; i < conf.v.size(); ++i) {
    m.v[i] = conf.v[i] > eps_c ? 1 : 0;
  }
  return m;
}

BinaryMask selection_mask(const BinaryMask& demand_of_ego,
                          const BinaryMask& supply_of_sender) {
  if (demand_of_ego.rows != supply_of_sender.rows ||
      demand_of_ego.cols != supply_of_sender.cols ||
      demand_of_ego.scale != supply_of_sender.scale) {
    throw std::invalid_argument("selection_mask: mask dimensions differ");
  }
  BinaryMask m(demand_of_ego.scale, demand_of_ego.rows, demand_of_ego.cols);
  for (std::size_t i = 0; i < m.v.size(); ++i) {
    m.v[i] = demand_of_ego.v[i] & supply_of_sender.v[i];
  }
  return m;
}

BinaryMask warp_mask(const BinaryMask& src, const Pose2& src_pose,
                     const Pose2& dst_pose, const GridSpec& spec) {
  const Pose2 dst_to_src = compose(inverse(src_pose), dst_pose);
  BinaryMask out(src.scale, src.rows, src.cols);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      const Vec2 p = transform_point(dst_to_src, spec.cell_center(src.scale, r, c));
      int sr, sc;
      if (spec.locate(p, &sr, &sc)) {
        out.at(r, c) = src.at(sr, sc);
      }
    }
  }
  return out;
}

BinaryMask or_pool(const BinaryMask& base, int scale, const GridSpec& spec) {
  if (base.scale != 0) {
    throw std::invalid_argument("or_pool: expected a base-scale mask");
  }
  const int stride = spec.strides.at(scale);
  BinaryMask out(scale, base.rows / stride, base.cols / stride);
  for (int r = 0; r < base.rows; ++r) {
    for (int c = 0; c < base.cols; ++c) {
      if (base.at(r, c)) out.at(r / stride, c / stride) = 1;
    }
  }
  return out;
}

std::vector<SparseGrid> select_sparse(const std::vector<DenseGrid>& evidence,
                                      const BinaryMask& mask,
                                      const GridSpec& spec) {
  if (mask.scale != 0) {
    throw std::invalid_argument("select_sparse: mask must be base scale");
  }
  std::vector<SparseGrid> out;
  out.reserve(evidence.size());
  for (const DenseGrid& grid : evidence) {
    const BinaryMask pooled =
        grid.scale == 0 ? mask : or_pool(mask, grid.scale, spec);
    SparseGrid sg;
    sg.scale = grid.scale;
    sg.rows = grid.rows;
    sg.cols = grid.cols;
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        if (!pooled.at(r, c)) continue;
        SparseEntry e;
        e.row = static_cast<std::uint16_t>(r);
        e.col = static_cast<std::uint16_t>(c);
        for (int ch = 0; ch < kEvidenceChannels; ++ch) {
          e.values[ch] = grid.at(r, c, ch);
        }
        sg.entries.push_back(e);
      }
    }
    out.push_back(std::move(sg));
  }
  return out;
}

}  // namespace vcpsim
