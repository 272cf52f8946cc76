#include "vcpsim/pillars.hpp"

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "vcpsim/rng.hpp"

using namespace vcpsim;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.x_min = -3.2;
  g.x_max = 3.2;
  g.y_min = -3.2;
  g.y_max = 3.2;
  g.cell = 0.4;
  g.strides = {1, 2, 4};
  return g;
}

PointCloud cloud_with(int n, double x, double y, ObjectId id) {
  PointCloud pc;
  for (int i = 0; i < n; ++i) pc.points.push_back({x, y, id});
  return pc;
}

}  // namespace

TEST_CASE("GridSpec dimensions and validation") {
  GridSpec g = small_grid();
  g.validate();
  CHECK(g.base_rows() == 16);
  CHECK(g.base_cols() == 16);
  CHECK(g.rows_at(2) == 4);

  GridSpec bad = small_grid();
  bad.x_max = 3.3;  // not a whole number of cells
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = small_grid();
  bad.strides = {1, 3};  // 16 not divisible... 16/3 fails
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = small_grid();
  bad.strides = {2, 4};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("cell_center and locate are inverse-consistent") {
  const GridSpec g = small_grid();
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p{rng.uniform(g.x_min, g.x_max), rng.uniform(g.y_min, g.y_max)};
    int r, c;
    REQUIRE(g.locate(p, &r, &c));
    const Vec2 center = g.cell_center(0, r, c);
    CHECK(std::abs(center.x - p.x) <= g.cell / 2 + 1e-12);
    CHECK(std::abs(center.y - p.y) <= g.cell / 2 + 1e-12);
  }
  int r, c;
  CHECK(!g.locate({g.x_max + 0.1, 0}, &r, &c));
  CHECK(!g.locate({g.x_max, 0}, &r, &c));  // max edge is exclusive
}

TEST_CASE("rasterize_density examples") {
  const GridSpec g = small_grid();

  const DensityMap empty = rasterize_density(PointCloud{}, g);
  for (float v : empty.v) CHECK(v == 0.f);

  // 4 points in one cell -> 4/32.
  const DensityMap four = rasterize_density(cloud_with(4, 0.1, 0.1, 1), g);
  int r, c;
  REQUIRE(g.locate({0.1, 0.1}, &r, &c));
  CHECK(four.at(r, c) == doctest::Approx(0.125));

  // 50 points -> clamped to 1.
  const DensityMap fifty = rasterize_density(cloud_with(50, 0.1, 0.1, 1), g);
  CHECK(fifty.at(r, c) == 1.f);
}

TEST_CASE("density entries are exactly k/32") {
  const GridSpec g = small_grid();
  Rng rng(17);
  PointCloud pc;
  for (int i = 0; i < 500; ++i) {
    pc.points.push_back({rng.uniform(g.x_min, g.x_max),
                         rng.uniform(g.y_min, g.y_max),
                         rng.next_unit() < 0.5 ? kBackground : 1});
  }
  const DensityMap d = rasterize_density(pc, g);
  for (float v : d.v) {
    const float scaled = v * 32.f;
    CHECK(scaled == std::round(scaled));
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
}

TEST_CASE("build_evidence channels and max-pool pyramid") {
  const GridSpec g = small_grid();

  // Empty cloud -> zero grids at all scales.
  const auto zero = build_evidence(PointCloud{}, g);
  REQUIRE(zero.size() == 3);
  for (const DenseGrid& grid : zero) {
    for (float v : grid.v) CHECK(v == 0.f);
  }

  // One cell with 32 foreground points -> (1,1) at scale 0 and its parent.
  const auto hot = build_evidence(cloud_with(32, 0.1, 0.1, 7), g);
  int r, c;
  REQUIRE(g.locate({0.1, 0.1}, &r, &c));
  CHECK(hot[0].at(r, c, 0) == 1.f);
  CHECK(hot[0].at(r, c, 1) == 1.f);
  CHECK(hot[1].at(r / 2, c / 2, 0) == 1.f);
  CHECK(hot[1].at(r / 2, c / 2, 1) == 1.f);
  CHECK(hot[2].at(r / 4, c / 4, 0) == 1.f);

  // Two adjacent cells sharing a scale-1 parent pool channel-wise.
  PointCloud pc;
  // Cell A at (0.1, 0.1): 16 points, all foreground -> (0.5, 1.0).
  for (int i = 0; i < 16; ++i) pc.points.push_back({0.1, 0.1, 3});
  // Cell B at (0.5, 0.1): 8 points, all background -> (0.25, 0.0).
  for (int i = 0; i < 8; ++i) pc.points.push_back({0.5, 0.1, kBackground});
  const auto ev = build_evidence(pc, g);
  int ra, ca, rb, cb;
  REQUIRE(g.locate({0.1, 0.1}, &ra, &ca));
  REQUIRE(g.locate({0.5, 0.1}, &rb, &cb));
  REQUIRE(ra / 2 == rb / 2);
  REQUIRE(ca / 2 == cb / 2);
  CHECK(ev[0].at(ra, ca, 0) == 0.5f);
  CHECK(ev[0].at(ra, ca, 1) == 1.f);
  CHECK(ev[0].at(rb, cb, 0) == 0.25f);
  CHECK(ev[0].at(rb, cb, 1) == 0.f);
  CHECK(ev[1].at(ra / 2, ca / 2, 0) == 0.5f);
  CHECK(ev[1].at(ra / 2, ca / 2, 1) == 1.f);
}

TEST_CASE("every coarse cell equals the channel-wise max of its children") {
  const GridSpec g = small_grid();
  Rng rng(23);
  PointCloud pc;
  for (int i = 0; i < 800; ++i) {
    pc.points.push_back({rng.uniform(g.x_min, g.x_max),
                         rng.uniform(g.y_min, g.y_max),
                         rng.next_unit() < 0.4 ? kBackground : 2});
  }
  const auto ev = build_evidence(pc, g);
  for (std::size_t l = 1; l < ev.size(); ++l) {
    const DenseGrid& coarse = ev[l];
    const DenseGrid& fine = ev[l - 1];
    const int ratio = g.strides[l] / g.strides[l - 1];
    for (int r = 0; r < coarse.rows; ++r) {
      for (int c = 0; c < coarse.cols; ++c) {
        for (int ch = 0; ch < kEvidenceChannels; ++ch) {
          float m = 0.f;
          for (int dr = 0; dr < ratio; ++dr) {
            for (int dc = 0; dc < ratio; ++dc) {
              m = std::max(m, fine.at(r * ratio + dr, c * ratio + dc, ch));
            }
          }
          CHECK(coarse.at(r, c, ch) == m);
        }
      }
    }
  }
}

TEST_CASE("confidence_map is the channel product and bounded by density") {
  const GridSpec g = small_grid();

  const auto zero = build_evidence(PointCloud{}, g);
  const ConfidenceMap cz = confidence_map(zero);
  for (float v : cz.v) CHECK(v == 0.f);

  // Full cell: confidence 1.
  const auto hot = build_evidence(cloud_with(32, 0.1, 0.1, 7), g);
  int r, c;
  REQUIRE(g.locate({0.1, 0.1}, &r, &c));
  CHECK(confidence_map(hot).at(r, c) == 1.f);

  // 16 points, half foreground: (0.5, 0.5) -> 0.25.
  PointCloud pc;
  for (int i = 0; i < 8; ++i) pc.points.push_back({0.1, 0.1, 4});
  for (int i = 0; i < 8; ++i) pc.points.push_back({0.1, 0.1, kBackground});
  const auto ev = build_evidence(pc, g);
  CHECK(ev[0].at(r, c, 0) == 0.5f);
  CHECK(ev[0].at(r, c, 1) == 0.5f);
  CHECK(confidence_map(ev).at(r, c) == 0.25f);

  // Random cloud: confidence <= density channel pointwise.
  Rng rng(29);
  PointCloud rand_pc;
  for (int i = 0; i < 600; ++i) {
    rand_pc.points.push_back({rng.uniform(g.x_min, g.x_max),
                              rng.uniform(g.y_min, g.y_max),
                              rng.next_unit() < 0.5 ? kBackground : 5});
  }
  const auto rev = build_evidence(rand_pc, g);
  const ConfidenceMap conf = confidence_map(rev);
  for (int rr = 0; rr < conf.rows; ++rr) {
    for (int cc = 0; cc < conf.cols; ++cc) {
      CHECK(conf.at(rr, cc) <= rev[0].at(rr, cc, 0) + 1e-7f);
    }
  }
}
