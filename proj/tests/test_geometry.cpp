#include <doctest.h>

#include <cmath>
#include <set>

#include "inrgan/geometry.hpp"
#include "inrgan/rng.hpp"

using namespace inrgan;

TEST_CASE("coordinate grid corners and spacing") {
  auto g2 = make_coord_grid(2, 2);
  CHECK(g2.storage() == std::vector<double>{0, 0, 0, 1, 1, 0, 1, 1});
  auto g3 = make_coord_grid(3, 1);
  CHECK(g3[0] == 0.0);
  CHECK(g3[2] == 0.5);
  CHECK(g3[4] == 1.0);
  CHECK(g3[1] == 0.0);  // single-pixel axis maps to 0
  CHECK_THROWS(make_coord_grid(0, 4));
}

TEST_CASE("160x128 grid has 20480 distinct coordinate pairs") {
  auto g = make_coord_grid(160, 128);
  std::set<std::pair<double, double>> seen;
  for (std::int64_t i = 0; i < 160 * 128; ++i) seen.insert({g[2 * i], g[2 * i + 1]});
  CHECK(seen.size() == 20480);
  CHECK(g[2 * (160 * 128 - 1)] == 1.0);
  CHECK(g[2 * (160 * 128 - 1) + 1] == 1.0);
}

TEST_CASE("encoding ladder values") {
  double out[6];
  encode_scalar(0.0, 3, out);
  for (int k = 0; k < 3; ++k) {
    CHECK(out[2 * k] == 0.0);
    CHECK(out[2 * k + 1] == 1.0);
  }
  encode_scalar(0.5, 1, out);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(0.0));
  encode_scalar(0.25, 3, out);
  const double expected[6] = {std::sqrt(0.5), std::sqrt(0.5), 1.0, 0.0, 0.0, -1.0};
  for (int k = 0; k < 6; ++k) CHECK(out[k] == doctest::Approx(expected[k]).epsilon(1e-12));
}

TEST_CASE("positional encoding layout, range and injectivity") {
  const int h = 48, w = 40, i = 6;
  auto enc = positional_encode(make_coord_grid(h, w), i);
  REQUIRE(enc.feature_width() == 24);
  CHECK(enc.features.shape() == Shape{h, w, 24});
  for (auto v : enc.features.values()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  // row ladder then column ladder
  double row[12], col[12];
  encode_scalar(7.0 / (h - 1), i, row);
  encode_scalar(3.0 / (w - 1), i, col);
  const double* f = enc.at(7, 3);
  for (int k = 0; k < 12; ++k) {
    CHECK(f[k] == row[k]);
    CHECK(f[12 + k] == col[k]);
  }
  std::set<std::vector<double>> distinct;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) distinct.insert(std::vector<double>(enc.at(r, c), enc.at(r, c) + 24));
  CHECK(distinct.size() == static_cast<std::size_t>(h * w));
}

TEST_CASE("partition examples") {
  auto m = partition(160, 128, {40, 32});
  CHECK(m.patch_height() == 4);
  CHECK(m.patch_width() == 4);
  CHECK(m.owner(159, 127) == std::pair{39, 31});
  auto one = partition(12, 8, {1, 1});
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 8; ++c) CHECK(one.owner_index(r, c) == 0);
  CHECK_THROWS(partition(10, 8, {3, 2}));
}

TEST_CASE("partition is exact over random extents and divisors") {
  Rng rng(29);
  std::uniform_int_distribution<int> d(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const int mr = d(rng), nc = d(rng), ph = d(rng), pw = d(rng);
    const int h = mr * ph, w = nc * pw;
    auto map = partition(h, w, {mr, nc});
    std::vector<int> count(static_cast<std::size_t>(h * w), 0);
    for (int cell = 0; cell < map.cells(); ++cell) {
      const int pr = cell / nc, pc = cell % nc;
      auto [r0, r1] = map.row_range(pr);
      auto [c0, c1] = map.col_range(pc);
      CHECK(r0 == pr * h / mr);
      CHECK(c1 == (pc + 1) * w / nc);
      for (int k = 0; k < map.pixels_per_patch(); ++k) {
        const auto off = map.pixel_offset(cell, k);
        const int r = static_cast<int>(off / w), c = static_cast<int>(off % w);
        CHECK(r >= r0);
        CHECK(r < r1);
        CHECK(c >= c0);
        CHECK(c < c1);
        CHECK(map.owner_index(r, c) == cell);
        ++count[static_cast<std::size_t>(off)];
      }
    }
    for (int v : count) CHECK(v == 1);
    for (std::size_t k = 0; k < map.patch_order().size(); ++k) {
      CHECK(map.image_order()[static_cast<std::size_t>(map.patch_order()[k])] == static_cast<std::int64_t>(k));
    }
  }
}
