#include <doctest.h>

#include <filesystem>

#include "inrgan/probes.hpp"
#include "test_util.hpp"

using namespace inrgan;
namespace fs = std::filesystem;
using test::random_image;

namespace {

TrainConfig probe_config(PatchGridSpec grid) {
  TrainConfig cfg;
  cfg.generator.height = 32;
  cfg.generator.width = 32;
  cfg.generator.grid = grid;
  cfg.generator.frequencies = 2;
  cfg.generator.mlp = {9, 8, 3, 1, 0.2};
  cfg.generator.hyper.base_channels = 4;
  cfg.generator.hyper.max_channels = 8;
  cfg.generator.hyper.trunk_channels = 8;
  cfg.generator.hyper.trunk_blocks = 2;
  cfg.generator.hyper.head_scale = 1.0;
  cfg.discriminator.channels = {4, 6, 8, 8};
  cfg.epochs = 1;
  cfg.batch_size = 4;
  return cfg;
}

Model untrained_model(PatchGridSpec grid, std::uint64_t seed) {
  Model m;
  m.config = probe_config(grid);
  m.generator_params = init_generator_params<float>(m.config.generator, seed);
  m.disc_params = init_disc_params<float>(m.config.discriminator, seed);
  return m;
}

std::vector<SamplePair> tiny_set(int n, std::uint64_t seed) {
  SynthConfig sc;
  sc.height = 32;
  sc.width = 32;
  sc.train_count = n;
  sc.test_count = 4;
  sc.radius_min = 2.5;
  sc.radius_max = 4.0;
  sc.seed = seed;
  return synth_dataset(sc).samples;
}

}  // namespace

TEST_CASE("probe output equals the full forward on the probed patch, for every cell") {
  auto model = untrained_model({4, 4}, 1);
  Rng rng(1);
  auto src = random_image(1, 32, 32, rng);
  auto full = generator_forward(src, model.generator_params, model.config.generator);
  auto map = partition(32, 32, {4, 4});
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      auto probe = probe_single_mlp(model, src, r, c);
      auto [r0, r1] = map.row_range(r);
      auto [c0, c1] = map.col_range(c);
      for (int y = r0; y < r1; ++y)
        for (int x = c0; x < c1; ++x) CHECK(probe.at(0, y, x) == full.at(0, y, x));
    }
  CHECK_THROWS_AS(probe_single_mlp(model, src, 4, 0), std::out_of_range);
  CHECK_THROWS_AS(probe_single_mlp(model, src, 0, -1), std::out_of_range);
}

TEST_CASE("probing a 1x1 model reproduces the full output") {
  auto model = untrained_model({1, 1}, 2);
  Rng rng(2);
  auto src = random_image(1, 32, 32, rng);
  CHECK(probe_single_mlp(model, src, 0, 0) == generator_forward(src, model.generator_params, model.config.generator));
}

TEST_CASE("probe cell selection by source variance") {
  Image src(1, 16, 16, -1.0f);
  Rng rng(3);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int y = 8; y < 12; ++y)
    for (int x = 4; x < 8; ++x) src.at(0, y, x) = u(rng);
  for (int y = 0; y < 16; ++y) src.at(0, y, 15) = 0.05f * static_cast<float>(y % 2);
  auto cells = select_probe_cells(src, partition(16, 16, {4, 4}));
  CHECK(cells.foreground == std::pair{2, 1});
  CHECK(cells.background == std::pair{0, 0});
  Image flat(1, 2, 2);
  flat.data = {1, 2, 3, 4};
  CHECK(image_variance(flat) == doctest::Approx(1.25));
}

TEST_CASE("probe experiment bookkeeping") {
  auto model = untrained_model({4, 4}, 4);
  auto data = tiny_set(1, 4);
  auto ex = run_probe_experiment(model, data[0]);
  auto [s, t] = center_crop(data[0].source, data[0].target, model.config);
  CHECK(ex.full_output == generator_forward(s, model.generator_params, model.config.generator));
  CHECK(ex.full_mse == mse(ex.full_output, t));
  CHECK(ex.full_variance == image_variance(ex.full_output));
  CHECK(ex.foreground.mse == mse(ex.foreground.output, t));
  CHECK(ex.background.variance == image_variance(ex.background.output));
  auto chosen = select_probe_cells(s, partition(32, 32, {4, 4}));
  CHECK(ex.foreground.cell == chosen.foreground);
  CHECK(ex.background.cell == chosen.background);
}

TEST_CASE("sweep mlp sizes") {
  CHECK(sweep_mlp_spec({1, 1}, 25) == MlpSpec{25, 128, 8, 1, 0.2});
  CHECK(sweep_mlp_spec({8, 8}, 25) == MlpSpec{25, 64, 5, 1, 0.2});
}

TEST_CASE("grid sweep rows, comparisons, files and reproducibility") {
  auto base = probe_config({1, 1});
  base.generator.mlp = {9, 8, 3, 1, 0.2};
  auto data = tiny_set(8, 5);
  auto train_set = filter_split(data, "train");
  auto test_set = filter_split(data, "test");
  SUBCASE("single global row") {
    auto table = grid_sweep(base, {{1, 1}}, train_set, test_set);
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].vs_global.empty());
  }
  SUBCASE("two grids") {
    const auto dir = fs::temp_directory_path() / "inrgan_sweep_test";
    fs::remove_all(dir);
    auto a = grid_sweep(base, {{1, 1}, {4, 4}}, train_set, test_set, dir);
    REQUIRE(a.rows.size() == 2);
    CHECK(a.rows[1].grid == PatchGridSpec{4, 4});
    CHECK(a.rows[1].vs_global.size() == 3);
    CHECK(a.rows[0].report.count() == test_set.size());
    CHECK(fs::exists(dir / "grid_4x4" / "checkpoint.bin"));
    CHECK(fs::exists(dir / "grid_1x1" / "history.csv"));
    auto b = grid_sweep(base, {{1, 1}, {4, 4}}, train_set, test_set);
    CHECK(a.to_csv() == b.to_csv());
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.rows[i].history == b.rows[i].history);
    CHECK(a.to_json()["rows"].size() == 2);
    fs::remove_all(dir);
  }
}
