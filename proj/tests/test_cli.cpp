#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "inrgan/config.hpp"

using namespace inrgan;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& name, const nlohmann::json& j) {
  const auto p = fs::temp_directory_path() / ("inrgan_cfg_" + name + ".json");
  std::ofstream(p) << j.dump();
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(INRGAN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void expect_error(const nlohmann::json& j, const std::string& fragment) {
  try {
    parse_config(j);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("empty config yields the published defaults") {
  auto c = parse_config(nlohmann::json::object());
  CHECK(c.train.lr == 1e-4);
  CHECK(c.train.batch_size == 8);
  CHECK(c.train.lambda_rec == 100.0);
  CHECK(c.train.generator.frequencies == 6);
  CHECK(c.train.epochs == 60);
  CHECK(c.train.generator.mlp.input_width == 25);
  CHECK(c.train.precision == 32);
  CHECK(c.deterministic);
}

TEST_CASE("validation names the offending key") {
  expect_error({{"model", {{"grid", {3, 3}}}}, {"train", {{"crop", {64, 64}}}}}, "'model.grid' 3x3 does not divide 'train.crop' 64x64");
  expect_error({{"train", {{"lr", -1.0}}}}, "lr");
  expect_error({{"train", {{"lambda_rec", -2.0}}}}, "lambda_rec");
  expect_error({{"train", {{"epochs", "ten"}}}}, "train.epochs");
  expect_error({{"trian", {}}}, "trian");
  expect_error({{"model", {{"mlp", {{"widht", 3}}}}}}, "model.mlp.widht");
  expect_error({{"precision", 16}}, "precision");
}

TEST_CASE("overrides take precedence over the file") {
  auto path = write_config("precedence", {{"train", {{"epochs", 60}, {"lr", 3e-4}}}});
  auto c = resolve_config(path, {{"train", {{"epochs", 2}}}});
  CHECK(c.train.epochs == 2);
  CHECK(c.train.lr == 3e-4);
  fs::remove(path);
}

TEST_CASE("resolved config round trips") {
  auto c = parse_config({{"seed", 9},
                         {"model", {{"grid", {4, 4}}, {"discriminator", {{"channels", {8, 16, 32, 32}}}}}},
                         {"train", {{"crop", {64, 64}}, {"epochs", 3}}},
                         {"sweep", {{"grids", {{1, 1}, {4, 4}}}}}});
  auto again = parse_config(to_json(c));
  CHECK(to_json(again) == to_json(c));
  CHECK(again.train.seed == 9);
  CHECK(again.train.generator.grid == PatchGridSpec{4, 4});
  CHECK(again.sweep_grids.size() == 2);
}

TEST_CASE("cli exit codes and run directory") {
  const auto dir = fs::temp_directory_path() / "inrgan_cli_test";
  fs::remove_all(dir);
  auto cfg = write_config("cli", {{"data", {{"synth", {{"train_count", 3}, {"test_count", 2}}}}}});
  CHECK(run_cli("gen-data --config " + cfg.string() + " --out-dir " + dir.string()) == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "previews"));

  // rerun from the resolved config reproduces the data
  const auto again = dir / "again";
  CHECK(run_cli("gen-data --config " + (dir / "config.json").string() + " --out-dir " + again.string()) == 0);
  std::ifstream a(dir / "synth_train_00000_source_c0.raw", std::ios::binary),
      b(again / "synth_train_00000_source_c0.raw", std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

  auto bad = write_config("bad", {{"model", {{"grid", {3, 3}}}}, {"train", {{"crop", {64, 64}}}}});
  CHECK(run_cli("train --config " + bad.string() + " --out-dir " + (dir / "bad").string()) == 1);
  CHECK(run_cli("train --precision 16") == 1);
  CHECK(run_cli("nonsense") == 1);
  CHECK(run_cli("evaluate --checkpoint /nonexistent/ck.bin") == 1);

  std::ofstream(dir / "broken.bin") << "garbage";
  CHECK(run_cli("evaluate --checkpoint " + (dir / "broken.bin").string()) == 2);
  CHECK(run_cli("grad-check") == 0);
  fs::remove_all(dir);
  fs::remove(cfg);
  fs::remove(bad);
}
