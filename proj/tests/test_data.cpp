#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "inrgan/data.hpp"
#include "test_util.hpp"

using namespace inrgan;
namespace fs = std::filesystem;

namespace {

Scene head_only(int h, int w) {
  Scene s;
  s.height = h;
  s.width = w;
  s.head = {h / 2.0, w / 2.0, 0.42 * h, 0.38 * w, 0.1};
  s.tissue_fy = 1.0;
  s.tissue_fx = 0.7;
  return s;
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("inrgan_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

SynthConfig small_synth(int train = 6, int test = 2) {
  SynthConfig cfg;
  cfg.train_count = train;
  cfg.test_count = test;
  return cfg;
}

}  // namespace

TEST_CASE("scenes without enhancing lesions leave the target equal to the source") {
  SynthConfig cfg;
  Scene s = head_only(64, 64);
  auto empty = render_scene(s, cfg, 3);
  CHECK(empty.target == empty.source);
  s.lesions.push_back({30, 30, 8, 6, 0.3, false});
  auto flat = render_scene(s, cfg, 3);
  CHECK(flat.target == flat.source);
}

TEST_CASE("one enhancing lesion matches the analytic difference oracle") {
  SynthConfig cfg;
  cfg.noise_level = 0.0;
  cfg.enhancement_gain = 0.5;
  Scene s = head_only(64, 64);
  Ellipse e{32, 30, 9, 7, 0.4, true, 0.6, 1.1};
  s.lesions.push_back(e);
  auto pair = render_scene(s, cfg, 0);
  const double rim_band = 1.0 - cfg.rim_width / std::min(e.rx, e.ry);
  int inside = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const double diff = static_cast<double>(pair.target.at(0, r, c)) - pair.source.at(0, r, c);
      const double rho = e.radius_at(r, c);
      if (rho > 1.0) {
        CHECK(diff == 0.0);
        continue;
      }
      ++inside;
      const double gain = rho > rim_band ? cfg.rim_gain : cfg.enhancement_gain;
      const double expected = std::min(1.0, static_cast<double>(pair.source.at(0, r, c)) + gain) - pair.source.at(0, r, c);
      CHECK(diff > 0.0);
      CHECK(diff == doctest::Approx(expected).epsilon(1e-6));
    }
  CHECK(inside > 100);
}

TEST_CASE("class-A interior mask excludes the rim band") {
  SynthConfig cfg;
  Scene s = head_only(64, 64);
  Ellipse a{24, 24, 8, 6, 0.2, true, 0.6, 1.1};
  Ellipse b{44, 40, 6, 6, 0.0, false};
  s.lesions = {a, b};
  const auto m = scene_masks(s, cfg);
  const double band = 1.0 - cfg.rim_width / 6.0;
  int interior = 0, rim = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const std::size_t p = static_cast<std::size_t>(r * 64 + c);
      const double rho = a.radius_at(r, c);
      CHECK(m.class_a[p] == (rho <= 1.0 ? 1 : 0));
      CHECK(m.class_a_interior[p] == (rho <= band ? 1 : 0));
      CHECK(m.class_b[p] == (b.radius_at(r, c) <= 1.0 ? 1 : 0));
      if (m.class_a_interior[p]) CHECK(m.class_a[p] == 1);
      interior += m.class_a_interior[p];
      rim += m.class_a[p] && !m.class_a_interior[p];
    }
  CHECK(interior > 20);
  CHECK(rim > 20);
}

TEST_CASE("both lesion classes share one mean intensity") {
  auto ds = synth_dataset(small_synth(24, 0));
  int a_count = 0, b_count = 0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& scene = ds.scenes[i];
    const auto masks = scene_masks(scene);
    double a = 0, b = 0;
    int na = 0, nb = 0;
    for (std::size_t p = 0; p < masks.class_a.size(); ++p) {
      if (masks.class_a[p]) a += ds.samples[i].source.data[p], ++na;
      if (masks.class_b[p]) b += ds.samples[i].source.data[p], ++nb;
    }
    if (na) CHECK(std::abs(a / na - SynthConfig{}.lesion_level) < 1e-6);
    if (nb) CHECK(std::abs(b / nb - SynthConfig{}.lesion_level) < 1e-6);
    a_count += na > 0;
    b_count += nb > 0;
  }
  CHECK(a_count > 0);
  CHECK(b_count > 0);
}

TEST_CASE("generated samples respect extents, range and divisibility") {
  auto cfg = small_synth();
  auto ds = synth_dataset(cfg);
  REQUIRE(ds.samples.size() == 8);
  for (const auto& s : ds.samples) {
    CHECK(s.source.same_extent(s.target));
    for (auto [m, n] : cfg.grid_divisors) {
      CHECK(s.source.height % m == 0);
      CHECK(s.source.width % n == 0);
    }
    for (float v : s.target.data) CHECK(std::abs(v) <= 1.0f);
  }
  CHECK(ds.samples[0].id == "synth_train_00000");
  CHECK(ds.samples[6].split == "test");
  SynthConfig bad = cfg;
  bad.height = 60;
  bad.grid_divisors = {{8, 8}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("generation is a pure function of the config") {
  auto a = synth_dataset(small_synth());
  auto b = synth_dataset(small_synth());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].source == b.samples[i].source);
    CHECK(a.samples[i].target == b.samples[i].target);
  }
  auto cfg = small_synth();
  cfg.seed = 2;
  CHECK_FALSE(synth_dataset(cfg).samples[0].source == a.samples[0].source);
}

TEST_CASE("synth config json") {
  auto cfg = small_synth();
  cfg.stripe_period = 5.0;
  CHECK(to_json(synth_config_from_json(to_json(cfg))) == to_json(cfg));
  auto j = to_json(cfg);
  j["bogus"] = 1;
  try {
    synth_config_from_json(j);
    FAIL("expected failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("min-max normalization") {
  Image raw(1, 1, 3);
  raw.data = {0.0f, 50.0f, 100.0f};
  auto n = normalize_intensity(raw);
  CHECK(n.data == std::vector<float>{-1.0f, 0.0f, 1.0f});
  Image full(1, 1, 4);
  full.data = {-1.0f, 0.5f, 1.0f, -0.25f};
  CHECK(normalize_intensity(full) == full);
  auto c = normalize_intensity(Image(1, 2, 2, 7.0f));
  for (float v : c.data) CHECK(v == -1.0f);
}

TEST_CASE("non-zero cropping") {
  SUBCASE("all zero") {
    Image z(1, 10, 12);
    auto r = nonzero_crop(z, 4, 4);
    CHECK(r.all_zero);
    CHECK(r.image == z);
  }
  SUBCASE("single pixel") {
    Image img(1, 16, 16);
    img.at(0, 5, 7) = 0.5f;
    auto r = nonzero_crop(img);
    CHECK_FALSE(r.all_zero);
    CHECK(r.box_top == 5);
    CHECK(r.box_left == 7);
    CHECK(r.box_height == 1);
    CHECK(r.box_width == 1);
    CHECK(r.image.height == 1);
    CHECK(r.image.at(0, 0, 0) == 0.5f);
  }
  SUBCASE("centred disk, padded to a divisor") {
    Image img(1, 64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if ((y - 31.5) * (y - 31.5) + (x - 31.5) * (x - 31.5) <= 100.0) img.at(0, y, x) = 1.0f;
    auto r = nonzero_crop(img, 8, 8);
    CHECK(std::abs(r.box_height - 20) <= 1);
    CHECK(std::abs(r.box_width - 20) <= 1);
    CHECK(r.image.height == 24);
    CHECK(r.image.width == 24);
    // padding is split evenly around the box
    CHECK(r.box_top - r.window_top == (24 - r.box_height) / 2);
    double total = 0;
    for (float v : r.image.data) total += v;
    double orig = 0;
    for (float v : img.data) orig += v;
    CHECK(total == orig);
  }
}

TEST_CASE("dataset save and load are bit exact") {
  auto dir = scratch_dir("roundtrip");
  Rng rng(1);
  std::vector<SamplePair> samples;
  for (int i = 0; i < 3; ++i) {
    SamplePair p;
    p.id = "p" + std::to_string(i);
    p.split = i == 2 ? "test" : "train";
    p.source = test::random_image(2, 8, 12, rng);
    p.target = test::random_image(1, 8, 12, rng);
    samples.push_back(p);
  }
  samples[0].source.data[3] = 1e-38f;
  auto manifest = save_dataset(samples, dir);
  auto back = load_dataset(manifest);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == samples[i].id);
    CHECK(back[i].split == samples[i].split);
    CHECK(back[i].source == samples[i].source);
    CHECK(back[i].target == samples[i].target);
  }
  CHECK(load_dataset(manifest, "test").size() == 1);
  fs::remove(dir / "p1_target_c0.raw");
  try {
    load_dataset(manifest);
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("'p1'") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest validation") {
  auto dir = scratch_dir("manifest");
  auto cfg = small_synth(90, 10);
  auto ds = synth_dataset(cfg);
  auto path = save_dataset(ds.samples, dir, to_json(cfg));
  std::ifstream is(path);
  auto j = nlohmann::json::parse(is);
  auto m = manifest_from_json(j);
  CHECK(m.samples.size() == 100);
  std::set<std::string> ids;
  for (const auto& r : m.samples) ids.insert(r.id);
  CHECK(ids.size() == 100);
  REQUIRE(m.synth_config.has_value());
  auto bad = j;
  bad["format_version"] = 99;
  CHECK_THROWS(manifest_from_json(bad));
  auto dup = j;
  dup["samples"][1]["id"] = dup["samples"][0]["id"];
  CHECK_THROWS(manifest_from_json(dup));
  auto resized = j;
  resized["samples"][0]["height"] = 32;
  std::ofstream(dir / "manifest.json") << resized.dump();
  try {
    load_dataset(dir / "manifest.json");
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(ds.samples[0].id) != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("png export writes a file") {
  auto dir = scratch_dir("png");
  Rng rng(2);
  export_png(test::random_image(1, 9, 7, rng), dir / "x.png");
  CHECK(fs::file_size(dir / "x.png") > 0);
  fs::remove_all(dir);
}
