#include <doctest.h>

#include <cmath>

#include "inrgan/diagnostics.hpp"
#include "inrgan/discriminator.hpp"
#include "inrgan/generator.hpp"
#include "test_util.hpp"

using namespace inrgan;
using test::random_image;

namespace {
DiscConfig small_disc() {
  DiscConfig cfg;
  cfg.channels = {4, 6, 8, 8};
  return cfg;
}
}  // namespace

TEST_CASE("logit map extent") {
  CHECK(logit_extent(DiscConfig{}, 160, 128) == std::pair{18, 14});
  CHECK(logit_extent(DiscConfig{}, 64, 64) == std::pair{6, 6});
  CHECK_THROWS_AS(logit_extent(DiscConfig{}, 8, 8), std::invalid_argument);
}

TEST_CASE("zero parameters give zero logits") {
  auto cfg = small_disc();
  auto params = init_disc_params<double>(cfg, 1);
  for (auto& [name, p] : params) p.fill(0.0);
  Rng rng(1);
  std::vector<Image> s{random_image(1, 32, 32, rng)}, t{random_image(1, 32, 32, rng)};
  auto logits = discriminator_forward<double>(s, t, params, cfg);
  CHECK(logits.shape() == Shape{1, 1, 2, 2});
  for (double v : logits.values()) CHECK(v == 0.0);
}

TEST_CASE("batch permutation permutes logits") {
  auto cfg = small_disc();
  auto params = init_disc_params<double>(cfg, 2);
  Rng rng(2);
  std::vector<Image> s, t;
  for (int i = 0; i < 3; ++i) {
    s.push_back(random_image(1, 32, 32, rng));
    t.push_back(random_image(1, 32, 32, rng));
  }
  auto fwd = discriminator_forward<double>(s, t, params, cfg);
  std::vector<Image> sp{s[2], s[0], s[1]}, tp{t[2], t[0], t[1]};
  auto perm = discriminator_forward<double>(sp, tp, params, cfg);
  const std::int64_t per = fwd.size() / 3;
  const int order[3] = {2, 0, 1};
  for (int b = 0; b < 3; ++b)
    for (std::int64_t k = 0; k < per; ++k) CHECK(perm[b * per + k] == fwd[order[b] * per + k]);
}

TEST_CASE("a pixel perturbation only moves logits whose receptive field covers it") {
  auto cfg = small_disc();
  auto params = init_disc_params<double>(cfg, 3);
  Rng rng(3);
  std::vector<Image> s{random_image(1, 64, 64, rng)}, t{random_image(1, 64, 64, rng)};
  auto base = discriminator_forward<double>(s, t, params, cfg);
  const int pr = 5, pc = 58;
  t[0].at(0, pr, pc) += 0.5f;
  auto moved = discriminator_forward<double>(s, t, params, cfg);
  auto [lh, lw] = logit_extent(cfg, 64, 64);
  // Receptive field of logit (i, j): rows [8 i - 23, 8 i + 46] (padding 1 per layer).
  for (int i = 0; i < lh; ++i)
    for (int j = 0; j < lw; ++j) {
      const bool covers = pr >= 8 * i - 23 && pr <= 8 * i + 46 && pc >= 8 * j - 23 && pc <= 8 * j + 46;
      const bool changed = moved[i * lw + j] != base[i * lw + j];
      if (!covers) CHECK_FALSE(changed);
    }
  bool any = false;
  for (std::int64_t k = 0; k < base.size(); ++k) any = any || moved[k] != base[k];
  CHECK(any);
}

TEST_CASE("noise injection") {
  Image img(1, 1000, 1000, 0.25f);
  Rng r0(0);
  CHECK(inject_noise(img, 0.0, r0) == img);
  Rng a(44), b(44);
  auto na = inject_noise(img, 0.1, a);
  auto nb = inject_noise(img, 0.1, b);
  CHECK(na == nb);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double d = static_cast<double>(na.data[i]) - img.data[i];
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(img.data.size());
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01 * 0.1);
  CHECK(var == doctest::Approx(0.01).epsilon(0.01));
}

TEST_CASE("config json round trip") {
  auto cfg = small_disc();
  cfg.leaky_slope = 0.1;
  CHECK(disc_config_from_json(to_json(cfg)) == cfg);
}

TEST_CASE("discriminator gradient check") {
  for (const auto& c : network_grad_checks()) {
    if (c.name != "discriminator") continue;
    CHECK(c.report.passed());
    CHECK(c.report.max_rel_error() <= 1e-4);
  }
}
