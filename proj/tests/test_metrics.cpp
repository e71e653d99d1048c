#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inrgan/metrics.hpp"
#include "inrgan/wilcoxon.hpp"
#include "test_util.hpp"

using namespace inrgan;
using test::random_image;

namespace {

// Direct 2-D Gaussian-window SSIM in double, valid positions only.
double reference_ssim(const Image& a, const Image& b, const SsimOptions& o) {
  const int k = o.window;
  std::vector<double> w(static_cast<std::size_t>(k * k));
  double total = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double di = i - (k - 1) / 2.0, dj = j - (k - 1) / 2.0;
      w[static_cast<std::size_t>(i * k + j)] = std::exp(-(di * di + dj * dj) / (2 * o.sigma * o.sigma));
      total += w[static_cast<std::size_t>(i * k + j)];
    }
  for (auto& v : w) v /= total;
  const double c1 = std::pow(o.k1 * o.range, 2), c2 = std::pow(o.k2 * o.range, 2);
  double sum = 0.0;
  int count = 0;
  for (int r = 0; r + k <= a.height; ++r)
    for (int c = 0; c + k <= a.width; ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          const double x = (a.at(0, r + i, c + j) + 1.0) / 2.0, y = (b.at(0, r + i, c + j) + 1.0) / 2.0;
          const double wt = w[static_cast<std::size_t>(i * k + j)];
          ma += wt * x;
          mb += wt * y;
          saa += wt * x * x;
          sbb += wt * y * y;
          sab += wt * x * y;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return sum / count;
}

// Two-sided p by enumerating every sign assignment.
double enumeration_p(const std::vector<double>& ranks, double w_obs) {
  const int n = static_cast<int>(ranks.size());
  double lower = 0, upper = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double w = 0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) w += ranks[static_cast<std::size_t>(i)];
    if (w <= w_obs + 1e-9) lower += 1;
    if (w >= w_obs - 1e-9) upper += 1;
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / std::ldexp(1.0, n));
}

Image from_values(int h, int w, std::vector<float> v) {
  Image img(1, h, w);
  img.data = std::move(v);
  return img;
}

}  // namespace

TEST_CASE("mse examples on remapped intensities") {
  Rng rng(1);
  auto a = random_image(1, 4, 4, rng);
  CHECK(mse(a, a) == 0.0);
  Image lo(1, 3, 3, -0.5f), hi(1, 3, 3, -0.3f);
  CHECK(mse(lo, hi) == doctest::Approx(0.01).epsilon(1e-6));
  // remapped differences {0.1, -0.1, 0.2, 0}
  auto p = from_values(2, 2, {0.2f, -0.2f, 0.4f, 0.0f});
  auto t = from_values(2, 2, {0.0f, 0.0f, 0.0f, 0.0f});
  CHECK(mse(p, t) == doctest::Approx(0.015).epsilon(1e-6));
  CHECK_THROWS_AS(mse(Image(1, 2, 2), Image(1, 2, 3)), std::invalid_argument);
}

TEST_CASE("masked mse only sees masked pixels") {
  auto p = from_values(2, 2, {0.2f, -0.2f, 0.4f, 0.9f});
  auto t = from_values(2, 2, {0.0f, 0.0f, 0.0f, 0.0f});
  std::vector<std::uint8_t> mask{1, 1, 1, 0};
  CHECK(masked_mse(p, t, mask) == doctest::Approx((0.01 + 0.01 + 0.04) / 3).epsilon(1e-6));
}

TEST_CASE("psnr closed forms") {
  CHECK(psnr_from_mse(1e-3) == 30.0);
  CHECK(psnr_from_mse(0.00086) == doctest::Approx(30.655).epsilon(1e-4));
  CHECK(std::isinf(psnr_from_mse(0.0)));
  Rng rng(2);
  auto a = random_image(1, 8, 8, rng);
  CHECK(std::isinf(psnr(a, a)));
}

TEST_CASE("psnr strictly decreases in mse") {
  Rng rng(3);
  std::vector<double> m;
  for (int i = 0; i < 50; ++i) {
    auto a = random_image(1, 8, 8, rng), b = random_image(1, 8, 8, rng);
    m.push_back(mse(a, b));
  }
  std::sort(m.begin(), m.end());
  for (std::size_t i = 1; i < m.size(); ++i) {
    if (m[i] > m[i - 1]) CHECK(psnr_from_mse(m[i]) < psnr_from_mse(m[i - 1]));
  }
}

TEST_CASE("mse and psnr ignore a shared pixel permutation") {
  Rng rng(4);
  auto a = random_image(1, 6, 7, rng), b = random_image(1, 6, 7, rng);
  std::vector<std::size_t> perm(a.data.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Image pa = a, pb = b;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pa.data[i] = a.data[perm[i]];
    pb.data[i] = b.data[perm[i]];
  }
  CHECK(mse(pa, pb) == doctest::Approx(mse(a, b)).epsilon(1e-12));
  CHECK(psnr(pa, pb) == doctest::Approx(psnr(a, b)).epsilon(1e-12));
}

TEST_CASE("ssim identity, constant closed form and window oracle") {
  Rng rng(5);
  auto a = random_image(1, 24, 20, rng);
  CHECK(ssim(a, a) == 1.0);
  const double c1 = 1e-4;
  CHECK(std::abs(ssim(Image(1, 16, 16, -1.0f), Image(1, 16, 16, 1.0f)) - c1 / (1 + c1)) <= 1e-10);
  auto b = random_image(1, 24, 20, rng);
  CHECK(ssim(a, b) == doctest::Approx(reference_ssim(a, b, {})).epsilon(1e-9));
  CHECK_THROWS_AS(ssim(Image(1, 8, 8), Image(1, 8, 8)), std::invalid_argument);
}

TEST_CASE("ssim symmetric and bounded") {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    auto a = random_image(1, 16, 16, rng), b = random_image(1, 16, 16, rng);
    const double s = ssim(a, b);
    CHECK(s == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(s >= -1.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("wilcoxon all-positive five") {
  std::vector<double> x{1, 2, 3, 4, 5}, y(5, 0.0);
  auto r = wilcoxon_signed_rank(x, y);
  CHECK(r.statistic == 15.0);
  CHECK(r.n == 5);
  CHECK(r.p_value == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(r.method == WilcoxonResult::Method::Exact);
  auto swapped = wilcoxon_signed_rank(y, x);
  CHECK(swapped.statistic == 0.0);
  CHECK(swapped.p_value == r.p_value);
}

TEST_CASE("wilcoxon exact p matches enumeration on 200 random instances") {
  Rng rng(7);
  std::uniform_int_distribution<int> nd(5, 12);
  std::normal_distribution<double> g(0.2, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = nd(rng);
    std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x[i] = g(rng);
      y[i] = trial % 2 ? std::round(x[i] * 2) / 2 + std::round(g(rng)) / 2 : g(rng);  // odd trials carry ties
      if (trial % 2) x[i] = std::round(x[i] * 2) / 2;
    }
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
    auto sr = signed_ranks(d);
    if (sr.ranks.size() < 5) continue;
    auto r = wilcoxon_signed_rank(x, y);
    CAPTURE(trial);
    CHECK(r.p_value == doctest::Approx(enumeration_p(sr.ranks, r.statistic)).epsilon(1e-12));
    CHECK(r.p_value > 0.0);
    CHECK(r.p_value <= 1.0);
    CHECK(r.statistic >= 0.0);
    CHECK(r.statistic <= r.n * (r.n + 1) / 2.0);
    CHECK(wilcoxon_signed_rank(y, x).p_value == r.p_value);
  }
}

TEST_CASE("ties get average ranks and zeros are dropped") {
  std::vector<double> d{0.0, 2.0, -2.0, 1.0, 3.0};
  auto sr = signed_ranks(d);
  CHECK(sr.ranks == std::vector<double>{2.5, 2.5, 1.0, 4.0});
  CHECK(sr.signs == std::vector<int>{1, -1, 1, 1});
}

TEST_CASE("normal approximation tracks the exact distribution at n = 30") {
  Rng rng(8);
  std::normal_distribution<double> g(0.3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(30), y(30, 0.0);
    for (auto& v : x) v = g(rng);
    auto r = wilcoxon_signed_rank(x, y);
    CHECK(r.method == WilcoxonResult::Method::NormalApproximation);
    auto sr = signed_ranks(x);
    CHECK(std::abs(r.p_value - wilcoxon_exact_p(sr.ranks, r.statistic)) < 0.01);
  }
}

TEST_CASE("wilcoxon errors") {
  std::vector<double> x{1, 2, 3, 4, 5};
  try {
    wilcoxon_signed_rank(x, x);
    FAIL("expected failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("degenerate comparison") != std::string::npos);
  }
  CHECK_THROWS(wilcoxon_signed_rank(x, std::vector<double>{1, 2}));
  CHECK_THROWS(wilcoxon_signed_rank(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}));
}

TEST_CASE("report aggregates are recomputable from rows") {
  Rng rng(9);
  std::vector<Image> preds, targets;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    preds.push_back(random_image(1, 16, 16, rng));
    targets.push_back(random_image(1, 16, 16, rng));
    ids.push_back("s" + std::to_string(i));
  }
  auto rep = evaluate_predictions(preds, targets, ids);
  REQUIRE(rep.count() == 6);
  double mean = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(rep.rows[i].id == ids[i]);
    CHECK(rep.rows[i].mse == mse(preds[i], targets[i]));
    CHECK(rep.rows[i].ssim == ssim(preds[i], targets[i]));
    CHECK(rep.rows[i].mse >= 0.0);
    mean += rep.rows[i].mse / 6.0;
  }
  auto s = rep.summary("mse");
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
  double var = 0.0;
  for (const auto& row : rep.rows) var += (row.mse - mean) * (row.mse - mean) / 5.0;
  CHECK(s.std == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
  auto j = rep.aggregate_json();
  CHECK(j["mse_e3"]["mean"].get<double>() == doctest::Approx(mean * 1e3).epsilon(1e-9));
  CHECK(j["ssim_x100"]["mean"].get<double>() == doctest::Approx(rep.summary("ssim").mean * 100).epsilon(1e-9));
  CHECK(rep.to_csv().rfind("id,mse,ssim,psnr\n", 0) == 0);

  auto same = evaluate_predictions(targets, targets, ids);
  for (const auto& row : same.rows) {
    CHECK(row.mse == 0.0);
    CHECK(row.ssim == 1.0);
  }
  auto cmp = compare_reports(rep, same);
  REQUIRE(cmp.size() == 3);
  CHECK(cmp[0].test.has_value());
  CHECK(cmp[0].test->statistic == 21.0);
  CHECK(cmp[0].test->p_value == doctest::Approx(0.03125));
  auto self = compare_reports(rep, rep);
  CHECK_FALSE(self[0].test.has_value());
  CHECK_FALSE(self[0].note.empty());
}
