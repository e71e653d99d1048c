#include "inrgan/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace inrgan {

SignedRanks signed_ranks(std::span<const double> differences) {
  std::vector<double> mags;
  std::vector<int> signs;
  for (double d : differences) {
    if (d == 0.0) continue;
    mags.push_back(std::abs(d));
    signs.push_back(d > 0.0 ? 1 : -1);
  }
  std::vector<std::size_t> order(mags.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
  SignedRanks out;
  out.ranks.assign(mags.size(), 0.0);
  out.signs = signs;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && mags[order[j + 1]] == mags[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = avg;
    i = j + 1;
  }
  return out;
}

double wilcoxon_exact_p(const std::vector<double>& ranks, double statistic) {
  // Ranks are multiples of 1/2; count sign assignments over doubled ranks.
  std::vector<long> doubled;
  long total = 0;
  for (double r : ranks) {
    const long d = std::lround(2.0 * r);
    doubled.push_back(d);
    total += d;
  }
  std::vector<double> counts(static_cast<std::size_t>(total + 1), 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long d : doubled) {
    for (long s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + d)] += counts[static_cast<std::size_t>(s)];
    }
    reach += d;
  }
  const long w = std::lround(2.0 * statistic);
  const double all = std::ldexp(1.0, static_cast<int>(ranks.size()));
  double lower = 0.0, upper = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s <= w) lower += counts[static_cast<std::size_t>(s)];
    if (s >= w) upper += counts[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double wilcoxon_normal_p(const std::vector<double>& ranks, double statistic) {
  const double n = static_cast<double>(ranks.size());
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(statistic - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon_signed_rank: paired samples differ in length");
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  const SignedRanks sr = signed_ranks(diff);
  if (sr.ranks.empty()) throw std::invalid_argument("wilcoxon_signed_rank: degenerate comparison (all differences zero)");
  if (sr.ranks.size() < 5) {
    throw std::invalid_argument("wilcoxon_signed_rank: need at least 5 nonzero differences, got " +
                                std::to_string(sr.ranks.size()));
  }
  WilcoxonResult r;
  r.n = static_cast<int>(sr.ranks.size());
  for (std::size_t i = 0; i < sr.ranks.size(); ++i) {
    if (sr.signs[i] > 0) r.statistic += sr.ranks[i];
  }
  if (r.n <= kWilcoxonExactMaxN) {
    r.method = WilcoxonResult::Method::Exact;
    r.p_value = wilcoxon_exact_p(sr.ranks, r.statistic);
  } else {
    r.method = WilcoxonResult::Method::NormalApproximation;
    r.p_value = wilcoxon_normal_p(sr.ranks, r.statistic);
  }
  return r;
}

}  // namespace inrgan
