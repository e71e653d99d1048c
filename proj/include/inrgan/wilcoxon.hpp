#pragma once

#include <span>
#include <string>
#include <vector>

namespace inrgan {

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  int n = 0;               // nonzero differences
  double p_value = 1.0;    // two-sided
  enum class Method { Exact, NormalApproximation } method = Method::Exact;

  const char* method_name() const { return method == Method::Exact ? "exact" : "normal-approximation"; }
};

inline constexpr int kWilcoxonExactMaxN = 25;

// Paired two-sided signed-rank test on x - y. Zero differences are dropped and
// tied magnitudes share their average rank. Uses the exact null distribution
// for n <= 25 and the tie- and continuity-corrected normal approximation
// beyond. Throws std::invalid_argument on length mismatch, fewer than 5 nonzero
// differences, or when every difference is zero ("degenerate comparison").
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

// Building blocks, exposed for validation.
struct SignedRanks {
  std::vector<double> ranks;  // average ranks of |d|, aligned with signs
  std::vector<int> signs;     // +1 / -1
};
SignedRanks signed_ranks(std::span<const double> differences);
// Exact two-sided p for W+ = statistic under the sign-flip null of `ranks`.
double wilcoxon_exact_p(const std::vector<double>& ranks, double statistic);
double wilcoxon_normal_p(const std::vector<double>& ranks, double statistic);

}  // namespace inrgan
