#pragma once

// Image quality metrics on [0, 1]-remapped intensities (v + 1) / 2 with
// dynamic range 1, and per-sample evaluation reports.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inrgan/image.hpp"
#include "inrgan/wilcoxon.hpp"
#include "json.hpp"

namespace inrgan {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

// Throw std::invalid_argument on extent or channel mismatch.
double mse(const Image& a, const Image& b);
// MSE over pixels where mask != 0 (mask is one plane, applied to every channel).
double masked_mse(const Image& a, const Image& b, std::span<const std::uint8_t> mask);
double psnr_from_mse(double mse_value);  // +inf when mse_value == 0
double psnr(const Image& a, const Image& b);
// Mean local SSIM over valid window positions; channels averaged.
double ssim(const Image& a, const Image& b, const SsimOptions& opts = {});

struct MetricsRow {
  std::string id;
  double mse = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single row
};

Aggregate aggregate(std::span<const double> values);

struct MetricsReport {
  std::vector<MetricsRow> rows;
  SsimOptions ssim_options;

  std::size_t count() const { return rows.size(); }
  std::vector<double> column(const std::string& metric) const;  // "mse" | "ssim" | "psnr"
  Aggregate summary(const std::string& metric) const;

  // One row per sample: id, mse, ssim, psnr (raw units).
  std::string to_csv() const;
  // Display units: MSE x 1e-3, SSIM x 100, PSNR dB; PSNR aggregates skip +inf rows.
  nlohmann::json aggregate_json() const;
};

// Rows in prediction order; predictions[i] is scored against targets[i].
MetricsReport evaluate_predictions(std::span<const Image> predictions, std::span<const Image> targets,
                                   std::span<const std::string> ids, const SsimOptions& opts = {});

struct MetricComparison {
  std::string metric;
  std::optional<WilcoxonResult> test;  // empty when the comparison is degenerate
  std::string note;
};

// Paired signed-rank test per metric of `a` against `b` (rows matched by id).
std::vector<MetricComparison> compare_reports(const MetricsReport& a, const MetricsReport& b);
nlohmann::json to_json(const std::vector<MetricComparison>& comparisons);

}  // namespace inrgan
