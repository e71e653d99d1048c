#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "inrgan/graph.hpp"

namespace inrgan {

struct GradCheckOptions {
  double eps = 1e-5;
  double threshold = 1e-4;
  // Relative errors use max(|analytic|, |numeric|, abs_floor) as denominator.
  double abs_floor = 1e-7;
  // One-sided differences disagreeing by more than this (relative) mark a kink.
  double kink_tolerance = 1e-3;
  // Elements probed per tensor; tensors with more elements are sampled.
  std::int64_t max_elements = 64;
  std::uint64_t seed = 7;
  // Also check gradients with respect to these graph inputs.
  std::vector<std::string> inputs;
};

struct GradCheckEntry {
  std::string name;
  bool is_input = false;
  std::int64_t checked = 0;
  // Elements whose one-sided differences disagree, i.e. the perturbation
  // straddles a kink of relu/leaky-relu/abs. They are excluded from the error.
  std::int64_t kinks_skipped = 0;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double threshold = 0.0;
  double max_rel_error() const;
  std::int64_t kinks_skipped() const;
  std::int64_t checked() const;
  bool passed() const;
  std::string to_string() const;
};

// Compares reverse-mode gradients of sum(output) against central differences.
// Runs at 64-bit precision only.
GradCheckReport grad_check(const Graph& graph, const TensorMap<double>& params,
                           const TensorMap<double>& inputs, const std::string& output,
                           const GradCheckOptions& options = {});

}  // namespace inrgan
