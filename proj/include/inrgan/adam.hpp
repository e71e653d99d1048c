#pragma once

#include <cstdint>

#include "inrgan/ndarray.hpp"

namespace inrgan {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  TensorMap<T> first_moment;
  TensorMap<T> second_moment;
  std::int64_t step = 0;
};

// Bias-corrected Adam update applied in place. Every parameter must have a
// gradient of the same shape; a non-finite gradient throws before any
// parameter is modified.
template <typename T>
void adam_step(TensorMap<T>& params, const TensorMap<T>& grads, AdamState<T>& state,
               const AdamHyper& hyper);

}  // namespace inrgan
