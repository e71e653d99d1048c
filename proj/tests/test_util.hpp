#pragma once

#include <random>

#include "inrgan/image.hpp"
#include "inrgan/ndarray.hpp"
#include "inrgan/rng.hpp"

namespace inrgan::test {

template <typename T = double>
inline NdArray<T> random_array(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  NdArray<T> a(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : a.values()) v = static_cast<T>(u(rng));
  return a;
}

inline Image random_image(int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Image img(c, h, w);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : img.data) v = static_cast<float>(u(rng));
  return img;
}

}  // namespace inrgan::test
