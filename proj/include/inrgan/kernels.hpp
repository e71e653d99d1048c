#pragma once

// Dense kernels shared by the graph primitives and the graph-free evaluation
// paths. Both paths call the same functions with the same extents, so their
// results agree bit for bit.

#include <cstdint>

namespace inrgan::kernels {

// y[rows, out] = x[rows, in] * w[out, in]^T + b[out]
template <typename T>
void affine_rows(const T* x, const T* w, const T* b, T* y, std::int64_t rows, std::int64_t in,
                 std::int64_t out);

// Accumulating backward of affine_rows. Any of dx, dw, db may be null.
template <typename T>
void affine_rows_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                          std::int64_t rows, std::int64_t in, std::int64_t out);

struct ConvGeometry {
  std::int64_t channels, height, width;
  std::int64_t kernel, stride, padding;
  std::int64_t out_height, out_width;
};

ConvGeometry conv_geometry(std::int64_t channels, std::int64_t height, std::int64_t width,
                           std::int64_t kernel, std::int64_t stride, std::int64_t padding);

// Single image [C, H, W] -> columns [C*k*k, Ho*Wo].
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* columns);

// Accumulating adjoint of im2col.
template <typename T>
void col2im(const T* columns, const ConvGeometry& g, T* image);

template <typename T>
inline T leaky(T v, T slope) {
  return v > T(0) ? v : slope * v;
}

// y = leaky(x); x and y may alias.
template <typename T>
void leaky_forward(const T* x, T* y, std::int64_t count, T slope);

// dx += dy * leaky'(x)
template <typename T>
void leaky_backward(const T* x, const T* dy, T* dx, std::int64_t count, T slope);

}  // namespace inrgan::kernels
