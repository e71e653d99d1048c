#include "inrgan/kernels.hpp"

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace inrgan::kernels {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ConstRowVec = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <typename T>
using RowVec = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

}  // namespace

template <typename T>
void affine_rows(const T* x, const T* w, const T* b, T* y, std::int64_t rows, std::int64_t in,
                 std::int64_t out) {
  ConstMap<T> xm(x, rows, in);
  ConstMap<T> wm(w, out, in);
  Map<T> ym(y, rows, out);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += ConstRowVec<T>(b, out);
}

template <typename T>
void affine_rows_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                          std::int64_t rows, std::int64_t in, std::int64_t out) {
  ConstMap<T> dym(dy, rows, out);
  if (dx != nullptr) {
    Map<T> dxm(dx, rows, in);
    dxm.noalias() += dym * ConstMap<T>(w, out, in);
  }
  if (dw != nullptr) {
    Map<T> dwm(dw, out, in);
    dwm.noalias() += dym.transpose() * ConstMap<T>(x, rows, in);
  }
  if (db != nullptr) {
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* row = dy + r * out;
      for (std::int64_t o = 0; o < out; ++o) db[o] += row[o];
    }
  }
}

ConvGeometry conv_geometry(std::int64_t channels, std::int64_t height, std::int64_t width,
                           std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
  if (kernel < 1 || stride < 1 || padding < 0) {
    throw std::invalid_argument("conv2d: invalid kernel/stride/padding");
  }
  const std::int64_t oh = (height + 2 * padding - kernel) / stride + 1;
  const std::int64_t ow = (width + 2 * padding - kernel) / stride + 1;
  if (height + 2 * padding < kernel || width + 2 * padding < kernel || oh < 1 || ow < 1) {
    throw std::invalid_argument("conv2d: input " + std::to_string(height) + "x" +
                                std::to_string(width) + " too small for kernel " +
                                std::to_string(kernel));
  }
  return {channels, height, width, kernel, stride, padding, oh, ow};
}

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* columns) {
  const std::int64_t plane = g.out_height * g.out_width;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const T* src = image + c * g.height * g.width;
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        T* dst = columns + ((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (std::int64_t oy = 0; oy < g.out_height; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky;
          T* row = dst + oy * g.out_width;
          if (iy < 0 || iy >= g.height) {
            std::fill(row, row + g.out_width, T(0));
            continue;
          }
          const T* srow = src + iy * g.width;
          for (std::int64_t ox = 0; ox < g.out_width; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx;
            row[ox] = (ix >= 0 && ix < g.width) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* columns, const ConvGeometry& g, T* image) {
  const std::int64_t plane = g.out_height * g.out_width;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    T* dst = image + c * g.height * g.width;
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        const T* src = columns + ((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (std::int64_t oy = 0; oy < g.out_height; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          const T* row = src + oy * g.out_width;
          T* drow = dst + iy * g.width;
          for (std::int64_t ox = 0; ox < g.out_width; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void leaky_forward(const T* x, T* y, std::int64_t count, T slope) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Eigen::Map<const Arr> a(x, count);
  Eigen::Map<Arr>(y, count) = (a > T(0)).select(a, a * slope);
}

template <typename T>
void leaky_backward(const T* x, const T* dy, T* dx, std::int64_t count, T slope) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Eigen::Map<const Arr> a(x, count);
  Eigen::Map<const Arr> g(dy, count);
  Eigen::Map<Arr>(dx, count) += (a > T(0)).select(g, g * slope);
}

#define INRGAN_INSTANTIATE(T)                                                              \
  template void affine_rows<T>(const T*, const T*, const T*, T*, std::int64_t, std::int64_t, \
                               std::int64_t);                                              \
  template void affine_rows_backward<T>(const T*, const T*, const T*, T*, T*, T*,          \
                                        std::int64_t, std::int64_t, std::int64_t);         \
  template void im2col<T>(const T*, const ConvGeometry&, T*);                              \
  template void col2im<T>(const T*, const ConvGeometry&, T*);                              \
  template void leaky_forward<T>(const T*, T*, std::int64_t, T);                           \
  template void leaky_backward<T>(const T*, const T*, T*, std::int64_t, T);

INRGAN_INSTANTIATE(float)
INRGAN_INSTANTIATE(double)

#undef INRGAN_INSTANTIATE

}  // namespace inrgan::kernels
