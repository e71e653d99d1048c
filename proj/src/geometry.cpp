#include "inrgan/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace inrgan {

NdArray<double> make_coord_grid(int height, int width, CoordDenominator denom) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("make_coord_grid: extents must be positive, got " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
  auto norm = [denom](int i, int extent) {
    if (denom == CoordDenominator::Extent) return static_cast<double>(i) / extent;
    return extent == 1 ? 0.0 : static_cast<double>(i) / (extent - 1);
  };
  NdArray<double> grid({height, width, 2});
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::int64_t k = (static_cast<std::int64_t>(r) * width + c) * 2;
      grid[k] = norm(r, height);
      grid[k + 1] = norm(c, width);
    }
  }
  return grid;
}

void encode_scalar(double x, int frequencies, double* out) {
  double freq = std::numbers::pi;
  for (int k = 0; k < frequencies; ++k) {
    out[2 * k] = std::sin(freq * x);
    out[2 * k + 1] = std::cos(freq * x);
    freq *= 2.0;
  }
}

EncodedCoords positional_encode(const NdArray<double>& coords, int frequencies) {
  if (frequencies < 1) throw std::invalid_argument("positional_encode: frequencies must be >= 1");
  if (coords.rank() != 3 || coords.dim(2) != 2) {
    throw std::invalid_argument("positional_encode: coords must be [H, W, 2]");
  }
  EncodedCoords enc;
  enc.height = static_cast<int>(coords.dim(0));
  enc.width = static_cast<int>(coords.dim(1));
  enc.frequencies = frequencies;
  const int fw = enc.feature_width();
  enc.features = NdArray<double>({coords.dim(0), coords.dim(1), fw});
  const std::int64_t pixels = coords.dim(0) * coords.dim(1);
  for (std::int64_t p = 0; p < pixels; ++p) {
    double* out = enc.features.data() + p * fw;
    encode_scalar(coords[2 * p], frequencies, out);
    encode_scalar(coords[2 * p + 1], frequencies, out + 2 * frequencies);
  }
  return enc;
}

PatchMap::PatchMap(int height, int width, PatchGridSpec spec) : height_(height), width_(width), spec_(spec) {
  if (spec.rows < 1 || spec.cols < 1) throw std::invalid_argument("partition: grid extents must be >= 1");
  if (height < 1 || width < 1) throw std::invalid_argument("partition: image extents must be positive");
  if (height % spec.rows != 0 || width % spec.cols != 0) {
    throw std::invalid_argument("partition: image " + std::to_string(height) + "x" + std::to_string(width) +
                                " is not divisible by grid " + std::to_string(spec.rows) + "x" +
                                std::to_string(spec.cols));
  }
  patch_h_ = height / spec.rows;
  patch_w_ = width / spec.cols;
  const std::int64_t n = static_cast<std::int64_t>(height) * width;
  patch_order_ = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n));
  image_order_ = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n));
  std::int64_t pos = 0;
  for (int cell = 0; cell < cells(); ++cell) {
    for (int k = 0; k < pixels_per_patch(); ++k, ++pos) {
      const std::int64_t off = pixel_offset(cell, k);
      (*patch_order_)[static_cast<std::size_t>(pos)] = off;
      (*image_order_)[static_cast<std::size_t>(off)] = pos;
    }
  }
}

std::int64_t PatchMap::pixel_offset(int cell, int k) const {
  const int pr = cell / spec_.cols;
  const int pc = cell % spec_.cols;
  const int r = pr * patch_h_ + k / patch_w_;
  const int c = pc * patch_w_ + k % patch_w_;
  return static_cast<std::int64_t>(r) * width_ + c;
}

PatchMap partition(int height, int width, PatchGridSpec spec) { return PatchMap(height, width, spec); }

}  // namespace inrgan
