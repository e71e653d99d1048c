#pragma once

// Pixel coordinates, Fourier positional encoding and the M x N patch grid.

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "inrgan/ndarray.hpp"

namespace inrgan {

struct PatchGridSpec {
  int rows = 1;  // M
  int cols = 1;  // N
  bool operator==(const PatchGridSpec&) const = default;
};

enum class CoordDenominator {
  ExtentMinusOne,  // corners land exactly on 0 and 1
  Extent,
};

// [H, W, 2] array of (row, col) coordinates in [0, 1].
NdArray<double> make_coord_grid(int height, int width,
                                CoordDenominator denom = CoordDenominator::ExtentMinusOne);

struct EncodedCoords {
  int height = 0;
  int width = 0;
  int frequencies = 0;
  // [H, W, 4 * frequencies]: row axis ladder then column axis ladder, each
  // ladder ordered sin(2^0 pi x), cos(2^0 pi x), ..., cos(2^(i-1) pi x).
  NdArray<double> features;

  int feature_width() const { return 4 * frequencies; }
  const double* at(int r, int c) const {
    return features.data() + (static_cast<std::int64_t>(r) * width + c) * feature_width();
  }
};

EncodedCoords positional_encode(const NdArray<double>& coords, int frequencies);

// Single-axis ladder, exposed for tests and probes.
void encode_scalar(double x, int frequencies, double* out);

class PatchMap {
 public:
  PatchMap(int height, int width, PatchGridSpec spec);

  int height() const { return height_; }
  int width() const { return width_; }
  PatchGridSpec spec() const { return spec_; }
  int patch_height() const { return patch_h_; }
  int patch_width() const { return patch_w_; }
  int cells() const { return spec_.rows * spec_.cols; }
  int pixels_per_patch() const { return patch_h_ * patch_w_; }

  std::pair<int, int> owner(int r, int c) const { return {r / patch_h_, c / patch_w_}; }
  int owner_index(int r, int c) const { return (r / patch_h_) * spec_.cols + c / patch_w_; }
  // Row range [first, second) and column range of a patch.
  std::pair<int, int> row_range(int patch_row) const { return {patch_row * patch_h_, (patch_row + 1) * patch_h_}; }
  std::pair<int, int> col_range(int patch_col) const { return {patch_col * patch_w_, (patch_col + 1) * patch_w_}; }

  // Image-plane pixel offset of the k-th pixel (row-major inside the patch) of a cell.
  std::int64_t pixel_offset(int cell, int k) const;

  // Patch-major ordering [cells, pixels_per_patch] -> image plane offsets.
  const std::vector<std::int64_t>& patch_order() const { return *patch_order_; }
  // Image plane offset -> patch-major position.
  const std::vector<std::int64_t>& image_order() const { return *image_order_; }
  std::shared_ptr<const std::vector<std::int64_t>> image_order_ptr() const { return image_order_; }

 private:
  int height_, width_;
  PatchGridSpec spec_;
  int patch_h_, patch_w_;
  std::shared_ptr<std::vector<std::int64_t>> patch_order_;
  std::shared_ptr<std::vector<std::int64_t>> image_order_;
};

PatchMap partition(int height, int width, PatchGridSpec spec);

}  // namespace inrgan
