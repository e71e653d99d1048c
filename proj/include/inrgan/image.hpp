#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace inrgan {

// Channel-major float image: value(c, r, col) = data[(c * height + r) * width + col].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {
    if (c < 1 || h < 1 || w < 1) throw std::invalid_argument("Image: extents must be positive");
  }

  std::int64_t plane() const { return static_cast<std::int64_t>(height) * width; }
  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  float& at(int c, int r, int col) { return data[static_cast<std::size_t>((static_cast<std::int64_t>(c) * height + r) * width + col)]; }
  float at(int c, int r, int col) const { return data[static_cast<std::size_t>((static_cast<std::int64_t>(c) * height + r) * width + col)]; }
  bool same_extent(const Image& o) const { return height == o.height && width == o.width; }
  Image channel(int c) const;

  bool operator==(const Image&) const = default;
};

inline Image Image::channel(int c) const {
  if (c < 0 || c >= channels) throw std::out_of_range("Image::channel: " + std::to_string(c));
  Image out(1, height, width);
  std::copy_n(data.begin() + c * plane(), plane(), out.data.begin());
  return out;
}

}  // namespace inrgan
