#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace inrgan {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

// Dense row-major array. The last extent varies fastest.
template <typename T>
class NdArray {
 public:
  using value_type = T;

  NdArray() = default;
  explicit NdArray(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_size(shape_)), fill) {}
  NdArray(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_)) {
      throw std::invalid_argument("NdArray: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  NdArray reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw std::invalid_argument("NdArray::reshaped: " + shape_to_string(shape_) + " -> " +
                                  shape_to_string(shape));
    }
    return NdArray(std::move(shape), data_);
  }

  template <typename U>
  NdArray<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return NdArray<U>(shape_, std::move(out));
  }

  bool operator==(const NdArray& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
using TensorMap = std::map<std::string, NdArray<T>>;

template <typename U, typename T>
TensorMap<U> cast_all(const TensorMap<T>& in) {
  TensorMap<U> out;
  for (const auto& [name, value] : in) out.emplace(name, value.template cast<U>());
  return out;
}

template <typename T>
std::int64_t total_size(const TensorMap<T>& tensors) {
  std::int64_t n = 0;
  for (const auto& [name, value] : tensors) n += value.size();
  return n;
}

}  // namespace inrgan
