#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace morticast {

/// Dense row-major 3-array. Used for (draw|chain, age|iter, year|param) stacks.
template <typename T>
class Array3 {
 public:
  Array3() = default;
  Array3(std::size_t n0, std::size_t n1, std::size_t n2, T fill = T{})
      : dims_{n0, n1, n2}, data_(n0 * n1 * n2, fill) {}

  std::size_t dim(std::size_t axis) const { return dims_[axis]; }
  const std::array<std::size_t, 3>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    assert(i < dims_[0] && j < dims_[1] && k < dims_[2]);
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    assert(i < dims_[0] && j < dims_[1] && k < dims_[2]);
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  /// Contiguous innermost row at (i, j).
  std::span<T> row(std::size_t i, std::size_t j) {
    return {data_.data() + (i * dims_[1] + j) * dims_[2], dims_[2]};
  }
  std::span<const T> row(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * dims_[1] + j) * dims_[2], dims_[2]};
  }

  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }

  bool operator==(const Array3&) const = default;

 private:
  std::array<std::size_t, 3> dims_{0, 0, 0};
  std::vector<T> data_;
};

}  // namespace morticast
