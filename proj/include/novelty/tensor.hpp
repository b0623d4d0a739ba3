// Copyright 2026 The Novelty Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "novelty/error.hpp"

namespace novelty {

/// Shape of a rank-4 array laid out as [batch, channels, height, width].
/// Rank-2 data such as latent codes and feature vectors use h = w = 1.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t size() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::size_t per_sample() const { return c * h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '[' << s.n << ", " << s.c << ", " << s.h << ", " << s.w << ']';
  return os.str();
}

/// Allocator with a fixed 64-byte alignment. Vectorized kernels peel a
/// pointer-dependent number of leading elements, so without a fixed alignment
/// results would vary in the last bits with heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW array owning its storage.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor requires a floating-point scalar");

 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(std::size_t n, std::size_t c, std::size_t h = 1, std::size_t w = 1, T fill = T(0))
      : Tensor(Shape{n, c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  AlignedVector<T>& vec() { return data_; }
  const AlignedVector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  T operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  /// Pointer to the first element of sample `n`.
  T* sample(std::size_t n) { return data_.data() + n * shape_.per_sample(); }
  const T* sample(std::size_t n) const { return data_.data() + n * shape_.per_sample(); }

  /// Reinterprets the same storage with a new shape of equal size.
  Tensor reshaped(Shape s) const {
    if (s.size() != size()) {
      throw ShapeError("reshape " + to_string(shape_) + " -> " + to_string(s) + " changes size");
    }
    Tensor out = *this;
    out.shape_ = s;
    return out;
  }

  /// Copies samples [first, first + count).
  Tensor slice(std::size_t first, std::size_t count) const {
    Tensor out(Shape{count, shape_.c, shape_.h, shape_.w});
    std::copy_n(sample(first), count * shape_.per_sample(), out.data());
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  AlignedVector<T> data_;
};

/// Gathers the listed samples into a new batch.
template <typename T>
Tensor<T> gather_samples(const Tensor<T>& src, std::span<const std::size_t> rows) {
  Tensor<T> out(Shape{rows.size(), src.c(), src.h(), src.w()});
  const std::size_t per = src.shape().per_sample();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.sample(rows[i]), per, out.sample(i));
  }
  return out;
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

}  // namespace novelty
