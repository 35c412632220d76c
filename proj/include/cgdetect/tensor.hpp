#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <cmath>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgdetect/errors.hpp"

namespace cgd {

/// Dimensions of an NCHW array.
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::string str() const;

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

enum class Mode { train, eval };

/// 64-byte aligned storage. Vectorized kernels peel differently depending on
/// pointer alignment, so a fixed alignment keeps results reproducible within
/// one process, not only across processes.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense batch x channel x height x width array, row-major with w fastest.
///
/// Value type: copies are deep. Vectors (biases, BN parameters) are stored
/// as (len, 1, 1, 1) and linear weights as (out, in, 1, 1).
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{0}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor4(Shape4 shape, const std::vector<T>& data) : shape_(shape), data_(data.begin(), data.end()) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  static Tensor4 vector(std::size_t len, T fill = T{0}) { return Tensor4({len, 1, 1, 1}, fill); }

  const Shape4& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(n, c, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Start of the h*w plane for (n, c).
  T* plane(std::size_t n, std::size_t c) { return data_.data() + offset(n, c, 0, 0); }
  const T* plane(std::size_t n, std::size_t c) const { return data_.data() + offset(n, c, 0, 0); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(shape_);
    std::copy(data_.begin(), data_.end(), out.data());
    return out;
  }

 private:
  Shape4 shape_;
  AlignedVector<T> data_;
};

/// Throws NumericError naming `where` if any element is NaN or infinite.
template <typename T>
void require_finite(const Tensor4<T>& t, std::string_view where) {
  // Exponent bits all set means inf or NaN; an integer OR-reduction vectorizes.
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits exponent = std::bit_cast<Bits>(std::numeric_limits<T>::infinity());
  Bits bad = 0;
  const T* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    bad |= static_cast<Bits>((std::bit_cast<Bits>(p[i]) & exponent) == exponent);
  }
  if (bad == 0) return;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw NumericError(std::string(where) + ": non-finite value at flat index " +
                         std::to_string(i) + " of " + t.shape().str());
    }
  }
}

template <typename T>
void require_shape(const Tensor4<T>& t, const Shape4& expected, std::string_view what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected " + expected.str() + ", got " +
                     t.shape().str());
  }
}

template <typename T>
void add_inplace(Tensor4<T>& acc, const Tensor4<T>& x) {
  require_shape(x, acc.shape(), "add_inplace");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

template <typename T>
void scale_inplace(Tensor4<T>& t, T s) {
  for (auto& v : t.values()) v *= s;
}

/// Concatenate along the channel axis; batch and spatial dims must agree.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

/// Inverse of concat_channels: channels [0, split) and [split, c).
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& t, std::size_t split);

}  // namespace cgd
