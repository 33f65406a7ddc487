#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mdn/core/error.hpp"

namespace mdn {

// NCHW extent. Every signal, weight and scalar in the library is rank 4;
// scalars are 1x1x1x1 and per-channel vectors are 1xCx1x1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  constexpr std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  constexpr std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

// 64-byte aligned storage. Eigen's vectorised kernels peel loops according to
// the runtime address, so aligned buffers keep results independent of the heap.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Storage = std::vector<T, AlignedAllocator<T>>;

// Dense value container. Carries no gradient; see autograd.hpp for Var.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {
    if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0) {
      throw ShapeError("tensor dimensions must be positive, got " + shape.str());
    }
  }
  Tensor(Shape shape, const std::vector<T>& data) : shape_(shape), data_(data.begin(), data.end()) {
    if (data_.size() != shape_.numel()) {
      throw ShapeError("element count " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  Storage<T>& vec() { return data_; }
  const Storage<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  // Returns the index of the first non-finite element, or -1.
  std::ptrdiff_t first_non_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  }

  void require_finite(const std::string& what) const {
    auto i = first_non_finite();
    if (i >= 0) {
      throw NumericError(what + ": non-finite value at flat index " + std::to_string(i) +
                         " of tensor " + shape_.str());
    }
  }

  // Slice of batch entries [begin, begin + count).
  Tensor batch_slice(int begin, int count) const {
    Shape s = shape_;
    s.n = count;
    Tensor out(s);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * shape_.sample()),
                s.numel(), out.data_.begin());
    return out;
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_{};
  Storage<T> data_;
};

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Concatenate along the batch axis; all parts must share C, H, W.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("stack_batch: no tensors");
  Shape s = parts[0].shape();
  int n = 0;
  for (const auto& p : parts) {
    if (p.shape().c != s.c || p.shape().h != s.h || p.shape().w != s.w) {
      throw ShapeError("stack_batch: " + p.shape().str() + " vs " + s.str());
    }
    n += p.shape().n;
  }
  s.n = n;
  Tensor<T> out(s);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.vec().begin(), p.vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.size();
  }
  return out;
}

// Reflection padding of the bottom and right borders up to (h, w).
template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& x, int h, int w) {
  const Shape& s = x.shape();
  if (h < s.h || w < s.w) throw ShapeError("reflect_pad: target smaller than input");
  Tensor<T> out(Shape{s.n, s.c, h, w});
  // Mirror without repeating the edge sample; periodic for pads past the extent.
  auto reflect = [](int i, int len) {
    if (len == 1) return 0;
    const int period = 2 * (len - 1);
    i %= period;
    return i < len ? i : period - i;
  };
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          out.at(n, c, y, xx) = x.at(n, c, reflect(y, s.h), reflect(xx, s.w));
  return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int h, int w) {
  const Shape& s = x.shape();
  if (h > s.h || w > s.w) throw ShapeError("crop: target larger than input");
  Tensor<T> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        std::copy_n(&x.at(n, c, y, 0), w, &out.at(n, c, y, 0));
  return out;
}

}  // namespace mdn
