#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "mdn/core/autograd.hpp"

namespace mdn {

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* what) {
  auto dim = [&](int x, int y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(std::string(what) + ": cannot broadcast " + a.str() + " with " + b.str());
  };
  return Shape{dim(a.n, b.n), dim(a.c, b.c), dim(a.h, b.h), dim(a.w, b.w)};
}

inline std::array<std::size_t, 4> broadcast_strides(const Shape& s) {
  std::array<std::size_t, 4> st{s.sample(), s.plane(), static_cast<std::size_t>(s.w), 1};
  if (s.n == 1) st[0] = 0;
  if (s.c == 1) st[1] = 0;
  if (s.h == 1) st[2] = 0;
  if (s.w == 1) st[3] = 0;
  return st;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  if (a == out && b == out) {
    for (std::size_t i = 0; i < out.numel(); ++i) f(i, i, i);
    return;
  }
  auto sa = broadcast_strides(a);
  auto sb = broadcast_strides(b);
  std::size_t o = 0;
  for (int n = 0; n < out.n; ++n)
    for (int c = 0; c < out.c; ++c)
      for (int y = 0; y < out.h; ++y) {
        std::size_t ia = n * sa[0] + c * sa[1] + y * sa[2];
        std::size_t ib = n * sb[0] + c * sb[1] + y * sb[2];
        for (int x = 0; x < out.w; ++x, ++o) f(o, ia + x * sa[3], ib + x * sb[3]);
      }
}

// Generic binary op. da/db give the local partials given (a, b, out).
template <typename T, typename Fwd, typename Da, typename Db>
Var<T> binary(const Var<T>& a, const Var<T>& b, const char* what, Fwd fwd, Da da, Db db) {
  const Shape os = broadcast_shape(a.shape(), b.shape(), what);
  Tensor<T> out(os);
  const auto& av = a.value();
  const auto& bv = b.value();
  for_each_broadcast(os, av.shape(), bv.shape(),
                     [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = fwd(av[i], bv[j]); });
  return make_result<T>(std::move(out), {&a, &b}, [a, b, da, db](Node<T>& self) mutable {
    const auto& g = self.grad;
    const auto& av = a.value();
    const auto& bv = b.value();
    if (a.requires_grad()) {
      auto& ga = a.grad_ref();
      for_each_broadcast(self.value.shape(), av.shape(), bv.shape(),
                         [&](std::size_t o, std::size_t i, std::size_t j) {
                           ga[i] += g[o] * da(av[i], bv[j], self.value[o]);
                         });
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_ref();
      for_each_broadcast(self.value.shape(), av.shape(), bv.shape(),
                         [&](std::size_t o, std::size_t i, std::size_t j) {
                           gb[j] += g[o] * db(av[i], bv[j], self.value[o]);
                         });
    }
  });
}

template <typename T, typename Fwd, typename D>
Var<T> unary(const Var<T>& a, Fwd fwd, D d) {
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return make_result<T>(std::move(out), {&a}, [a, d](Node<T>& self) mutable {
    auto& ga = a.grad_ref();
    const auto& av = a.value();
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += self.grad[i] * d(av[i], self.value[i]);
  });
}

}  // namespace detail

template <typename T>
Var<T> constant(Tensor<T> t) {
  return Var<T>(std::move(t), false);
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(1); });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(-1); });
}

// Elementwise product; a 1-channel operand broadcasts over every channel.
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      a, b, "div", [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T o) { return -o / y; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  return detail::unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
  return detail::unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

// s - a
template <typename T>
Var<T> rsub_scalar(T s, const Var<T>& a) {
  return detail::unary(a, [s](T x) { return s - x; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return detail::unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
  return detail::unary(a, [](T x) { return std::sqrt(x); }, [](T, T o) { return T(0.5) / o; });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return detail::unary(a, [](T x) { return std::exp(x); }, [](T, T o) { return o; });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  return detail::unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
T softplus_value(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

template <typename T>
Var<T> softplus(const Var<T>& a) {
  return detail::unary(a, [](T x) { return softplus_value(x); },
                       [](T x, T) { return T(1) / (T(1) + std::exp(-x)); });
}

// x^e for x > 0.
template <typename T>
Var<T> pow_scalar(const Var<T>& a, T e) {
  return detail::unary(a, [e](T x) { return std::pow(x, e); },
                       [e](T x, T o) { return e * o / x; });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope = T(0.01)) {
  if (!(slope > T(0) && slope < T(1))) throw ValueError("leaky_relu: slope must lie in (0,1)");
  return detail::unary(a, [slope](T x) { return x >= T(0) ? x : slope * x; },
                       [slope](T x, T) { return x >= T(0) ? T(1) : slope; });
}

// Clamp into [lo, hi]. The gradient is zero outside the range unless
// straight_through is set, in which case it is the identity everywhere.
template <typename T>
Var<T> clip(const Var<T>& a, T lo, T hi, bool straight_through = false) {
  if (lo > hi) throw ValueError("clip: lo > hi");
  return detail::unary(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                       [lo, hi, straight_through](T x, T) {
                         return (straight_through || (x >= lo && x <= hi)) ? T(1) : T(0);
                       });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().vec()) s += v;
  return make_result<T>(Tensor<T>::scalar(s), {&a}, [a](Node<T>& self) mutable {
    auto& ga = a.grad_ref();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return mul_scalar(sum(a), T(1) / static_cast<T>(a.value().size()));
}

// Mean over H and W: NxCxHxW -> NxCx1x1.
template <typename T>
Var<T> mean_hw(const Var<T>& a) {
  const Shape s = a.shape();
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  const std::size_t hw = s.plane();
  for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
    T acc = 0;
    const T* src = a.value().data() + p * hw;
    for (std::size_t i = 0; i < hw; ++i) acc += src[i];
    out[p] = acc / static_cast<T>(hw);
  }
  return make_result<T>(std::move(out), {&a}, [a, hw](Node<T>& self) mutable {
    auto& ga = a.grad_ref();
    for (std::size_t p = 0; p < self.grad.size(); ++p) {
      const T g = self.grad[p] / static_cast<T>(hw);
      T* dst = ga.data() + p * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] += g;
    }
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat: N/H/W must agree, got " + sa.str() + " and " + sb.str());
  }
  Tensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().data() + n * sa.sample(), sa.sample(), &out.at(n, 0, 0, 0));
    std::copy_n(b.value().data() + n * sb.sample(), sb.sample(), &out.at(n, sa.c, 0, 0));
  }
  return make_result<T>(std::move(out), {&a, &b}, [a, b](Node<T>& self) mutable {
    const Shape sa = a.shape();
    const Shape sb = b.shape();
    for (int n = 0; n < sa.n; ++n) {
      if (a.requires_grad()) {
        T* dst = a.grad_ref().data() + n * sa.sample();
        const T* src = &self.grad.at(n, 0, 0, 0);
        for (std::size_t i = 0; i < sa.sample(); ++i) dst[i] += src[i];
      }
      if (b.requires_grad()) {
        T* dst = b.grad_ref().data() + n * sb.sample();
        const T* src = &self.grad.at(n, sa.c, 0, 0);
        for (std::size_t i = 0; i < sb.sample(); ++i) dst[i] += src[i];
      }
    }
  });
}

// Channels [begin, begin + count).
template <typename T>
Var<T> slice_channels(const Var<T>& a, int begin, int count) {
  const Shape s = a.shape();
  if (begin < 0 || count <= 0 || begin + count > s.c) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of " + s.str());
  }
  Tensor<T> out(Shape{s.n, count, s.h, s.w});
  const std::size_t len = static_cast<std::size_t>(count) * s.plane();
  for (int n = 0; n < s.n; ++n) std::copy_n(&a.value().at(n, begin, 0, 0), len, &out.at(n, 0, 0, 0));
  return make_result<T>(std::move(out), {&a}, [a, begin, len](Node<T>& self) mutable {
    auto& ga = a.grad_ref();
    for (int n = 0; n < self.value.shape().n; ++n) {
      T* dst = &ga.at(n, begin, 0, 0);
      const T* src = &self.grad.at(n, 0, 0, 0);
      for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
    }
  });
}

// 2x2 average pooling with stride 2; odd trailing rows/columns are dropped.
template <typename T>
Var<T> avg_pool2(const Var<T>& a) {
  const Shape s = a.shape();
  const int h = s.h / 2;
  const int w = s.w / 2;
  if (h == 0 || w == 0) throw ShapeError("avg_pool2: input too small " + s.str());
  Tensor<T> out(Shape{s.n, s.c, h, w});
  const auto& v = a.value();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.at(n, c, y, x) = T(0.25) * (v.at(n, c, 2 * y, 2 * x) + v.at(n, c, 2 * y, 2 * x + 1) +
                                          v.at(n, c, 2 * y + 1, 2 * x) +
                                          v.at(n, c, 2 * y + 1, 2 * x + 1));
  return make_result<T>(std::move(out), {&a}, [a](Node<T>& self) mutable {
    auto& ga = a.grad_ref();
    const Shape o = self.value.shape();
    for (int n = 0; n < o.n; ++n)
      for (int c = 0; c < o.c; ++c)
        for (int y = 0; y < o.h; ++y)
          for (int x = 0; x < o.w; ++x) {
            const T g = T(0.25) * self.grad.at(n, c, y, x);
            ga.at(n, c, 2 * y, 2 * x) += g;
            ga.at(n, c, 2 * y, 2 * x + 1) += g;
            ga.at(n, c, 2 * y + 1, 2 * x) += g;
            ga.at(n, c, 2 * y + 1, 2 * x + 1) += g;
          }
  });
}

// Depthwise separable filtering with a symmetric 1-D kernel, valid padding.
template <typename T>
Var<T> separable_filter_valid(const Var<T>& a, std::vector<T> taps) {
  const Shape s = a.shape();
  const int k = static_cast<int>(taps.size());
  if (s.h < k || s.w < k) {
    throw ShapeError("separable_filter_valid: input " + s.str() + " smaller than window " +
                     std::to_string(k));
  }
  const int ho = s.h - k + 1;
  const int wo = s.w - k + 1;
  const int planes = s.n * s.c;
  // Horizontal pass into (H x Wo), then vertical into (Ho x Wo).
  auto forward_plane = [&](const T* src, T* tmp, T* dst) {
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < wo; ++x) {
        T acc = 0;
        for (int t = 0; t < k; ++t) acc += taps[t] * src[y * s.w + x + t];
        tmp[y * wo + x] = acc;
      }
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        T acc = 0;
        for (int t = 0; t < k; ++t) acc += taps[t] * tmp[(y + t) * wo + x];
        dst[y * wo + x] = acc;
      }
  };
  Tensor<T> out(Shape{s.n, s.c, ho, wo});
  std::vector<T> tmp(static_cast<std::size_t>(s.h) * wo);
  for (int p = 0; p < planes; ++p) {
    forward_plane(a.value().data() + p * s.plane(), tmp.data(),
                  out.data() + static_cast<std::size_t>(p) * ho * wo);
  }
  return make_result<T>(std::move(out), {&a}, [a, taps, k, ho, wo](Node<T>& self) mutable {
    const Shape s = a.shape();
    auto& ga = a.grad_ref();
    std::vector<T> tmp(static_cast<std::size_t>(s.h) * wo);
    for (int p = 0; p < s.n * s.c; ++p) {
      const T* g = self.grad.data() + static_cast<std::size_t>(p) * ho * wo;
      std::fill(tmp.begin(), tmp.end(), T(0));
      for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
          const T gv = g[y * wo + x];
          for (int t = 0; t < k; ++t) tmp[(y + t) * wo + x] += taps[t] * gv;
        }
      T* dst = ga.data() + p * s.plane();
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < wo; ++x) {
          const T gv = tmp[y * wo + x];
          for (int t = 0; t < k; ++t) dst[y * s.w + x + t] += taps[t] * gv;
        }
    }
  });
}

}  // namespace mdn
