#pragma once

#include <algorithm>
#include <utility>

#include <Eigen/Core>

#include "mdn/core/ops.hpp"

namespace mdn {

enum class MaskType { None, CausalExclusive, CausalInclusive };

// Geometry of one convolution layer. Weight layout is F x C x k x k for
// regular convolutions and C_in x C_out x k x k for transposed ones.
struct ConvSpec {
  int filters = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int output_padding = 0;
  bool transposed = false;
  MaskType mask = MaskType::None;

  void validate() const {
    if (filters <= 0 || kernel <= 0) throw ValueError("ConvSpec: filters and kernel must be positive");
    if (stride < 1) throw ValueError("ConvSpec: stride must be >= 1");
    if (padding < 0) throw ValueError("ConvSpec: padding must be >= 0");
    if (output_padding < 0 || (output_padding >= stride && output_padding > 0)) {
      throw ValueError("ConvSpec: output_padding must lie in [0, stride)");
    }
    if (mask != MaskType::None && kernel % 2 == 0) {
      throw ValueError("ConvSpec: masked convolution needs an odd kernel, got " +
                       std::to_string(kernel));
    }
    if (mask != MaskType::None && transposed) {
      throw ValueError("ConvSpec: masked transposed convolution is not supported");
    }
  }

  int out_extent(int in) const {
    return transposed ? (in - 1) * stride - 2 * padding + kernel + output_padding
                      : (in + 2 * padding - kernel) / stride + 1;
  }
};

// Standard 5x5 stride-2 "same" layers used throughout the transforms.
inline ConvSpec down_spec(int filters, int kernel = 5) {
  return ConvSpec{filters, kernel, 2, kernel / 2, 0, false, MaskType::None};
}
inline ConvSpec up_spec(int filters, int kernel = 5) {
  return ConvSpec{filters, kernel, 2, kernel / 2, 1, true, MaskType::None};
}
inline ConvSpec same_spec(int filters, int kernel) {
  return ConvSpec{filters, kernel, 1, kernel / 2, 0, false, MaskType::None};
}

// Raster-order spatial mask over a k x k kernel: rows above the centre and
// columns left of it on the centre row; the inclusive variant also keeps the
// centre tap. Applied identically to every (filter, channel) pair.
template <typename T>
Tensor<T> causal_mask(int filters, int channels, int kernel, MaskType type) {
  Tensor<T> m(Shape{filters, channels, kernel, kernel});
  const int c0 = kernel / 2;
  for (int f = 0; f < filters; ++f)
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < kernel; ++y)
        for (int x = 0; x < kernel; ++x) {
          bool keep = y < c0 || (y == c0 && x < c0) ||
                      (type == MaskType::CausalInclusive && y == c0 && x == c0);
          if (type == MaskType::None) keep = true;
          m.at(f, c, y, x) = keep ? T(1) : T(0);
        }
  return m;
}

namespace detail {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Geometry {
  int channels, h, w, kernel, stride, padding, oh, ow;

  // Output columns [lo, hi) whose input column ox*stride - padding + kx is in range.
  std::pair<int, int> valid_cols(int kx) const {
    const int off = kx - padding;
    int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
    int hi = (w - 1 - off) < 0 ? 0 : (w - 1 - off) / stride + 1;
    lo = std::min(lo, ow);
    hi = std::clamp(hi, lo, ow);
    return {lo, hi};
  }
};

// cols[(c*k + ky)*k + kx][oy*ow + ox] = img[c][oy*s - p + ky][ox*s - p + kx],
// rows `ld` apart (several samples can share one column matrix).
template <typename T>
void im2col(const T* img, const Geometry& g, T* cols, std::size_t ld) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * ld;
        const auto [lo, hi] = g.valid_cols(kx);
        const int off = kx - g.padding;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.ow, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * g.h + iy) * g.w + off;
          std::fill_n(dst, lo, T(0));
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride];
          }
          std::fill(dst + hi, dst + g.ow, T(0));
        }
      }
}

template <typename T>
void col2im(const T* cols, const Geometry& g, T* img, std::size_t ld) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * ld;
        const auto [lo, hi] = g.valid_cols(kx);
        const int off = kx - g.padding;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.ow;
          T* dst = img + (static_cast<std::size_t>(c) * g.h + iy) * g.w + off;
          if (g.stride == 1) {
            for (int ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride] += src[ox];
          }
        }
      }
}

// Samples per GEMM so that one column block stays around 16k positions.
inline int group_size(int batch, std::size_t positions) {
  const std::size_t cap = 16384;
  return static_cast<int>(std::clamp<std::size_t>(cap / std::max<std::size_t>(positions, 1), 1, batch));
}

// NCHW samples [n0, n0+m) -> channels x (m*plane), and back.
template <typename T>
void gather_group(const T* src, int channels, std::size_t plane, int n0, int m, T* dst) {
  const std::size_t ld = static_cast<std::size_t>(m) * plane;
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < channels; ++c)
      std::copy_n(src + (static_cast<std::size_t>(n0 + j) * channels + c) * plane, plane,
                  dst + static_cast<std::size_t>(c) * ld + static_cast<std::size_t>(j) * plane);
}

template <typename T>
void scatter_group(const T* src, int channels, std::size_t plane, int n0, int m, T* dst, bool accumulate) {
  const std::size_t ld = static_cast<std::size_t>(m) * plane;
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < channels; ++c) {
      const T* s = src + static_cast<std::size_t>(c) * ld + static_cast<std::size_t>(j) * plane;
      T* d = dst + (static_cast<std::size_t>(n0 + j) * channels + c) * plane;
      if (accumulate) {
        for (std::size_t i = 0; i < plane; ++i) d[i] += s[i];
      } else {
        std::copy_n(s, plane, d);
      }
    }
}

inline bool is_pointwise(const Geometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.padding == 0;
}

template <typename T>
void add_bias(T* out, const T* bias, int filters, std::size_t npos) {
  for (int f = 0; f < filters; ++f) {
    T* row = out + static_cast<std::size_t>(f) * npos;
    for (std::size_t i = 0; i < npos; ++i) row[i] += bias[f];
  }
}

template <typename T>
void accumulate_bias_grad(const T* g, int filters, std::size_t npos, T* gbias) {
  for (int f = 0; f < filters; ++f) {
    const T* row = g + static_cast<std::size_t>(f) * npos;
    T acc = 0;
    for (std::size_t i = 0; i < npos; ++i) acc += row[i];
    gbias[f] += acc;
  }
}

// Column matrix of samples [n0, n0+m) of a forward convolution.
template <typename T>
void build_cols(const T* x, const Geometry& g, int n0, int m, MatR<T>& cols) {
  const std::size_t npos = static_cast<std::size_t>(g.oh) * g.ow;
  const std::size_t ckk = static_cast<std::size_t>(g.channels) * g.kernel * g.kernel;
  const std::size_t sample = static_cast<std::size_t>(g.channels) * g.h * g.w;
  cols.resize(static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(m * npos));
  if (is_pointwise(g)) {
    gather_group(x, g.channels, npos, n0, m, cols.data());
    return;
  }
  for (int j = 0; j < m; ++j) im2col(x + (n0 + j) * sample, g, cols.data() + j * npos, m * npos);
}

}  // namespace detail

// Cross-correlation. weight: F x C x k x k, bias: 1 x F x 1 x 1 or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: non-square kernel " + ws.str());
  if (xs.c != ws.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels but weight " +
                     ws.str() + " expects " + std::to_string(ws.c));
  }
  if (bias.defined() && bias.shape() != Shape{1, ws.n, 1, 1}) {
    throw ShapeError("conv2d: bias " + bias.shape().str() + " does not match " +
                     std::to_string(ws.n) + " filters");
  }
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
  const int k = ws.h;
  const int oh = (xs.h + 2 * padding - k) / stride + 1;
  const int ow = (xs.w + 2 * padding - k) / stride + 1;
  if (xs.h + 2 * padding < k || xs.w + 2 * padding < k || oh <= 0 || ow <= 0) {
    throw ShapeError("conv2d: input " + xs.str() + " too small for kernel " + std::to_string(k) +
                     " with padding " + std::to_string(padding));
  }
  const detail::Geometry g{xs.c, xs.h, xs.w, k, stride, padding, oh, ow};
  const int F = ws.n;
  const std::size_t npos = static_cast<std::size_t>(oh) * ow;
  const std::size_t ckk = static_cast<std::size_t>(xs.c) * k * k;
  const int gs = detail::group_size(xs.n, npos);

  Tensor<T> out(Shape{xs.n, F, oh, ow});
  {
    Eigen::Map<const detail::MatR<T>> W(weight.value().data(), F, ckk);
    detail::MatR<T> cols, res;
    for (int n0 = 0; n0 < xs.n; n0 += gs) {
      const int m = std::min(gs, xs.n - n0);
      detail::build_cols(x.value().data(), g, n0, m, cols);
      res.noalias() = W * cols;
      detail::scatter_group(res.data(), F, npos, n0, m, out.data(), false);
    }
    if (bias.defined()) {
      for (int n = 0; n < xs.n; ++n) {
        detail::add_bias(out.data() + n * static_cast<std::size_t>(F) * npos, bias.value().data(), F, npos);
      }
    }
  }

  return make_result<T>(std::move(out), {&x, &weight, &bias},
                        [x, weight, bias, g, F, npos, ckk, gs](Node<T>& self) mutable {
    const Shape xs = x.shape();
    Eigen::Map<const detail::MatR<T>> W(weight.value().data(), F, ckk);
    detail::MatR<T> cols, G, dcols;
    for (int n0 = 0; n0 < xs.n; n0 += gs) {
      const int m = std::min(gs, xs.n - n0);
      G.resize(F, static_cast<Eigen::Index>(m * npos));
      detail::gather_group(self.grad.data(), F, npos, n0, m, G.data());
      if (weight.requires_grad()) {
        detail::build_cols(x.value().data(), g, n0, m, cols);
        Eigen::Map<detail::MatR<T>>(weight.grad_ref().data(), F, ckk).noalias() += G * cols.transpose();
      }
      if (x.requires_grad()) {
        dcols.noalias() = W.transpose() * G;
        T* gx = x.grad_ref().data();
        if (detail::is_pointwise(g)) {
          detail::scatter_group(dcols.data(), xs.c, npos, n0, m, gx, true);
        } else {
          for (int j = 0; j < m; ++j) {
            detail::col2im(dcols.data() + j * npos, g, gx + (n0 + j) * xs.sample(), m * npos);
          }
        }
      }
    }
    if (bias.defined() && bias.requires_grad()) {
      for (int n = 0; n < xs.n; ++n) {
        detail::accumulate_bias_grad(self.grad.data() + n * static_cast<std::size_t>(F) * npos, F, npos,
                                     bias.grad_ref().data());
      }
    }
  });
}

// Transposed convolution (adjoint of conv2d). weight: C_in x C_out x k x k.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
                        int padding, int output_padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv_transpose2d: non-square kernel " + ws.str());
  if (xs.c != ws.n) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(xs.c) +
                     " channels but weight " + ws.str() + " expects " + std::to_string(ws.n));
  }
  if (bias.defined() && bias.shape() != Shape{1, ws.c, 1, 1}) {
    throw ShapeError("conv_transpose2d: bias " + bias.shape().str() + " does not match " +
                     std::to_string(ws.c) + " outputs");
  }
  if (stride < 1) throw ValueError("conv_transpose2d: stride must be >= 1");
  if (output_padding < 0 || (output_padding > 0 && output_padding >= stride)) {
    throw ValueError("conv_transpose2d: output_padding must lie in [0, stride)");
  }
  const int k = ws.h;
  const int cout = ws.c;
  const int oh = (xs.h - 1) * stride - 2 * padding + k + output_padding;
  const int ow = (xs.w - 1) * stride - 2 * padding + k + output_padding;
  if (oh <= 0 || ow <= 0) {
    throw ShapeError("conv_transpose2d: non-positive output extent for input " + xs.str());
  }
  // Geometry of the equivalent forward convolution mapping output -> input.
  const detail::Geometry g{cout, oh, ow, k, stride, padding, xs.h, xs.w};
  const std::size_t nin = xs.plane();
  const std::size_t okk = static_cast<std::size_t>(cout) * k * k;
  const int gs = detail::group_size(xs.n, nin);

  Tensor<T> out(Shape{xs.n, cout, oh, ow});
  {
    Eigen::Map<const detail::MatR<T>> W(weight.value().data(), xs.c, okk);
    detail::MatR<T> X, cols;
    for (int n0 = 0; n0 < xs.n; n0 += gs) {
      const int m = std::min(gs, xs.n - n0);
      X.resize(xs.c, static_cast<Eigen::Index>(m * nin));
      detail::gather_group(x.value().data(), xs.c, nin, n0, m, X.data());
      cols.noalias() = W.transpose() * X;
      for (int j = 0; j < m; ++j) {
        detail::col2im(cols.data() + j * nin, g, out.data() + (n0 + j) * out.shape().sample(), m * nin);
      }
    }
    if (bias.defined()) {
      for (int n = 0; n < xs.n; ++n) {
        detail::add_bias(out.data() + n * out.shape().sample(), bias.value().data(), cout, out.shape().plane());
      }
    }
  }

  return make_result<T>(std::move(out), {&x, &weight, &bias},
                        [x, weight, bias, g, nin, okk, gs](Node<T>& self) mutable {
    const Shape xs = x.shape();
    const Shape os = self.value.shape();
    Eigen::Map<const detail::MatR<T>> W(weight.value().data(), xs.c, okk);
    detail::MatR<T> cols, X, GX;
    for (int n0 = 0; n0 < xs.n; n0 += gs) {
      const int m = std::min(gs, xs.n - n0);
      cols.resize(static_cast<Eigen::Index>(okk), static_cast<Eigen::Index>(m * nin));
      for (int j = 0; j < m; ++j) {
        detail::im2col(self.grad.data() + (n0 + j) * os.sample(), g, cols.data() + j * nin, m * nin);
      }
      if (weight.requires_grad()) {
        X.resize(xs.c, static_cast<Eigen::Index>(m * nin));
        detail::gather_group(x.value().data(), xs.c, nin, n0, m, X.data());
        Eigen::Map<detail::MatR<T>>(weight.grad_ref().data(), xs.c, okk).noalias() += X * cols.transpose();
      }
      if (x.requires_grad()) {
        GX.noalias() = W * cols;
        detail::scatter_group(GX.data(), xs.c, nin, n0, m, x.grad_ref().data(), true);
      }
    }
    if (bias.defined() && bias.requires_grad()) {
      for (int n = 0; n < xs.n; ++n) {
        detail::accumulate_bias_grad(self.grad.data() + n * os.sample(), os.c, os.plane(), bias.grad_ref().data());
      }
    }
  });
}

// Convolution with a raster-causal spatial mask applied to the weights.
template <typename T>
Var<T> masked_conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, MaskType type) {
  const Shape ws = weight.shape();
  if (type == MaskType::None) throw ValueError("masked_conv2d: mask type must not be None");
  if (ws.h % 2 == 0) {
    throw ValueError("masked_conv2d: kernel must be odd, got " + std::to_string(ws.h));
  }
  Var<T> mask = constant(causal_mask<T>(ws.n, ws.c, ws.h, type));
  return conv2d(x, mul(weight, mask), bias, 1, ws.h / 2);
}

// Dispatches on a ConvSpec.
template <typename T>
Var<T> conv(const Var<T>& x, const ConvSpec& spec, const Var<T>& weight, const Var<T>& bias) {
  spec.validate();
  if (spec.mask != MaskType::None) {
    if (spec.stride != 1 || spec.padding != spec.kernel / 2) {
      throw ValueError("conv: masked convolution requires stride 1 and same padding");
    }
    return masked_conv2d(x, weight, bias, spec.mask);
  }
  if (spec.transposed) {
    return conv_transpose2d(x, weight, bias, spec.stride, spec.padding, spec.output_padding);
  }
  return conv2d(x, weight, bias, spec.stride, spec.padding);
}

}  // namespace mdn
