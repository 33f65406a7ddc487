#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mdn/core/ops.hpp"
#include "mdn/core/random.hpp"

namespace mdn {

// Lower bound on the Laplace scale.
inline constexpr double kScaleMin = 0.011;
// Upper end of the coder's scale bins; larger scales are coded with this one.
inline constexpr double kScaleMax = 16.0;
// Quantized latents must lie in [-kSymbolBound, kSymbolBound].
inline constexpr int kSymbolBound = 255;
// Probability floor of the rate model, 2^-16, i.e. 16 bits per element.
inline constexpr double kMaxBitsPerSymbol = 16.0;

// Mass of the unit-width bin centred at distance d >= 0 from the mean of a
// Laplace(0, b), in the natural log domain. Stable for large d and small b.
inline double laplace_log_mass(double d, double b) {
  d = std::abs(d);
  if (d >= 0.5) {
    return std::log(0.5) - (d - 0.5) / b + std::log(-std::expm1(-1.0 / b));
  }
  return std::log1p(-0.5 * (std::exp(-(0.5 - d) / b) + std::exp(-(0.5 + d) / b)));
}

inline double laplace_mass(double d, double b) { return std::exp(laplace_log_mass(d, b)); }

inline double laplace_cdf(double x, double mu, double b) {
  const double z = (x - mu) / b;
  return z < 0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

struct RateStats {
  std::uint64_t floored = 0;
};

// Per-element bits  -log2( L(y+.5) - L(y-.5) )  for Laplace(mu, b). The value is
// capped at 16 bits (mass floored at 2^-16, counted in stats); the gradient is
// that of the uncapped log-mass so a floored element still pulls toward its
// mean.
template <typename T>
Var<T> laplace_bits(const Var<T>& y, const Var<T>& mu, const Var<T>& b, RateStats* stats = nullptr) {
  require_same_shape(y.shape(), mu.shape(), "laplace_bits(y, mu)");
  require_same_shape(y.shape(), b.shape(), "laplace_bits(y, b)");
  const std::size_t n = y.value().size();
  Tensor<T> bits(y.shape());
  // Partials of the bits w.r.t. (y - mu) and b.
  Tensor<T> d_diff(y.shape());
  Tensor<T> d_scale(y.shape());
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(y.value()[i]) - static_cast<double>(mu.value()[i]);
    const double s = static_cast<double>(b.value()[i]);
    if (std::isnan(s) || std::isnan(u)) throw NumericError("laplace_bits: NaN input");
    if (!(s > 0)) throw ValueError("laplace_bits: scale must be positive");
    const double d = std::abs(u);
    const double sign = u >= 0 ? 1.0 : -1.0;
    double logp;
    double dlogp_dd;
    double dlogp_db;
    if (d >= 0.5) {
      logp = laplace_log_mass(d, s);
      dlogp_dd = -1.0 / s;
      dlogp_db = (d - 0.5) / (s * s) - 1.0 / (s * s * std::expm1(1.0 / s));
    } else {
      const double a = std::exp(-(0.5 - d) / s);
      const double c = std::exp(-(0.5 + d) / s);
      const double p = -0.5 * std::expm1(-(0.5 - d) / s) - 0.5 * std::expm1(-(0.5 + d) / s);
      logp = std::log1p(-0.5 * (a + c));
      dlogp_dd = (c - a) / (2.0 * s) / p;
      dlogp_db = (-0.5 * a * (0.5 - d) - 0.5 * c * (0.5 + d)) / (s * s) / p;
    }
    double v = -logp * inv_ln2;
    if (v > kMaxBitsPerSymbol) {
      v = kMaxBitsPerSymbol;
      if (stats) ++stats->floored;
    }
    bits[i] = static_cast<T>(v);
    d_diff[i] = static_cast<T>(-dlogp_dd * sign * inv_ln2);
    d_scale[i] = static_cast<T>(-dlogp_db * inv_ln2);
  }
  return make_result<T>(std::move(bits), {&y, &mu, &b},
                        [y, mu, b, d_diff = std::move(d_diff), d_scale = std::move(d_scale)](Node<T>& self) {
    const std::size_t n = self.grad.size();
    if (y.requires_grad()) {
      auto& g = y.grad_ref();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * d_diff[i];
    }
    if (mu.requires_grad()) {
      auto& g = mu.grad_ref();
      for (std::size_t i = 0; i < n; ++i) g[i] -= self.grad[i] * d_diff[i];
    }
    if (b.requires_grad()) {
      auto& g = b.grad_ref();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * d_scale[i];
    }
  });
}

// Sum of laplace_bits over all elements.
template <typename T>
Var<T> rate_estimate(const Var<T>& y, const Var<T>& mu, const Var<T>& b, RateStats* stats = nullptr) {
  return sum(laplace_bits(y, mu, b, stats));
}

// b = b_min + softplus(raw).
template <typename T>
Var<T> scale_from_raw(const Var<T>& raw) {
  return add_scalar(softplus(raw), static_cast<T>(kScaleMin));
}

// Training-time quantization proxy: y + U(-0.5, 0.5), identity gradient.
template <typename T>
Var<T> quantize_train(const Var<T>& y, Rng& rng) {
  Tensor<T> noise(y.shape());
  for (auto& v : noise.vec()) v = static_cast<T>(rng.uniform() - 0.5);
  return add(y, constant(std::move(noise)));
}

struct QuantizedLatents {
  Shape shape;
  std::vector<std::int32_t> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const QuantizedLatents&) const = default;

  template <typename T>
  Tensor<T> to_tensor() const {
    Tensor<T> t(shape);
    for (std::size_t i = 0; i < values.size(); ++i) t[i] = static_cast<T>(values[i]);
    return t;
  }
};

// Round half away from zero; values beyond the symbol bound are an error.
template <typename T>
QuantizedLatents quantize_infer(const Tensor<T>& y, int bound = kSymbolBound) {
  QuantizedLatents q{y.shape(), std::vector<std::int32_t>(y.size())};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = static_cast<double>(y[i]);
    if (!std::isfinite(v)) throw NumericError("quantize_infer: non-finite latent");
    const double r = std::round(v);
    if (std::abs(r) > bound) {
      throw RangeError("quantize_infer: latent " + std::to_string(v) + " at index " +
                       std::to_string(i) + " rounds outside [-" + std::to_string(bound) + ", " +
                       std::to_string(bound) + "]");
    }
    q.values[i] = static_cast<std::int32_t>(r);
  }
  return q;
}

}  // namespace mdn
