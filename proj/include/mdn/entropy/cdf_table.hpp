#pragma once

// Integer CDF tables for the Laplace latent model.
//
// A (mu, b) pair is reduced to a row of a fixed bank: b to one of 64
// logarithmic bins over [kScaleMin, kScaleMax], mu to a multiple of 1/64 split
// into integer base and fraction. A row lists 16-bit frequencies for the
// symbols base+d, d in [lo, lo+count), whose Laplace mass is at least 2^-16,
// plus one escape symbol. Escaped values carry a side decision and a
// Golomb-style excess code whose decisions follow the exact geometric tail of
// the Laplace density; after kMaxTailGroups continuation decisions the value is
// sent as 9 raw bits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "mdn/entropy/laplace.hpp"

namespace mdn {

inline constexpr int kProbBits = 16;
inline constexpr std::uint32_t kProbTotal = 1u << kProbBits;
inline constexpr int kScaleBins = 64;
inline constexpr int kMeanSteps = 64;
inline constexpr int kMaxTailGroups = 8;
inline constexpr int kRawSymbolBits = 9;

struct CdfRow {
  int lo = 0;
  int count = 0;                   // window symbols; index `count` is the escape
  std::uint32_t offset = 0;        // into the bank's cdf pool, count + 2 entries
  std::uint32_t left_freq = 0;     // P(escaped value lies left of the window)
  int golomb_k = 0;                // excess = q * 2^k + r
  std::uint32_t continue_freq = 0; // P(q continues)
  std::array<std::uint32_t, 16> bit_freq{};  // P(bit j of r is 1)
};

inline std::uint32_t prob_to_freq(double p) {
  const double f = std::round(p * kProbTotal);
  return static_cast<std::uint32_t>(std::clamp(f, 1.0, static_cast<double>(kProbTotal - 1)));
}

inline double scale_bin_value(int k) {
  return kScaleMin * std::pow(kScaleMax / kScaleMin, static_cast<double>(k) / (kScaleBins - 1));
}

inline int scale_bin(double b) {
  static const double inv_step = (kScaleBins - 1) / std::log(kScaleMax / kScaleMin);
  const double t = std::log(std::max(b, kScaleMin) / kScaleMin) * inv_step;
  return static_cast<int>(std::clamp(std::lround(t), 0L, static_cast<long>(kScaleBins - 1)));
}

// Largest-remainder quantization of a distribution to kProbTotal with every
// entry at least 1.
inline std::vector<std::uint32_t> quantize_distribution(const std::vector<double>& p) {
  const std::size_t n = p.size();
  std::vector<std::uint32_t> f(n);
  std::vector<double> rem(n);
  long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = p[i] * kProbTotal;
    const double fl = std::floor(t);
    f[i] = static_cast<std::uint32_t>(std::max(1.0, fl));
    rem[i] = t - f[i];
    total += f[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  long diff = static_cast<long>(kProbTotal) - total;
  while (diff > 0) {
    for (std::size_t i = 0; i < n && diff > 0; ++i, --diff) ++f[order[i]];
  }
  while (diff < 0) {
    bool changed = false;
    for (auto it = order.rbegin(); it != order.rend() && diff < 0; ++it) {
      if (f[*it] > 1) {
        --f[*it];
        ++diff;
        changed = true;
      }
    }
    if (!changed) throw ValueError("quantize_distribution: alphabet exceeds probability precision");
  }
  return f;
}

class CdfBank {
 public:
  static const CdfBank& instance() {
    static const CdfBank bank;
    return bank;
  }

  static int row_index(int scale_bin, int mean_step) { return scale_bin * kMeanSteps + mean_step; }

  const CdfRow& row(int index) const { return rows_[static_cast<std::size_t>(index)]; }
  std::size_t size() const { return rows_.size(); }

  // count + 2 cumulative frequencies: cdf[0] = 0, cdf[count + 1] = 2^16.
  std::span<const std::uint32_t> cdf(const CdfRow& r) const {
    return {pool_.data() + r.offset, static_cast<std::size_t>(r.count) + 2};
  }

  // Mean and scale a row was built from.
  static double row_mean(int index) { return static_cast<double>(index % kMeanSteps) / kMeanSteps; }
  static double row_scale(int index) { return scale_bin_value(index / kMeanSteps); }

 private:
  CdfBank() {
    rows_.reserve(kScaleBins * kMeanSteps);
    for (int k = 0; k < kScaleBins; ++k) {
      for (int j = 0; j < kMeanSteps; ++j) rows_.push_back(build_row(scale_bin_value(k), double(j) / kMeanSteps));
    }
  }

  CdfRow build_row(double b, double m) {
    const double floor_mass = 1.0 / kProbTotal;
    const int half = 2 * kSymbolBound;
    const int mode = m >= 0.5 ? 1 : 0;
    int lo = mode;
    int hi = mode;
    while (lo - 1 >= -half && laplace_mass(lo - 1 - m, b) >= floor_mass) --lo;
    while (hi + 1 <= half && laplace_mass(hi + 1 - m, b) >= floor_mass) ++hi;
    // Tail masses beyond the window, computed directly to avoid cancellation.
    const double left = 0.5 * std::exp(-(m - (lo - 0.5)) / b);
    const double right = 0.5 * std::exp(-((hi + 0.5) - m) / b);

    std::vector<double> p;
    p.reserve(static_cast<std::size_t>(hi - lo + 2));
    for (int d = lo; d <= hi; ++d) p.push_back(laplace_mass(d - m, b));
    p.push_back(left + right);
    const auto freq = quantize_distribution(p);

    CdfRow r;
    r.lo = lo;
    r.count = hi - lo + 1;
    r.offset = static_cast<std::uint32_t>(pool_.size());
    std::uint32_t acc = 0;
    pool_.push_back(0);
    for (auto f : freq) pool_.push_back(acc += f);
    if (acc != kProbTotal) throw ValueError("cdf row does not sum to 2^16");

    r.left_freq = prob_to_freq(left / (left + right));
    const double rho_log = -1.0 / b;  // log of the geometric ratio
    r.golomb_k = std::clamp(static_cast<int>(std::lround(std::log2(std::max(1.0, b * std::numbers::ln2)))), 0, 15);
    r.continue_freq = prob_to_freq(std::exp(rho_log * std::ldexp(1.0, r.golomb_k)));
    for (int bit = 0; bit < r.golomb_k; ++bit) {
      const double q = std::exp(rho_log * std::ldexp(1.0, bit));
      r.bit_freq[static_cast<std::size_t>(bit)] = prob_to_freq(q / (1.0 + q));
    }
    return r;
  }

  std::vector<CdfRow> rows_;
  std::vector<std::uint32_t> pool_;
};

// Quantized model parameters of one element: bank row and integer base.
struct SymbolModel {
  std::uint16_t row = 0;
  std::int32_t base = 0;

  bool operator==(const SymbolModel&) const = default;
};

inline SymbolModel symbol_model(double mu, double b) {
  if (!std::isfinite(mu) || !std::isfinite(b)) throw NumericError("symbol_model: non-finite parameters");
  const double limit = 4.0 * kSymbolBound;
  const long steps = std::lround(std::clamp(mu, -limit, limit) * kMeanSteps);
  const long base = steps >= 0 ? steps / kMeanSteps : -((-steps + kMeanSteps - 1) / kMeanSteps);
  const int frac = static_cast<int>(steps - base * kMeanSteps);
  return {static_cast<std::uint16_t>(CdfBank::row_index(scale_bin(b), frac)),
          static_cast<std::int32_t>(base)};
}

// Per-element models for a whole latent tensor.
struct CdfTable {
  Shape shape;
  std::vector<SymbolModel> models;

  std::size_t size() const { return models.size(); }
  bool operator==(const CdfTable&) const = default;
};

template <typename T>
CdfTable build_cdf_table(const Tensor<T>& mu, const Tensor<T>& b) {
  require_same_shape(mu.shape(), b.shape(), "build_cdf_table");
  CdfTable t{mu.shape(), std::vector<SymbolModel>(mu.size())};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    t.models[i] = symbol_model(static_cast<double>(mu[i]), static_cast<double>(b[i]));
  }
  return t;
}

// Table where every element uses the same model.
inline CdfTable uniform_cdf_table(const Shape& shape, double mu, double b) {
  return {shape, std::vector<SymbolModel>(shape.numel(), symbol_model(mu, b))};
}

// One coding decision: a (cum, freq) slice of [0, 2^16).
struct CodeStep {
  std::uint32_t cum;
  std::uint32_t freq;
};

// The decisions that code value s under model m, in order.
template <typename Out>
void symbol_steps(const SymbolModel& m, int s, Out&& out) {
  const CdfBank& bank = CdfBank::instance();
  const CdfRow& r = bank.row(m.row);
  const auto cdf = bank.cdf(r);
  const long d = static_cast<long>(s) - m.base;
  if (d >= r.lo && d < r.lo + r.count) {
    const auto i = static_cast<std::size_t>(d - r.lo);
    out(CodeStep{cdf[i], cdf[i + 1] - cdf[i]});
    return;
  }
  const auto esc = static_cast<std::size_t>(r.count);
  out(CodeStep{cdf[esc], cdf[esc + 1] - cdf[esc]});
  const bool left = d < r.lo;
  out(left ? CodeStep{0, r.left_freq} : CodeStep{r.left_freq, kProbTotal - r.left_freq});
  const long excess = left ? r.lo - 1 - d : d - (r.lo + r.count);
  const long q = excess >> r.golomb_k;
  for (long i = 0; i < std::min<long>(q, kMaxTailGroups); ++i) out(CodeStep{0, r.continue_freq});
  if (q >= kMaxTailGroups) {
    out(CodeStep{static_cast<std::uint32_t>(s + kSymbolBound) << (kProbBits - kRawSymbolBits),
                 1u << (kProbBits - kRawSymbolBits)});
    return;
  }
  out(CodeStep{r.continue_freq, kProbTotal - r.continue_freq});
  for (int bit = r.golomb_k - 1; bit >= 0; --bit) {
    const std::uint32_t f1 = r.bit_freq[static_cast<std::size_t>(bit)];
    out(((excess >> bit) & 1) ? CodeStep{0, f1} : CodeStep{f1, kProbTotal - f1});
  }
}

// Exact code length in bits of s under m (ideal arithmetic coding).
inline double symbol_bits(const SymbolModel& m, int s) {
  double bits = 0;
  symbol_steps(m, s, [&](CodeStep c) { bits += kProbBits - std::log2(static_cast<double>(c.freq)); });
  return bits;
}

inline double table_bits(const CdfTable& table, const QuantizedLatents& q) {
  if (table.shape != q.shape) throw ShapeError("table_bits: table " + table.shape.str() + " vs symbols " + q.shape.str());
  double bits = 0;
  for (std::size_t i = 0; i < q.size(); ++i) bits += symbol_bits(table.models[i], q.values[i]);
  return bits;
}

// Probability the table assigns to value s (product of its decisions).
inline double symbol_probability(const SymbolModel& m, int s) { return std::exp2(-symbol_bits(m, s)); }

// Checks the invariants of every bank row; throws on violation.
inline void validate_bank(const CdfBank& bank) {
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const CdfRow& r = bank.row(static_cast<int>(i));
    const auto cdf = bank.cdf(r);
    if (cdf.front() != 0 || cdf.back() != kProbTotal) throw ValueError("cdf row " + std::to_string(i) + " not normalized");
    for (std::size_t k = 1; k < cdf.size(); ++k) {
      if (cdf[k] <= cdf[k - 1]) throw ValueError("cdf row " + std::to_string(i) + " not strictly increasing");
    }
  }
}

}  // namespace mdn
