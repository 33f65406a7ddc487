#pragma once

// Plug-in Shannon entropies of a paired discrete source (x, xp), where xp is
// the prediction available at both ends. Histograms are exact, so alphabets
// are limited to kOracleAlphabet values per variable.

#include <cmath>
#include <map>
#include <span>
#include <utility>

#include "mdn/core/error.hpp"

namespace mdn {

inline constexpr int kOracleAlphabet = 64;

struct EntropyEstimates {
  double h_x = 0;     // H(x)
  double h_diff = 0;  // H(x - xp)
  double h_cond = 0;  // H(x | xp) = H(x, xp) - H(xp)
};

namespace detail {
template <typename Map>
double plugin_entropy(const Map& counts, double n) {
  double h = 0;
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}
}  // namespace detail

inline EntropyEstimates empirical_entropy_oracle(std::span<const int> x, std::span<const int> xp) {
  if (x.empty()) throw ValueError("entropy oracle: empty sample set");
  if (x.size() != xp.size()) throw ShapeError("entropy oracle: x and prediction differ in length");
  std::map<int, long> cx, cxp, cd;
  std::map<std::pair<int, int>, long> joint;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++cx[x[i]];
    ++cxp[xp[i]];
    ++cd[x[i] - xp[i]];
    ++joint[{x[i], xp[i]}];
  }
  if (cx.size() > kOracleAlphabet || cxp.size() > kOracleAlphabet) {
    throw ValueError("entropy oracle: alphabet larger than " + std::to_string(kOracleAlphabet) + " values");
  }
  const double n = static_cast<double>(x.size());
  EntropyEstimates e;
  e.h_x = detail::plugin_entropy(cx, n);
  e.h_diff = detail::plugin_entropy(cd, n);
  e.h_cond = detail::plugin_entropy(joint, n) - detail::plugin_entropy(cxp, n);
  return e;
}

}  // namespace mdn
