#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mdn/core/ops.hpp"
#include "mdn/core/random.hpp"

namespace mdn::test {

inline Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

template <typename T>
Tensor<T> random_tensor_t(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

using VarFn = std::function<Var<double>(const std::vector<Var<double>>&)>;

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t probes = 0;
};

// Compares reverse-mode gradients of  sum(f(inputs) * R)  (R a fixed random
// projection) against central differences. `max_probes` limits the number of
// elements checked per input (0 = all); probed indices are chosen at random.
inline GradCheckResult grad_check(const std::vector<Tensor<double>>& inputs, const VarFn& f, Rng& rng,
                                  std::size_t max_probes = 0, double eps = 1e-6) {
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.emplace_back(t, true);
  Var<double> out = f(vars);
  Tensor<double> proj(out.shape());
  for (auto& v : proj.vec()) v = rng.uniform(-1.0, 1.0);
  backward(sum(mul(out, constant(proj))));

  auto eval = [&](std::size_t which, std::size_t idx, double delta) {
    NoGradGuard guard;
    std::vector<Var<double>> vs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      Tensor<double> t = inputs[k];
      if (k == which) t[idx] += delta;
      vs.emplace_back(std::move(t), false);
    }
    const auto o = f(vs).value();
    double s = 0;
    for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * proj[i];
    return s;
  };

  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t n = inputs[k].size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (max_probes > 0 && max_probes < n) {
      for (std::size_t i = 0; i < max_probes; ++i) {
        std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n - i - 1)))]);
      }
      idx.resize(max_probes);
    }
    for (std::size_t i : idx) {
      const double num = (eval(k, i, eps) - eval(k, i, -eps)) / (2 * eps);
      const double ana = vars[k].has_grad() ? vars[k].grad()[i] : 0.0;
      const double denom = std::max({std::abs(num), std::abs(ana), 1e-3});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(num - ana) / denom);
      ++r.probes;
    }
  }
  return r;
}

}  // namespace mdn::test
