#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mdn/nn/module.hpp"

namespace mdn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Piecewise-constant learning rate: base_lr divided by `factor` at each of the
// given fractions of the total epoch count.
struct LrSchedule {
  double base_lr = 1e-4;
  double factor = 5.0;
  std::vector<double> drop_fractions{0.5, 0.75};

  double at_epoch(int epoch, int total_epochs) const {
    double lr = base_lr;
    for (double f : drop_fractions) {
      if (epoch >= static_cast<int>(std::ceil(f * total_epochs - 1e-9))) lr /= factor;
    }
    return lr;
  }
};

// Adam with per-parameter step counts, so parameters frozen for a while keep
// correct bias correction when they resume.
template <typename T>
class Adam {
 public:
  struct Slot {
    NamedParam<T> param;
    Tensor<T> m;
    Tensor<T> v;
    long steps = 0;
  };

  Adam(const ParamList<T>& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : params) {
      slots_.push_back(Slot{p, Tensor<T>(p.var.shape()), Tensor<T>(p.var.shape()), 0});
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return steps_; }
  const std::vector<Slot>& slots() const { return slots_; }

  void zero_grad() {
    for (auto& s : slots_) s.param.var.zero_grad();
  }

  // Updates every trainable parameter holding a gradient. Frozen parameters
  // (requires_grad == false) are left untouched.
  void step() {
    for (const auto& s : slots_) {
      if (!s.param.var.requires_grad() || !s.param.var.has_grad()) continue;
      if (s.param.var.grad().first_non_finite() >= 0) {
        throw NumericError("training step: non-finite gradient in parameter " + s.param.name);
      }
    }
    ++steps_;
    for (auto& s : slots_) {
      const Var<T>& p = s.param.var;
      if (!p.requires_grad() || !p.has_grad()) continue;
      ++s.steps;
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.steps));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.steps));
      const T b1 = static_cast<T>(cfg_.beta1);
      const T b2 = static_cast<T>(cfg_.beta2);
      const T step = static_cast<T>(cfg_.lr / bc1);
      const T inv_bc2 = static_cast<T>(1.0 / bc2);
      const T eps = static_cast<T>(cfg_.eps);
      auto& value = p.mutable_value();
      const auto& g = p.grad();
      for (std::size_t i = 0; i < value.size(); ++i) {
        s.m[i] = b1 * s.m[i] + (T(1) - b1) * g[i];
        s.v[i] = b2 * s.v[i] + (T(1) - b2) * g[i] * g[i];
        value[i] -= step * s.m[i] / (std::sqrt(s.v[i] * inv_bc2) + eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  long steps_ = 0;
};

}  // namespace mdn
