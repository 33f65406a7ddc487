#pragma once

#include <string>

#include "mdn/nn/hyperprior.hpp"

namespace mdn {

// Stride of the main latents relative to the image.
inline constexpr int kLatentStride = 16;
// Images must be padded to multiples of this (main plus hyper strides).
inline constexpr int kPadMultiple = kLatentStride * kHyperStride;

inline void require_padded(const Shape& s, const char* what) {
  if (s.h % kPadMultiple != 0 || s.w % kPadMultiple != 0) {
    throw ShapeError(std::string(what) + ": spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                     " is not a multiple of " + std::to_string(kPadMultiple) + " (pad the input first)");
  }
}

struct ModeNetConfig {
  int f = 32;
  int n = 32;
  int hyper_f = 16;
  int hyper_n = 16;
  bool context = false;
  bool straight_through = true;  // gradient of the alpha clip outside [0, 1]

  HyperConfig hyper() const { return {n, hyper_f, hyper_n, context}; }
  std::string describe() const {
    return "modenet(" + std::to_string(f) + "," + std::to_string(n) + ")" + hyper().describe();
  }
};

template <typename T>
struct ModeTrainOut {
  Var<T> alpha;
  Var<T> bits;
};

// What the encoder learns about alpha: its latents and the decoded map.
template <typename T>
struct ModeCode {
  HyperCode code;
  Tensor<T> alpha;
};

// Mode-selection network m: (x_prev, x_t) -> alpha in [0,1]^{HxW}.
template <typename T>
class ModeNet {
 public:
  static constexpr double kAlphaBias = 0.5;

  ModeNet() = default;
  ModeNet(ModeNetConfig cfg, Rng& rng) : cfg_(cfg) {
    g_a_ = ConvStack<T>(6, {down_spec(cfg.f), down_spec(cfg.f), down_spec(cfg.f), down_spec(cfg.n)},
                        Activation::LeakyRelu, rng);
    g_s_ = ConvStack<T>(cfg.n, {up_spec(cfg.f), up_spec(cfg.f), up_spec(cfg.f), up_spec(1)}, Activation::LeakyRelu,
                        rng);
    hyper_ = HyperPrior<T>(cfg.hyper(), rng);
    // Zero final layer: a fresh model outputs alpha = 0.5 everywhere.
    auto& last = g_s_.layer(g_s_.size() - 1);
    last.weight().mutable_value().fill(T(0));
    last.bias().mutable_value().fill(T(0));
  }

  const ModeNetConfig& config() const { return cfg_; }

  void collect(ParamList<T>& out, const std::string& prefix = "mode") const {
    g_a_.collect(out, prefix + ".g_a");
    g_s_.collect(out, prefix + ".g_s");
    hyper_.collect(out, prefix + ".hp");
  }

  ParamList<T> parameters() const {
    ParamList<T> p;
    collect(p);
    return p;
  }

  ModeTrainOut<T> train(const Var<T>& x_prev, const Var<T>& x_t, Rng& rng) const {
    const Var<T> y = analyze(x_prev, x_t);
    const auto hp = hyper_.train(y, rng);
    return {alpha_from(hp.y_hat), hp.bits()};
  }

  ModeCode<T> infer(const Tensor<T>& x_prev, const Tensor<T>& x_t) const {
    NoGradGuard guard;
    const Var<T> y = analyze(Var<T>(x_prev), Var<T>(x_t));
    ModeCode<T> out{hyper_.quantize(y.value()), {}};
    out.alpha = decode_alpha(out.code.y);
    return out;
  }

  Tensor<T> decode_alpha(const QuantizedLatents& y) const {
    NoGradGuard guard;
    return alpha_from(Var<T>(y.to_tensor<T>())).value();
  }

  Var<T> alpha_from(const Var<T>& y_hat) const {
    return clip(add_scalar(g_s_(y_hat), static_cast<T>(kAlphaBias)), T(0), T(1), cfg_.straight_through);
  }

  const HyperPrior<T>& hyper() const { return hyper_; }

  Shape latent_shape(int h, int w) const { return Shape{1, cfg_.n, h / kLatentStride, w / kLatentStride}; }

 private:
  Var<T> analyze(const Var<T>& x_prev, const Var<T>& x_t) const {
    require_same_shape(x_prev.shape(), x_t.shape(), "modenet inputs");
    if (x_t.shape().c != 3) throw ShapeError("modenet: expected 3-channel frames, got " + x_t.shape().str());
    require_padded(x_t.shape(), "modenet");
    return g_a_(concat_channels(x_prev, x_t));
  }

  ModeNetConfig cfg_{};
  ConvStack<T> g_a_;
  ConvStack<T> g_s_;
  HyperPrior<T> hyper_;
};

}  // namespace mdn
