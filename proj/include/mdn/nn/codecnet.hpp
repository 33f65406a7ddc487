#pragma once

#include <optional>
#include <string>

#include "mdn/entropy/bitstream.hpp"
#include "mdn/nn/modenet.hpp"

namespace mdn {

struct CodecConfig {
  CodecMode mode = CodecMode::Conditional;
  int f = 72;
  int n = 80;
  int hyper_f = 48;
  int hyper_n = 48;
  bool context = true;

  HyperConfig hyper() const { return {n, hyper_f, hyper_n, context}; }
  std::string describe() const {
    return std::string("codecnet(") + codec_mode_name(mode) + "," + std::to_string(f) + "," + std::to_string(n) +
           ")" + hyper().describe();
  }
};

template <typename T>
struct CodecTrainOut {
  Var<T> x_hat;
  Var<T> bits;
};

// Transmission coder c: reconstructs alpha * x_t from (alpha * x~_t, alpha * x_t).
template <typename T>
class CodecNet {
 public:
  CodecNet() = default;
  CodecNet(CodecConfig cfg, Rng& rng) : cfg_(cfg) {
    const int f = cfg.f;
    const bool cond = cfg.mode == CodecMode::Conditional;
    g_a_ = ConvStack<T>(cond ? 6 : 3, {down_spec(f), down_spec(f), down_spec(f), down_spec(cfg.n)}, Activation::Gdn,
                        rng);
    if (cond) {
      g_s_head_ = ConvLayer<T>(cfg.n, up_spec(f), rng);
      head_gdn_ = GdnLayer<T>(f, true);
      pred_ = ConvStack<T>(3, {down_spec(f), down_spec(f), down_spec(f)}, Activation::Gdn, rng);
      g_s_ = ConvStack<T>(2 * f, {up_spec(f), up_spec(f), up_spec(3)}, Activation::Gdn, rng);
    } else {
      g_s_ = ConvStack<T>(cfg.n, {up_spec(f), up_spec(f), up_spec(f), up_spec(3)}, Activation::Gdn, rng);
    }
    hyper_ = HyperPrior<T>(cfg.hyper(), rng);
  }

  const CodecConfig& config() const { return cfg_; }
  CodecMode mode() const { return cfg_.mode; }

  void collect(ParamList<T>& out, const std::string& prefix = "codec") const {
    g_a_.collect(out, prefix + ".g_a");
    if (cfg_.mode == CodecMode::Conditional) {
      g_s_head_.collect(out, prefix + ".g_s_head");
      head_gdn_.collect(out, prefix + ".g_s_head.gdn");
      pred_.collect(out, prefix + ".pred");
    }
    g_s_.collect(out, prefix + ".g_s");
    hyper_.collect(out, prefix + ".hp");
  }

  ParamList<T> parameters() const {
    ParamList<T> p;
    collect(p);
    return p;
  }

  CodecTrainOut<T> train(const Var<T>& masked_pred, const Var<T>& masked_target, Rng& rng) const {
    const auto hp = hyper_.train(analyze(masked_pred, masked_target), rng);
    return {synthesize(hp.y_hat, masked_pred), hp.bits()};
  }

  HyperCode encode_latents(const Tensor<T>& masked_pred, const Tensor<T>& masked_target) const {
    NoGradGuard guard;
    return hyper_.quantize(analyze(Var<T>(masked_pred), Var<T>(masked_target)).value());
  }

  // Decoder-side reconstruction: a function of the decoded latents and the
  // masked prediction only.
  Tensor<T> reconstruct(const QuantizedLatents& y, const Tensor<T>& masked_pred) const {
    NoGradGuard guard;
    return synthesize(Var<T>(y.to_tensor<T>()), Var<T>(masked_pred)).value();
  }

  Var<T> synthesize(const Var<T>& y_hat, const Var<T>& masked_pred) const {
    switch (cfg_.mode) {
      case CodecMode::Image:
        return g_s_(y_hat);
      case CodecMode::Difference:
        return add(masked_pred, g_s_(y_hat));
      case CodecMode::Conditional:
        return g_s_(concat_channels(head_gdn_(g_s_head_(y_hat)), pred_(masked_pred)));
    }
    throw ConfigError("codecnet: unknown mode");
  }

  const HyperPrior<T>& hyper() const { return hyper_; }

 private:
  Var<T> analyze(const Var<T>& masked_pred, const Var<T>& masked_target) const {
    require_same_shape(masked_pred.shape(), masked_target.shape(), "codecnet inputs");
    if (masked_target.shape().c != 3) throw ShapeError("codecnet: expected 3 channels, got " + masked_target.shape().str());
    require_padded(masked_target.shape(), "codecnet");
    switch (cfg_.mode) {
      case CodecMode::Image:
        return g_a_(masked_target);
      case CodecMode::Difference:
        // Residual in [-1, 1] mapped to [0, 1].
        return g_a_(add_scalar(mul_scalar(sub(masked_target, masked_pred), T(0.5)), T(0.5)));
      case CodecMode::Conditional:
        return g_a_(concat_channels(masked_pred, masked_target));
    }
    throw ConfigError("codecnet: unknown mode");
  }

  CodecConfig cfg_{};
  ConvStack<T> g_a_;
  ConvLayer<T> g_s_head_;
  GdnLayer<T> head_gdn_;
  ConvStack<T> pred_;
  ConvStack<T> g_s_;
  HyperPrior<T> hyper_;
};

}  // namespace mdn
