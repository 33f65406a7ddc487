#pragma once

// Composition of ModeNet and CodecNet:
//   alpha = m(x_prev, x_t),  x_c = c(alpha * x~, alpha * x_t),
//   x^ = (1 - alpha) * x~ + x_c,  x~ = x_prev.
// Without ModeNet alpha is all ones (CodecNet-only system).

#include <cstdint>
#include <optional>
#include <string>

#include "mdn/io/checkpoint.hpp"
#include "mdn/metrics/metrics.hpp"
#include "mdn/nn/codecnet.hpp"

namespace mdn {

struct SystemConfig {
  bool use_modenet = true;
  ModeNetConfig mode;
  CodecConfig codec;

  std::string describe() const {
    return (use_modenet ? mode.describe() + "+" : std::string()) + codec.describe();
  }
  std::uint8_t flags() const {
    std::uint8_t f = 0;
    if (use_modenet) f |= flags::kModeNet;
    if (codec.context) f |= flags::kCodecContext;
    if (use_modenet && mode.context) f |= flags::kModeContext;
    return f;
  }
};

template <typename T>
class PFrameSystem {
 public:
  PFrameSystem() = default;
  PFrameSystem(SystemConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    Rng mode_rng = rng.split();
    Rng codec_rng = rng.split();
    if (cfg.use_modenet) mode_.emplace(cfg.mode, mode_rng);
    codec_ = CodecNet<T>(cfg.codec, codec_rng);
  }

  const SystemConfig& config() const { return cfg_; }
  bool has_modenet() const { return mode_.has_value(); }
  const ModeNet<T>& modenet() const { return *mode_; }
  const CodecNet<T>& codecnet() const { return codec_; }

  ParamList<T> mode_parameters() const { return mode_ ? mode_->parameters() : ParamList<T>{}; }
  ParamList<T> codec_parameters() const { return codec_.parameters(); }
  ParamList<T> parameters() const {
    auto p = mode_parameters();
    for (auto& q : codec_parameters()) p.push_back(q);
    return p;
  }

  std::uint64_t hash() const { return model_hash(parameters(), cfg_.describe()); }

 private:
  SystemConfig cfg_{};
  std::optional<ModeNet<T>> mode_;
  CodecNet<T> codec_;
};

// The two elementwise steps shared by training, encoding and decoding.
template <typename T>
Var<T> mask_frame(const Var<T>& alpha, const Var<T>& frame) {
  return mul(alpha, frame);
}

template <typename T>
Var<T> blend(const Var<T>& alpha, const Var<T>& x_tilde, const Var<T>& x_c) {
  return add(mul(rsub_scalar(T(1), alpha), x_tilde), x_c);
}

template <typename T>
Tensor<T> ones_alpha(const Shape& frame) {
  return Tensor<T>(Shape{frame.n, 1, frame.h, frame.w}, T(1));
}

template <typename T>
bool all_zero(const Tensor<T>& t) {
  for (T v : t.vec()) {
    if (v != T(0)) return false;
  }
  return true;
}

template <typename T>
struct TrainForward {
  Var<T> loss;
  Var<T> distortion;
  Var<T> rm_bpp;
  Var<T> rc_bpp;
  Var<T> alpha;
  Var<T> x_hat;
};

template <typename T>
TrainForward<T> train_forward(const PFrameSystem<T>& sys, const Var<T>& x_prev, const Var<T>& x_t, double lambda,
                              Rng& rng, const MsSsimConfig& ms) {
  require_same_shape(x_prev.shape(), x_t.shape(), "system inputs");
  const Shape s = x_t.shape();
  const T pixels = static_cast<T>(static_cast<double>(s.n) * s.h * s.w);
  Var<T> alpha;
  Var<T> rm_bits;
  if (sys.has_modenet()) {
    auto m = sys.modenet().train(x_prev, x_t, rng);
    alpha = m.alpha;
    rm_bits = m.bits;
  } else {
    alpha = constant(ones_alpha<T>(s));
    rm_bits = constant(Tensor<T>::scalar(T(0)));
  }
  const auto c = sys.codecnet().train(mask_frame(alpha, x_prev), mask_frame(alpha, x_t), rng);
  const Var<T> x_hat = blend(alpha, x_prev, c.x_hat);
  const Var<T> distortion = rsub_scalar(T(1), ms_ssim(x_hat, x_t, ms));
  const Var<T> rm_bpp = mul_scalar(rm_bits, T(1) / pixels);
  const Var<T> rc_bpp = mul_scalar(c.bits, T(1) / pixels);
  if (lambda < 0) throw ValueError("rd_loss: lambda must be non-negative");
  const Var<T> loss = add(distortion, mul_scalar(add(rm_bpp, rc_bpp), static_cast<T>(lambda)));
  return {loss, distortion, rm_bpp, rc_bpp, alpha, x_hat};
}

// Inference pass on padded frames (batch 1). Everything the decoder needs is
// in mode_code / codec_code; the rest is reporting.
template <typename T>
struct InferOutput {
  std::optional<HyperCode> mode_code;
  std::optional<HyperCode> codec_code;  // empty when alpha is all zero: nothing to transmit
  Tensor<T> alpha;
  Tensor<T> x_c;
  Tensor<T> x_hat;
  double rm_bits = 0;  // ideal code length under the integer tables
  double rc_bits = 0;
};

template <typename T>
InferOutput<T> infer_forward(const PFrameSystem<T>& sys, const Tensor<T>& x_prev, const Tensor<T>& x_t,
                             const std::optional<Tensor<T>>& forced_alpha = std::nullopt) {
  require_same_shape(x_prev.shape(), x_t.shape(), "system inputs");
  if (x_t.shape().n != 1) throw ShapeError("inference works on one frame pair at a time");
  NoGradGuard guard;
  InferOutput<T> out;
  if (forced_alpha) {
    require_same_shape(forced_alpha->shape(), ones_alpha<T>(x_t.shape()).shape(), "forced alpha");
    out.alpha = *forced_alpha;
  } else if (sys.has_modenet()) {
    auto m = sys.modenet().infer(x_prev, x_t);
    out.mode_code = std::move(m.code);
    out.alpha = std::move(m.alpha);
    const auto [zb, yb] = sys.modenet().hyper().table_bits(*out.mode_code);
    out.rm_bits = zb + yb;
  } else {
    out.alpha = ones_alpha<T>(x_t.shape());
  }
  const Var<T> alpha(out.alpha);
  const Var<T> pred(x_prev);
  const Tensor<T> masked_pred = mask_frame(alpha, pred).value();
  if (all_zero(out.alpha)) {
    out.x_c = Tensor<T>(x_t.shape());
  } else {
    const Tensor<T> masked_target = mask_frame(alpha, Var<T>(x_t)).value();
    out.codec_code = sys.codecnet().encode_latents(masked_pred, masked_target);
    out.x_c = sys.codecnet().reconstruct(out.codec_code->y, masked_pred);
    const auto [zb, yb] = sys.codecnet().hyper().table_bits(*out.codec_code);
    out.rc_bits = zb + yb;
  }
  out.x_hat = blend(alpha, pred, Var<T>(out.x_c)).value();
  return out;
}

// Continuous rate estimates at the rounded latents (bits).
template <typename T>
std::pair<double, double> infer_rate_estimate(const PFrameSystem<T>& sys, const InferOutput<T>& out) {
  NoGradGuard guard;
  double rm = 0, rc = 0;
  if (out.mode_code) rm = sys.modenet().hyper().estimate(*out.mode_code).bits().item();
  if (out.codec_code) rc = sys.codecnet().hyper().estimate(*out.codec_code).bits().item();
  return {rm, rc};
}

// Per-pixel bits of one hyperprior code: each latent's bits spread uniformly
// over the image block it covers.
template <typename T>
Tensor<double> rate_map(const HyperPrior<T>& hp, const HyperCode& code, int h, int w) {
  Tensor<double> map(Shape{1, 1, h, w});
  const auto [yb, zb] = hp.position_bits(code);
  auto spread = [&](const std::vector<double>& bits, const Shape& s) {
    const int by = h / s.h, bx = w / s.w;
    const double inv = 1.0 / (by * bx);
    for (int p = 0; p < s.h * s.w; ++p) {
      const int y0 = (p / s.w) * by, x0 = (p % s.w) * bx;
      for (int y = 0; y < by; ++y)
        for (int x = 0; x < bx; ++x) map.at(0, 0, y0 + y, x0 + x) += bits[static_cast<std::size_t>(p)] * inv;
    }
  };
  spread(yb, code.y.shape);
  spread(zb, code.z.shape);
  return map;
}

}  // namespace mdn
