#pragma once

// Hyperprior entropy model shared by ModeNet and CodecNet: h_a / h_s, a
// factorized Laplace prior on z, and an optional masked-conv context model r.
// Main latents y are coded as Laplace(mu, b) with (mu, b) from h_s (and r).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdn/entropy/symbol_coder.hpp"
#include "mdn/nn/module.hpp"

namespace mdn {

struct HyperConfig {
  int latent = 32;   // channels of y
  int hyper_f = 16;  // internal width of h_a / h_s
  int hyper_n = 16;  // channels of z
  bool context = false;

  std::string describe() const {
    return "hp(" + std::to_string(latent) + "," + std::to_string(hyper_f) + "," + std::to_string(hyper_n) + "," +
           (context ? "ctx" : "noctx") + ")";
  }
};

// Stride of z relative to y.
inline constexpr int kHyperStride = 4;

template <typename T>
struct HyperTrainOut {
  Var<T> y_hat;   // noisy latents fed to synthesis
  Var<T> y_bits;  // estimated bits of y
  Var<T> z_bits;  // estimated bits of z
  Var<T> bits() const { return add(y_bits, z_bits); }
};

// Quantized latents plus the coding models they were (or will be) coded with.
struct HyperCode {
  QuantizedLatents y;
  QuantizedLatents z;
};

template <typename T>
class HyperPrior {
 public:
  HyperPrior() = default;
  HyperPrior(HyperConfig cfg, Rng& rng) : cfg_(cfg) {
    const int n = cfg.latent;
    const int hf = cfg.hyper_f;
    h_a_ = ConvStack<T>(n, {same_spec(hf, 3), down_spec(hf), down_spec(cfg.hyper_n)}, Activation::LeakyRelu, rng);
    h_s_ = ConvStack<T>(cfg.hyper_n, {up_spec(hf), up_spec(hf), same_spec(2 * n, 3)}, Activation::LeakyRelu, rng);
    if (cfg.context) {
      ctx_ = ConvLayer<T>(n, ConvSpec{2 * n, 5, 1, 2, 0, false, MaskType::CausalExclusive}, rng);
      ep1_ = ConvLayer<T>(4 * n, same_spec(3 * n, 1), rng);
      ep2_ = ConvLayer<T>(3 * n, same_spec(2 * n, 1), rng);
    }
    const int hn = cfg.hyper_n;
    z_mu_ = make_param(Tensor<T>(Shape{1, hn, 1, 1}), "z_mu");
    z_scale_ = make_param(Tensor<T>(Shape{1, hn, 1, 1}, static_cast<T>(std::log(std::expm1(1.0 - kScaleMin)))),
                          "z_scale");
  }

  const HyperConfig& config() const { return cfg_; }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    h_a_.collect(out, prefix + ".h_a");
    h_s_.collect(out, prefix + ".h_s");
    if (cfg_.context) {
      ctx_.collect(out, prefix + ".r");
      ep1_.collect(out, prefix + ".ep1");
      ep2_.collect(out, prefix + ".ep2");
    }
    out.push_back({prefix + ".z_mu", z_mu_});
    out.push_back({prefix + ".z_scale", z_scale_});
  }

  // Training pass: additive-noise quantization of y and z.
  HyperTrainOut<T> train(const Var<T>& y, Rng& rng) const {
    check_latent_shape(y.shape());
    const Var<T> z = h_a_(y);
    const Var<T> z_tilde = quantize_train(z, rng);
    const Var<T> y_tilde = quantize_train(y, rng);
    const auto [mu, b] = main_params(h_s_(z_tilde), y_tilde);
    return {y_tilde, rate_estimate(y_tilde, mu, b), z_rate(z_tilde)};
  }

  // Continuous rate estimate at rounded latents (inference-time loss).
  HyperTrainOut<T> estimate(const HyperCode& code) const {
    const Var<T> y_hat(code.y.to_tensor<T>());
    const Var<T> z_hat(code.z.to_tensor<T>());
    const auto [mu, b] = main_params(h_s_(z_hat), y_hat);
    return {y_hat, rate_estimate(y_hat, mu, b), z_rate(z_hat)};
  }

  HyperCode quantize(const Tensor<T>& y) const {
    check_latent_shape(y.shape());
    NoGradGuard guard;
    const Var<T> z = h_a_(Var<T>(y));
    return {quantize_infer(y), quantize_infer(z.value())};
  }

  CdfTable z_table(const Shape& z_shape) const {
    Tensor<T> mu(z_shape), b(z_shape);
    const Tensor<T> bz = scale_from_raw(z_scale_).value();
    for (int n = 0; n < z_shape.n; ++n)
      for (int c = 0; c < z_shape.c; ++c)
        for (int i = 0; i < z_shape.h * z_shape.w; ++i) {
          mu.at(n, c, i / z_shape.w, i % z_shape.w) = z_mu_.value()[static_cast<std::size_t>(c)];
          b.at(n, c, i / z_shape.w, i % z_shape.w) = bz[static_cast<std::size_t>(c)];
        }
    return build_cdf_table(mu, b);
  }

  // Models of y in coding order (raster positions, channels inner). With the
  // context model they depend on already-coded symbols, so this is the same
  // serial routine the decoder runs.
  std::vector<SymbolModel> y_models(const HyperCode& code) const {
    std::vector<SymbolModel> models;
    Walker w(*this, code.z, code.y.shape);
    const Shape s = code.y.shape;
    for (int p = 0; p < s.h * s.w; ++p) {
      w.models_at(p, models);
      for (int c = 0; c < s.c; ++c) w.set(c, p, code.y.values[static_cast<std::size_t>(c * s.h * s.w + p)]);
    }
    return models;
  }

  // Ideal code lengths (bits) of z and y under the integer tables.
  std::pair<double, double> table_bits(const HyperCode& code) const {
    const double zb = mdn::table_bits(z_table(code.z.shape), code.z);
    const auto models = y_models(code);
    double yb = 0;
    const Shape s = code.y.shape;
    for (int p = 0; p < s.h * s.w; ++p)
      for (int c = 0; c < s.c; ++c) {
        yb += symbol_bits(models[static_cast<std::size_t>(p * s.c + c)],
                          code.y.values[static_cast<std::size_t>(c * s.h * s.w + p)]);
      }
    return {zb, yb};
  }

  // Bits per y position (summed over channels) and per z position, for rate maps.
  std::pair<std::vector<double>, std::vector<double>> position_bits(const HyperCode& code) const {
    const Shape ys = code.y.shape, zs = code.z.shape;
    const auto zt = z_table(zs);
    std::vector<double> zb(static_cast<std::size_t>(zs.h * zs.w));
    for (int c = 0; c < zs.c; ++c)
      for (int p = 0; p < zs.h * zs.w; ++p) {
        const auto i = static_cast<std::size_t>(c * zs.h * zs.w + p);
        zb[static_cast<std::size_t>(p)] += symbol_bits(zt.models[i], code.z.values[i]);
      }
    const auto models = y_models(code);
    std::vector<double> yb(static_cast<std::size_t>(ys.h * ys.w));
    for (int p = 0; p < ys.h * ys.w; ++p)
      for (int c = 0; c < ys.c; ++c) {
        yb[static_cast<std::size_t>(p)] += symbol_bits(models[static_cast<std::size_t>(p * ys.c + c)],
                                                       code.y.values[static_cast<std::size_t>(c * ys.h * ys.w + p)]);
      }
    return {yb, zb};
  }

  // Hyper chunk and main chunk.
  std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> encode(const HyperCode& code) const {
    if (code.y.shape.n != 1) throw ShapeError("hyperprior encode: batch size must be 1");
    auto hyper = range_encode(code.z, z_table(code.z.shape));
    RangeEncoder enc;
    const Shape s = code.y.shape;
    Walker w(*this, code.z, s);
    std::vector<SymbolModel> models;
    for (int p = 0; p < s.h * s.w; ++p) {
      models.clear();
      w.models_at(p, models);
      for (int c = 0; c < s.c; ++c) {
        const int v = code.y.values[static_cast<std::size_t>(c * s.h * s.w + p)];
        encode_symbol(enc, models[static_cast<std::size_t>(c)], v);
        w.set(c, p, v);
      }
    }
    return {std::move(hyper), enc.finish()};
  }

  HyperCode decode(std::span<const std::uint8_t> hyper, std::span<const std::uint8_t> main, const Shape& y_shape) const {
    check_latent_shape(y_shape);
    if (y_shape.n != 1) throw ShapeError("hyperprior decode: batch size must be 1");
    HyperCode code;
    code.z = range_decode(hyper, z_table(z_shape_for(y_shape)));
    code.y = QuantizedLatents{y_shape, std::vector<std::int32_t>(y_shape.numel())};
    RangeDecoder dec(main);
    Walker w(*this, code.z, y_shape);
    std::vector<SymbolModel> models;
    for (int p = 0; p < y_shape.h * y_shape.w; ++p) {
      models.clear();
      w.models_at(p, models);
      for (int c = 0; c < y_shape.c; ++c) {
        const int v = decode_symbol(dec, models[static_cast<std::size_t>(c)]);
        code.y.values[static_cast<std::size_t>(c * y_shape.h * y_shape.w + p)] = v;
        w.set(c, p, v);
      }
    }
    dec.finish();
    return code;
  }

  Shape z_shape_for(const Shape& y_shape) const {
    return Shape{y_shape.n, cfg_.hyper_n, y_shape.h / kHyperStride, y_shape.w / kHyperStride};
  }

 private:
  void check_latent_shape(const Shape& s) const {
    if (s.c != cfg_.latent) {
      throw ShapeError("hyperprior: expected " + std::to_string(cfg_.latent) + " latent channels, got " + s.str());
    }
    if (s.h % kHyperStride != 0 || s.w % kHyperStride != 0) {
      throw ShapeError("hyperprior: latent extent " + s.str() + " not a multiple of " + std::to_string(kHyperStride));
    }
  }

  Var<T> z_rate(const Var<T>& z) const {
    const Var<T> zeros = constant(Tensor<T>(z.shape()));
    return rate_estimate(z, add(zeros, z_mu_), add(zeros, scale_from_raw(z_scale_)));
  }

  // (mu, b) for every y element; the context path sees y_hat through the mask.
  std::pair<Var<T>, Var<T>> main_params(const Var<T>& hs, const Var<T>& y_hat) const {
    const int n = cfg_.latent;
    Var<T> p = hs;
    if (cfg_.context) p = ep2_(leaky_relu(ep1_(concat_channels(hs, ctx_(y_hat))), T(0.01)));
    return {slice_channels(p, 0, n), scale_from_raw(slice_channels(p, n, n))};
  }

  // Serial per-position evaluation of the coding models, shared by encoder and decoder.
  class Walker {
   public:
    Walker(const HyperPrior& hp, const QuantizedLatents& z, const Shape& ys) : hp_(hp), ys_(ys) {
      NoGradGuard guard;
      hs_ = hp.h_s_(Var<T>(z.to_tensor<T>())).value();
      if (hs_.shape() != Shape{1, 2 * ys.c, ys.h, ys.w}) {
        throw ShapeError("hyperprior: h_s output " + hs_.shape().str() + " does not match latents " + ys.str());
      }
      if (hp.cfg_.context) y_.assign(ys.numel(), 0.0);
    }

    void set(int c, int p, int v) {
      if (!y_.empty()) y_[static_cast<std::size_t>(c * ys_.h * ys_.w + p)] = v;
    }

    void models_at(int p, std::vector<SymbolModel>& out) const {
      const int n = ys_.c;
      const int hw = ys_.h * ys_.w;
      const int py = p / ys_.w, px = p % ys_.w;
      if (!hp_.cfg_.context) {
        for (int c = 0; c < n; ++c) {
          const double mu = hs_[static_cast<std::size_t>(c * hw + p)];
          const double raw = hs_[static_cast<std::size_t>((n + c) * hw + p)];
          out.push_back(symbol_model(mu, scale_of(raw)));
        }
        return;
      }
      // Masked 5x5 context conv at (py, px), then the two 1x1 layers, in double.
      const auto& cw = hp_.ctx_.weight().value();
      const auto& cb = hp_.ctx_.bias().value();
      std::vector<double> feat(static_cast<std::size_t>(4 * n));
      for (int o = 0; o < 2 * n; ++o) feat[static_cast<std::size_t>(o)] = hs_[static_cast<std::size_t>(o * hw + p)];
      for (int o = 0; o < 2 * n; ++o) {
        double acc = cb[static_cast<std::size_t>(o)];
        for (int c = 0; c < n; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 5; ++kx) {
              if (ky == 2 && kx >= 2) break;
              const int yy = py + ky - 2, xx = px + kx - 2;
              if (yy < 0 || xx < 0 || xx >= ys_.w) continue;
              acc += static_cast<double>(cw.at(o, c, ky, kx)) * y_[static_cast<std::size_t>(c * hw + yy * ys_.w + xx)];
            }
        feat[static_cast<std::size_t>(2 * n + o)] = acc;
      }
      const auto hidden = dense(hp_.ep1_, feat, true);
      const auto params = dense(hp_.ep2_, hidden, false);
      for (int c = 0; c < n; ++c) {
        out.push_back(symbol_model(params[static_cast<std::size_t>(c)], scale_of(params[static_cast<std::size_t>(n + c)])));
      }
    }

   private:
    static double scale_of(double raw) {
      const double sp = raw > 20 ? raw : std::log1p(std::exp(raw));
      return kScaleMin + sp;
    }

    static std::vector<double> dense(const ConvLayer<T>& l, const std::vector<double>& in, bool leaky) {
      const auto& w = l.weight().value();
      const auto& b = l.bias().value();
      const int out_c = w.shape().n, in_c = w.shape().c;
      std::vector<double> out(static_cast<std::size_t>(out_c));
      for (int o = 0; o < out_c; ++o) {
        double acc = b[static_cast<std::size_t>(o)];
        for (int i = 0; i < in_c; ++i) acc += static_cast<double>(w[static_cast<std::size_t>(o * in_c + i)]) * in[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(o)] = leaky && acc < 0 ? 0.01 * acc : acc;
      }
      return out;
    }

    const HyperPrior& hp_;
    Shape ys_;
    Tensor<T> hs_;
    std::vector<double> y_;
  };

  HyperConfig cfg_{};
  ConvStack<T> h_a_;
  ConvStack<T> h_s_;
  ConvLayer<T> ctx_;
  ConvLayer<T> ep1_;
  ConvLayer<T> ep2_;
  Var<T> z_mu_;
  Var<T> z_scale_;
};

}  // namespace mdn
