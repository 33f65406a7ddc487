#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mdn/core/gdn.hpp"
#include "mdn/core/random.hpp"

namespace mdn {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

template <typename T>
void set_trainable(const ParamList<T>& params, bool trainable) {
  for (auto p : params) {
    p.var.set_requires_grad(trainable);
    if (!trainable) p.var.zero_grad();
  }
}

template <typename T>
Var<T> make_param(Tensor<T> init, std::string name) {
  return Var<T>(std::move(init), true, std::move(name));
}

template <typename T>
Tensor<T> uniform_tensor(Shape s, T bound, Rng& rng) {
  Tensor<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(-1.0, 1.0)) * bound;
  return t;
}

// One convolution with its weights.
template <typename T>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(int in_channels, ConvSpec spec, Rng& rng) : spec_(spec), in_(in_channels) {
    spec_.validate();
    const int k = spec_.kernel;
    const Shape ws = spec_.transposed ? Shape{in_channels, spec_.filters, k, k}
                                      : Shape{spec_.filters, in_channels, k, k};
    // Variance 1/fan_in; transposed layers see k*k*C_in/stride^2 taps per output.
    double fan_in = static_cast<double>(in_channels) * k * k;
    if (spec_.transposed) fan_in /= static_cast<double>(spec_.stride * spec_.stride);
    if (spec_.mask != MaskType::None) fan_in *= 0.5;
    const T bound = static_cast<T>(std::sqrt(3.0 / fan_in));
    weight_ = make_param(uniform_tensor<T>(ws, bound, rng), "weight");
    bias_ = make_param(Tensor<T>(Shape{1, spec_.filters, 1, 1}), "bias");
  }

  Var<T> operator()(const Var<T>& x) const { return conv(x, spec_, weight_, bias_); }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

  const ConvSpec& spec() const { return spec_; }
  int in_channels() const { return in_; }
  Var<T>& weight() { return weight_; }
  Var<T>& bias() { return bias_; }
  const Var<T>& weight() const { return weight_; }
  const Var<T>& bias() const { return bias_; }

 private:
  ConvSpec spec_{};
  int in_ = 0;
  Var<T> weight_;
  Var<T> bias_;
};

// GDN / IGDN with beta = beta_min + softplus(raw), gamma = softplus(raw).
template <typename T>
class GdnLayer {
 public:
  static constexpr double kBetaMin = 1e-6;

  GdnLayer() = default;
  GdnLayer(int channels, bool inverse) : inverse_(inverse), channels_(channels) {
    // beta = 1, gamma = 0.1 I (off-diagonal ~ 4.5e-5).
    Tensor<T> beta(Shape{1, channels, 1, 1}, static_cast<T>(std::log(std::expm1(1.0 - kBetaMin))));
    Tensor<T> gamma(Shape{channels, channels, 1, 1}, T(-10));
    for (int c = 0; c < channels; ++c) gamma[c * channels + c] = static_cast<T>(std::log(std::expm1(0.1)));
    beta_raw_ = make_param(std::move(beta), "beta");
    gamma_raw_ = make_param(std::move(gamma), "gamma");
  }

  GdnParams<T> effective() const {
    return GdnParams<T>{add_scalar(softplus(beta_raw_), static_cast<T>(kBetaMin)), softplus(gamma_raw_),
                        inverse_};
  }

  Var<T> operator()(const Var<T>& x) const { return gdn(x, effective()); }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".beta", beta_raw_});
    out.push_back({prefix + ".gamma", gamma_raw_});
  }

  int channels() const { return channels_; }

 private:
  bool inverse_ = false;
  int channels_ = 0;
  Var<T> beta_raw_;
  Var<T> gamma_raw_;
};

enum class Activation { LeakyRelu, Gdn };

// Strided conv stack: layer i is followed by the activation except the last.
// GDN activations become IGDN in synthesis (transposed) stacks.
template <typename T>
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(int in_channels, std::vector<ConvSpec> specs, Activation act, Rng& rng,
            T leaky_slope = T(0.01))
      : act_(act), slope_(leaky_slope) {
    int c = in_channels;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      layers_.emplace_back(c, specs[i], rng);
      c = specs[i].filters;
      if (i + 1 < specs.size() && act == Activation::Gdn) {
        gdns_.emplace_back(c, specs[i].transposed);
      }
    }
  }

  Var<T> operator()(const Var<T>& x) const { return forward_range(x, 0, layers_.size()); }

  // Runs layers [begin, end); activation follows each layer except the last one of the stack.
  Var<T> forward_range(Var<T> x, std::size_t begin, std::size_t end) const {
    for (std::size_t i = begin; i < end; ++i) {
      x = layers_[i](x);
      if (i + 1 < layers_.size()) x = activate(x, i);
    }
    return x;
  }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].collect(out, prefix + "." + std::to_string(i));
      if (act_ == Activation::Gdn && i < gdns_.size()) {
        gdns_[i].collect(out, prefix + "." + std::to_string(i) + ".gdn");
      }
    }
  }

  int stride_product() const {
    int s = 1;
    for (const auto& l : layers_) s *= l.spec().stride;
    return s;
  }

  std::size_t size() const { return layers_.size(); }
  ConvLayer<T>& layer(std::size_t i) { return layers_[i]; }
  const ConvLayer<T>& layer(std::size_t i) const { return layers_[i]; }
  int out_channels() const { return layers_.back().spec().filters; }

 private:
  Var<T> activate(const Var<T>& x, std::size_t i) const {
    if (act_ == Activation::Gdn) return gdns_[i](x);
    return leaky_relu(x, slope_);
  }

  Activation act_ = Activation::LeakyRelu;
  T slope_ = T(0.01);
  std::vector<ConvLayer<T>> layers_;
  std::vector<GdnLayer<T>> gdns_;
};

}  // namespace mdn
