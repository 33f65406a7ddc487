#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mdn/core/ops.hpp"

namespace mdn {

struct MsSsimConfig {
  std::vector<double> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  int scales() const { return static_cast<int>(weights.size()); }
  // Smallest H and W the configuration accepts.
  int min_extent() const { return window << (scales() - 1); }

  // First three scales with renormalized exponents, for 64x64-class crops.
  static MsSsimConfig small() {
    MsSsimConfig c;
    c.weights.resize(3);
    return c;
  }

  // Five scales when the image allows it, otherwise three.
  static MsSsimConfig for_extent(int h, int w) {
    MsSsimConfig c;
    return std::min(h, w) >= c.min_extent() ? c : small();
  }

  std::vector<double> normalized_weights() const {
    const double s = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> out(weights);
    for (auto& v : out) v /= s;
    return out;
  }

  std::vector<double> gaussian_taps() const {
    std::vector<double> g(static_cast<std::size_t>(window));
    double s = 0;
    for (int i = 0; i < window; ++i) {
      const double d = i - (window - 1) / 2.0;
      s += g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
    }
    for (auto& v : g) v /= s;
    return g;
  }
};

// Per-(sample, channel) MS-SSIM: N x C x 1 x 1.
template <typename T>
Var<T> ms_ssim_map(const Var<T>& a, const Var<T>& b, const MsSsimConfig& cfg = {}) {
  require_same_shape(a.shape(), b.shape(), "ms_ssim");
  const Shape s = a.shape();
  if (std::min(s.h, s.w) < cfg.min_extent()) {
    throw ShapeError("ms_ssim: image " + std::to_string(s.h) + "x" + std::to_string(s.w) + " is smaller than " +
                     std::to_string(cfg.min_extent()) + " px needed for " + std::to_string(cfg.scales()) +
                     " scales; use fewer scales (e.g. MsSsimConfig::small())");
  }
  std::vector<T> taps;
  for (double v : cfg.gaussian_taps()) taps.push_back(static_cast<T>(v));
  const auto weights = cfg.normalized_weights();
  const T c1 = static_cast<T>(cfg.c1);
  const T c2 = static_cast<T>(cfg.c2);
  const T floor = static_cast<T>(1e-6);
  const T ceiling = std::numeric_limits<T>::max();

  Var<T> x = a;
  Var<T> y = b;
  Var<T> log_acc;
  for (int scale = 0; scale < cfg.scales(); ++scale) {
    if (scale > 0) {
      x = avg_pool2(x);
      y = avg_pool2(y);
    }
    auto filt = [&](const Var<T>& v) { return separable_filter_valid(v, taps); };
    const Var<T> mx = filt(x);
    const Var<T> my = filt(y);
    const Var<T> mxx = square(mx);
    const Var<T> myy = square(my);
    const Var<T> mxy = mul(mx, my);
    const Var<T> sxx = sub(filt(square(x)), mxx);
    const Var<T> syy = sub(filt(square(y)), myy);
    const Var<T> sxy = sub(filt(mul(x, y)), mxy);
    Var<T> term = div(add_scalar(mul_scalar(sxy, T(2)), c2), add_scalar(add(sxx, syy), c2));
    if (scale + 1 == cfg.scales()) {
      const Var<T> lum = div(add_scalar(mul_scalar(mxy, T(2)), c1), add_scalar(add(mxx, myy), c1));
      term = mul(lum, term);
    }
    const Var<T> v = clip(mean_hw(term), floor, ceiling);
    const Var<T> weighted = mul_scalar(log(v), static_cast<T>(weights[static_cast<std::size_t>(scale)]));
    log_acc = scale == 0 ? weighted : add(log_acc, weighted);
  }
  return exp(log_acc);
}

// Mean over channels and batch of the per-(sample, channel) MS-SSIM.
template <typename T>
Var<T> ms_ssim(const Var<T>& a, const Var<T>& b, const MsSsimConfig& cfg = {}) {
  return mean(ms_ssim_map(a, b, cfg));
}

// -10 log10(1 - v), v clamped to 1 - 1e-10; reported to 1e-10 dB.
inline double msssim_db(double v) {
  const double d = -10.0 * std::log10(1.0 - std::min(v, 1.0 - 1e-10));
  return std::round(d * 1e10) / 1e10;
}

// (1 - MS-SSIM) + lambda * (R_m + R_c) / pixels, rates in bits.
template <typename T>
Var<T> rd_loss(const Var<T>& x_hat, const Var<T>& x, const Var<T>& rm_bits, const Var<T>& rc_bits, double lambda,
               const MsSsimConfig& cfg = {}) {
  if (lambda < 0) throw ValueError("rd_loss: lambda must be non-negative");
  const Shape s = x.shape();
  const double pixels = static_cast<double>(s.n) * s.h * s.w;
  const Var<T> distortion = rsub_scalar(T(1), ms_ssim(x_hat, x, cfg));
  const Var<T> rate = mul_scalar(add(rm_bits, rc_bits), static_cast<T>(lambda / pixels));
  return add(distortion, rate);
}

// Same objective with rates already in bits per pixel.
template <typename T>
Var<T> rd_loss_bpp(const Var<T>& x_hat, const Var<T>& x, const Var<T>& rm_bpp, const Var<T>& rc_bpp, double lambda,
                   const MsSsimConfig& cfg = {}) {
  if (lambda < 0) throw ValueError("rd_loss: lambda must be non-negative");
  return add(rsub_scalar(T(1), ms_ssim(x_hat, x, cfg)), mul_scalar(add(rm_bpp, rc_bpp), static_cast<T>(lambda)));
}

struct RDPoint {
  double lambda = 0;
  double bpp = 0;
  double msssim = 0;
  double msssim_db = 0;

  static RDPoint make(double lambda, double bpp, double msssim) {
    return {lambda, bpp, msssim, mdn::msssim_db(msssim)};
  }
};

inline const char* kRdCsvHeader = "lambda,bpp,msssim,msssim_db";

inline std::string rd_csv(const std::vector<RDPoint>& points) {
  std::ostringstream os;
  os << kRdCsvHeader << "\n" << std::setprecision(10);
  for (const auto& p : points) os << p.lambda << "," << p.bpp << "," << p.msssim << "," << p.msssim_db << "\n";
  return os.str();
}

inline std::vector<RDPoint> parse_rd_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kRdCsvHeader) throw FormatError("RD csv: missing header");
  std::vector<RDPoint> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    RDPoint p;
    char c1, c2, c3;
    std::istringstream ls(line);
    if (!(ls >> p.lambda >> c1 >> p.bpp >> c2 >> p.msssim >> c3 >> p.msssim_db) || c1 != ',' || c2 != ',' ||
        c3 != ',') {
      throw FormatError("RD csv: malformed row '" + line + "'");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace mdn
