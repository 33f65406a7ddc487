#pragma once

// Post-hoc analysis: the rate-distortion partition comparator (which pixels
// would be better copied than transmitted) and RD evaluation over a lambda grid.

#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "mdn/pipeline/codec.hpp"
#include "mdn/pipeline/train.hpp"

namespace mdn {

struct PartitionDiagnostic {
  int height = 0;
  int width = 0;
  double lambda = 0;
  std::vector<double> d_copy;   // per-pixel squared error of the prediction, mean over channels
  std::vector<double> d_codec;  // same for the reconstruction
  std::vector<double> rate;     // bits at the pixel
  std::vector<double> ell;      // (d_copy - d_codec) / rate; NaN where rate == 0
  std::vector<std::uint8_t> in_s;  // 1: copy set S, 0: transmit set
  std::size_t s_count = 0;
  std::size_t zero_rate = 0;     // pixels placed in S because ell is undefined there
  std::optional<double> agreement;  // fraction where in_s == (alpha < 0.5)

  std::size_t pixels() const { return in_s.size(); }
};

// Pixel i belongs to S when d(x~, x; i) <= d(x^, x; i) + lambda * r(i), i.e.
// ell(i) <= lambda. Squared error stands in for the per-pixel distortion.
template <typename T>
PartitionDiagnostic diagnostic_partition(const Tensor<T>& x_tilde, const Tensor<T>& x, const Tensor<T>& x_hat,
                                         const Tensor<double>& rate_map, double lambda,
                                         const std::optional<Tensor<T>>& alpha = std::nullopt) {
  require_same_shape(x_tilde.shape(), x.shape(), "diagnostic inputs");
  require_same_shape(x_hat.shape(), x.shape(), "diagnostic inputs");
  const Shape s = x.shape();
  if (s.n != 1) throw ShapeError("diagnostic: one frame at a time");
  if (rate_map.shape() != Shape{1, 1, s.h, s.w}) {
    throw ShapeError("diagnostic: rate map " + rate_map.shape().str() + " does not match frame " + s.str());
  }
  if (alpha && alpha->shape() != Shape{1, 1, s.h, s.w}) throw ShapeError("diagnostic: alpha shape mismatch");
  if (lambda < 0) throw ValueError("diagnostic: lambda must be >= 0");
  PartitionDiagnostic d;
  d.height = s.h;
  d.width = s.w;
  d.lambda = lambda;
  const std::size_t n = static_cast<std::size_t>(s.h) * s.w;
  d.d_copy.assign(n, 0);
  d.d_codec.assign(n, 0);
  d.rate.assign(n, 0);
  d.ell.assign(n, std::numeric_limits<double>::quiet_NaN());
  d.in_s.assign(n, 0);
  std::size_t agree = 0;
  for (int y = 0; y < s.h; ++y)
    for (int xx = 0; xx < s.w; ++xx) {
      const std::size_t i = static_cast<std::size_t>(y) * s.w + xx;
      double dc = 0, dh = 0;
      for (int c = 0; c < s.c; ++c) {
        const double t = static_cast<double>(x.at(0, c, y, xx));
        const double a = static_cast<double>(x_tilde.at(0, c, y, xx)) - t;
        const double b = static_cast<double>(x_hat.at(0, c, y, xx)) - t;
        dc += a * a;
        dh += b * b;
      }
      d.d_copy[i] = dc / s.c;
      d.d_codec[i] = dh / s.c;
      d.rate[i] = rate_map[i];
      if (d.rate[i] > 0) {
        d.ell[i] = (d.d_copy[i] - d.d_codec[i]) / d.rate[i];
        d.in_s[i] = d.ell[i] <= lambda ? 1 : 0;
      } else {
        d.in_s[i] = 1;
        ++d.zero_rate;
      }
      d.s_count += d.in_s[i];
      if (alpha) agree += (d.in_s[i] == 1) == (static_cast<double>(alpha->at(0, 0, y, xx)) < 0.5);
    }
  if (alpha) d.agreement = static_cast<double>(agree) / static_cast<double>(n);
  return d;
}

// Diagnostic for one coded pair, using the CodecNet rate map of the padded
// frame cropped back to the original size.
template <typename T>
PartitionDiagnostic diagnose_pair(const PFrameSystem<T>& sys, const Tensor<T>& x_prev, const Tensor<T>& x_t,
                                  double lambda) {
  const Shape s = x_t.shape();
  const auto enc = encode_pair(sys, x_prev, x_t);
  const Shape ps = enc.detail.x_hat.shape();
  Tensor<double> rate(Shape{1, 1, s.h, s.w});
  if (enc.detail.codec_code) {
    rate = crop(rate_map(sys.codecnet().hyper(), *enc.detail.codec_code, ps.h, ps.w), s.h, s.w);
  }
  return diagnostic_partition(x_prev, x_t, enc.x_hat, rate, lambda, std::optional<Tensor<T>>(crop(enc.detail.alpha, s.h, s.w)));
}

// Actual coded bpp and MS-SSIM of one system over a set of pairs. Pairs are
// split over `workers` threads; per-pair results are summed in pair order, so
// the result does not depend on the worker count.
template <typename T>
RDPoint evaluate_system(const PFrameSystem<T>& sys, const FrameBatchSource& data, double lambda, int workers = 1) {
  if (data.size() == 0) throw ValueError("eval: dataset is empty");
  if (workers < 1) throw ValueError("eval: workers must be >= 1");
  const std::size_t n = data.size();
  std::vector<double> bpp(n), ms(n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto run = [&](int w) {
    try {
      NoGradGuard guard;
      for (std::size_t i = static_cast<std::size_t>(w); i < n; i += static_cast<std::size_t>(workers)) {
        const Tensor<T> prev = data.prev[i].template cast<T>();
        const Tensor<T> cur = data.cur[i].template cast<T>();
        const auto enc = encode_pair(sys, prev, cur);
        const Shape s = cur.shape();
        bpp[i] = enc.bpp();
        ms[i] = static_cast<double>(ms_ssim(Var<T>(enc.x_hat), Var<T>(cur), MsSsimConfig::for_extent(s.h, s.w)).item());
      }
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double b = 0, m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    b += bpp[i];
    m += ms[i];
  }
  return RDPoint::make(lambda, b / static_cast<double>(n), m / static_cast<double>(n));
}

struct RdModel {
  double lambda = 0;
  std::string checkpoint;
};

// One RD point per lambda whose checkpoint loads; missing or unreadable
// checkpoints are skipped with a warning.
template <typename T>
std::vector<RDPoint> eval_rd(const SystemConfig& cfg, const std::vector<RdModel>& models, const FrameBatchSource& data,
                             std::ostream& warn = std::cerr, int workers = 1) {
  std::vector<RDPoint> out;
  for (const auto& m : models) {
    PFrameSystem<T> sys(cfg, 0);
    try {
      load_checkpoint(m.checkpoint, sys.parameters());
    } catch (const Error& e) {
      warn << "warning: skipping lambda " << m.lambda << ": " << e.what() << "\n";
      continue;
    }
    out.push_back(evaluate_system(sys, data, m.lambda, workers));
  }
  return out;
}

}  // namespace mdn
