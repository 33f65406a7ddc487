#pragma once

// Synthetic frame pairs: a smooth textured static background with rigidly
// translating textured rectangles, plus the ground-truth motion mask (union of
// each moving object's footprint in both frames).

#include <cmath>
#include <numbers>
#include <vector>

#include "mdn/core/random.hpp"
#include "mdn/core/tensor.hpp"

namespace mdn {

struct SynthSpec {
  int height = 64;
  int width = 64;
  int objects = 2;
  int min_size = 12;
  int max_size = 20;
  double min_speed = 2.0;  // pixels per frame
  double max_speed = 6.0;
  double noise = 0.0;      // uniform noise amplitude added to each frame independently
  double texture_freq = 0.35;  // max frequency (cycles/px) of the background texture
  double texture_amp = 0.06;
  double object_freq = 0.06;   // max frequency of the object shading
  std::uint64_t seed = 1;

  void validate() const {
    if (height <= 0 || width <= 0) throw ValueError("synth: image size must be positive");
    if (objects < 0) throw ValueError("synth: object count must be >= 0");
    if (min_size <= 0 || max_size < min_size) throw ValueError("synth: bad object size range");
    if (min_speed < 0 || max_speed < min_speed) throw ValueError("synth: bad speed range");
    if (noise < 0) throw ValueError("synth: noise must be >= 0");
  }
};

struct SynthPair {
  Tensor<float> x_prev;  // 1 x 3 x H x W
  Tensor<float> x_t;
  Tensor<float> motion;  // 1 x 1 x H x W, 1 on moving-object pixels
};

namespace detail {

struct Wave {
  double fy, fx, phase, amp;
};

// Plane waves with spatial frequency magnitude in [min_freq, max_freq] cycles/px.
inline std::vector<Wave> random_waves(Rng& rng, int count, double min_freq, double max_freq, double amp) {
  std::vector<Wave> w;
  for (int i = 0; i < count; ++i) {
    const double f = rng.uniform(min_freq, max_freq);
    const double dir = rng.uniform(0, 2 * std::numbers::pi);
    w.push_back({f * std::sin(dir), f * std::cos(dir), rng.uniform(0, 2 * std::numbers::pi),
                 rng.uniform(0.5, 1.0) * amp});
  }
  return w;
}

inline double eval_waves(const std::vector<Wave>& ws, double y, double x) {
  double v = 0;
  for (const auto& w : ws) v += w.amp * std::sin(2 * std::numbers::pi * (w.fy * y + w.fx * x) + w.phase);
  return v;
}

struct Object {
  int h, w, y0, x0, dy, dx;
  double color[3];
  double contrast;
  double fy, fx, phase;

  // Smooth sinusoidal shading in object coordinates, so it moves with the object.
  double shade(int c, int oy, int ox) const {
    const double t = contrast * std::sin(2 * std::numbers::pi * (fy * oy + fx * ox) + phase);
    return std::clamp(color[c] + t, 0.0, 1.0);
  }
};

}  // namespace detail

inline SynthPair synth_pair(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  const int H = spec.height, W = spec.width;
  SynthPair p{Tensor<float>(Shape{1, 3, H, W}), Tensor<float>(Shape{1, 3, H, W}), Tensor<float>(Shape{1, 1, H, W})};
  // Background: base colour, low-frequency waves and a fine texture layer.
  for (int c = 0; c < 3; ++c) {
    const double base = rng.uniform(0.25, 0.75);
    const auto coarse = detail::random_waves(rng, 3, 0.0, 0.03, 0.12);
    const auto fine = detail::random_waves(rng, 3, 0.5 * spec.texture_freq, spec.texture_freq, spec.texture_amp);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double v = std::clamp(base + detail::eval_waves(coarse, y, x) + detail::eval_waves(fine, y, x), 0.0, 1.0);
        p.x_prev.at(0, c, y, x) = static_cast<float>(v);
        p.x_t.at(0, c, y, x) = static_cast<float>(v);
      }
  }
  std::vector<detail::Object> objs;
  for (int i = 0; i < spec.objects; ++i) {
    detail::Object o{};
    o.h = static_cast<int>(rng.integer(spec.min_size, spec.max_size));
    o.w = static_cast<int>(rng.integer(spec.min_size, spec.max_size));
    const double speed = rng.uniform(spec.min_speed, spec.max_speed);
    const double angle = rng.uniform(0, 2 * std::numbers::pi);
    o.dy = static_cast<int>(std::lround(speed * std::sin(angle)));
    o.dx = static_cast<int>(std::lround(speed * std::cos(angle)));
    // Both footprints stay inside the frame where possible.
    const int lo_y = std::max(0, -o.dy), hi_y = std::max(lo_y, H - o.h - std::max(0, o.dy));
    const int lo_x = std::max(0, -o.dx), hi_x = std::max(lo_x, W - o.w - std::max(0, o.dx));
    o.y0 = static_cast<int>(rng.integer(lo_y, hi_y));
    o.x0 = static_cast<int>(rng.integer(lo_x, hi_x));
    for (double& c : o.color) c = rng.uniform(0.05, 0.95);
    o.contrast = rng.uniform(0.05, 0.15);
    o.fy = rng.uniform(-spec.object_freq, spec.object_freq);
    o.fx = rng.uniform(-spec.object_freq, spec.object_freq);
    o.phase = rng.uniform(0, 2 * std::numbers::pi);
    objs.push_back(o);
  }
  auto paint = [&](Tensor<float>& img, const detail::Object& o, int oy0, int ox0) {
    for (int y = 0; y < o.h; ++y)
      for (int x = 0; x < o.w; ++x) {
        const int iy = oy0 + y, ix = ox0 + x;
        if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
        for (int c = 0; c < 3; ++c) img.at(0, c, iy, ix) = static_cast<float>(o.shade(c, y, x));
      }
  };
  auto mark = [&](const detail::Object& o, int oy0, int ox0) {
    for (int y = std::max(0, oy0); y < std::min(H, oy0 + o.h); ++y)
      for (int x = std::max(0, ox0); x < std::min(W, ox0 + o.w); ++x) p.motion.at(0, 0, y, x) = 1.0f;
  };
  for (const auto& o : objs) {
    paint(p.x_prev, o, o.y0, o.x0);
    paint(p.x_t, o, o.y0 + o.dy, o.x0 + o.dx);
    if (o.dy != 0 || o.dx != 0) {
      mark(o, o.y0, o.x0);
      mark(o, o.y0 + o.dy, o.x0 + o.dx);
    }
  }
  if (spec.noise > 0) {
    for (auto* img : {&p.x_prev, &p.x_t})
      for (auto& v : img->vec()) v = static_cast<float>(std::clamp(v + rng.uniform(-spec.noise, spec.noise), 0.0, 1.0));
  }
  return p;
}

inline std::vector<SynthPair> synth_dataset(const SynthSpec& spec, int count) {
  Rng rng(spec.seed);
  std::vector<SynthPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(synth_pair(spec, rng));
  return out;
}

}  // namespace mdn
