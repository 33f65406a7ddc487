#pragma once

// Two-stage training: warm-up epochs update CodecNet only, then ModeNet and
// CodecNet alternate one epoch each while the other is frozen. Systems without
// ModeNet train CodecNet in every epoch.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mdn/core/optim.hpp"
#include "mdn/pipeline/synth.hpp"
#include "mdn/pipeline/system.hpp"

namespace mdn {

struct TrainSchedule {
  int warmup_epochs = 2;
  int alternate_epochs = 18;
  int batch = 8;
  double lambda = 0.01;
  LrSchedule lr{};
  double mode_lr_scale = 1.0;  // ModeNet learning rate relative to CodecNet's
  std::uint64_t seed = 1;

  int total_epochs() const { return warmup_epochs + alternate_epochs; }
  void validate() const {
    if (warmup_epochs < 1) throw ConfigError("schedule: warmup_epochs must be >= 1");
    if (alternate_epochs < 0) throw ConfigError("schedule: alternate_epochs must be >= 0");
    if (batch < 1) throw ConfigError("schedule: batch must be >= 1");
    if (lambda < 0) throw ConfigError("schedule: lambda must be >= 0");
    if (!(mode_lr_scale > 0)) throw ConfigError("schedule: mode_lr_scale must be > 0");
  }
};

enum class Stage { Warmup, Mode, Codec };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Warmup: return "warmup";
    case Stage::Mode: return "mode";
    case Stage::Codec: return "codec";
  }
  return "?";
}

// Which network an epoch trains. Alternation starts with ModeNet.
inline Stage stage_of(const TrainSchedule& s, int epoch, bool has_modenet) {
  if (epoch < s.warmup_epochs) return Stage::Warmup;
  if (!has_modenet) return Stage::Codec;
  return (epoch - s.warmup_epochs) % 2 == 0 ? Stage::Mode : Stage::Codec;
}

struct EpochLog {
  int epoch = 0;
  Stage stage = Stage::Warmup;
  double loss = 0;
  double distortion = 0;
  double rm_bpp = 0;
  double rc_bpp = 0;
};

inline constexpr const char* kLossLogHeader = "epoch,stage,loss,distortion,rm_bpp,rc_bpp";

inline std::string loss_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << kLossLogHeader << "\n" << std::setprecision(8);
  for (const auto& e : log) {
    os << e.epoch << "," << stage_name(e.stage) << "," << e.loss << "," << e.distortion << "," << e.rm_bpp << ","
       << e.rc_bpp << "\n";
  }
  return os.str();
}

struct FrameBatchSource {
  std::vector<Tensor<float>> prev;
  std::vector<Tensor<float>> cur;
  std::size_t size() const { return prev.size(); }
};

inline FrameBatchSource batch_source(const std::vector<SynthPair>& pairs) {
  FrameBatchSource s;
  for (const auto& p : pairs) {
    s.prev.push_back(p.x_prev);
    s.cur.push_back(p.x_t);
  }
  return s;
}

struct TrainOptions {
  std::string checkpoint_dir;  // empty: no checkpoints
  std::function<void(const EpochLog&)> on_epoch;
  // Called after every optimizer step with (epoch, step within epoch).
  std::function<void(int, int)> on_step;
};

// Trains in place and returns the per-epoch log. A non-finite loss restores
// the parameters of the last completed epoch and throws NumericError.
template <typename T>
std::vector<EpochLog> train_system(PFrameSystem<T>& sys, const FrameBatchSource& data, const TrainSchedule& sched,
                                   const TrainOptions& opt = {}) {
  sched.validate();
  if (data.size() == 0) throw ValueError("train: dataset is empty");
  const Shape fs = data.cur.front().shape();
  const MsSsimConfig ms = MsSsimConfig::for_extent(fs.h, fs.w);
  const ParamList<T> mode_params = sys.mode_parameters();
  const ParamList<T> codec_params = sys.codec_parameters();
  const ParamList<T> all = sys.parameters();
  Adam<T> mode_adam(mode_params, AdamConfig{sched.lr.base_lr * sched.mode_lr_scale});
  Adam<T> codec_adam(codec_params, AdamConfig{sched.lr.base_lr});
  Rng rng(sched.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> log;
  auto snapshot = serialize_checkpoint(to_records(all));
  if (!opt.checkpoint_dir.empty()) std::filesystem::create_directories(opt.checkpoint_dir);

  for (int epoch = 0; epoch < sched.total_epochs(); ++epoch) {
    const Stage stage = stage_of(sched, epoch, sys.has_modenet());
    set_trainable(mode_params, stage == Stage::Mode);
    set_trainable(codec_params, stage != Stage::Mode);
    const double lr = sched.lr.at_epoch(epoch, sched.total_epochs());
    mode_adam.set_lr(lr * sched.mode_lr_scale);
    codec_adam.set_lr(lr);
    Adam<T>& adam = stage == Stage::Mode ? mode_adam : codec_adam;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i - 1)))]);
    }
    EpochLog e{epoch, stage, 0, 0, 0, 0};
    int batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(sched.batch)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(sched.batch));
      std::vector<Tensor<T>> prev, cur;
      for (std::size_t k = b0; k < b1; ++k) {
        prev.push_back(data.prev[order[k]].template cast<T>());
        cur.push_back(data.cur[order[k]].template cast<T>());
      }
      const Var<T> x_prev(stack_batch<T>(prev));
      const Var<T> x_t(stack_batch<T>(cur));
      adam.zero_grad();
      auto fail = [&](const std::string& why) {
        load_records(all, parse_checkpoint(snapshot));
        throw NumericError("train: " + why + " at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches) + "; parameters restored to the last completed epoch");
      };
      TrainForward<T> f;
      try {
        f = train_forward(sys, x_prev, x_t, sched.lambda, rng, ms);
      } catch (const NumericError& e) {
        fail(e.what());
      }
      const double loss = f.loss.item();
      if (!std::isfinite(loss)) fail("non-finite loss");
      backward(f.loss);
      adam.step();
      e.loss += loss;
      e.distortion += f.distortion.item();
      e.rm_bpp += f.rm_bpp.item();
      e.rc_bpp += f.rc_bpp.item();
      ++batches;
      if (opt.on_step) opt.on_step(epoch, batches);
    }
    e.loss /= batches;
    e.distortion /= batches;
    e.rm_bpp /= batches;
    e.rc_bpp /= batches;
    log.push_back(e);
    snapshot = serialize_checkpoint(to_records(all));
    if (!opt.checkpoint_dir.empty()) {
      std::ostringstream name;
      name << opt.checkpoint_dir << "/epoch_" << std::setw(3) << std::setfill('0') << epoch << ".mdnw";
      write_file_bytes(name.str(), snapshot);
      write_file_bytes(opt.checkpoint_dir + "/last.mdnw", snapshot);
      std::ofstream(opt.checkpoint_dir + "/loss_log.csv") << loss_log_csv(log);
    }
    if (opt.on_epoch) opt.on_epoch(e);
  }
  set_trainable(all, true);
  return log;
}

}  // namespace mdn
