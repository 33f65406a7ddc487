#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mdn/pipeline/analysis.hpp"
#include "mdn/pipeline/config.hpp"
#include "mdn/pipeline/dataset.hpp"
#include "test_util.hpp"

using namespace mdn;
namespace fs = std::filesystem;

namespace {

SystemConfig tiny_system(CodecMode m = CodecMode::Conditional, bool modenet = true, bool ctx = true) {
  return {modenet, {4, 4, 4, 4, ctx}, {m, 8, 8, 4, 4, ctx}};
}

Tensor<float> frame(Rng& rng, int h = 64, int w = 64) {
  return test::random_tensor_t<float>(Shape{1, 3, h, w}, rng, 0.0, 1.0);
}

// Pushes alpha away from the constant 0.5 of a fresh ModeNet.
void jiggle(const ParamList<float>& params, Rng& rng, double amp = 0.3) {
  for (const auto& p : params) {
    for (auto& v : p.var.mutable_value().vec()) v += static_cast<float>(rng.uniform(-amp, amp));
  }
}

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mdn_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(System, BlendIdentity) {
  Rng rng(1);
  PFrameSystem<float> sys(tiny_system(), 2);
  jiggle(sys.mode_parameters(), rng);
  const Tensor<float> xp = frame(rng), xt = frame(rng);
  const auto out = infer_forward(sys, xp, xt);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const float a = out.alpha.at(0, 0, y, x);
        EXPECT_NEAR(out.x_hat.at(0, c, y, x), (1 - a) * xp.at(0, c, y, x) + out.x_c.at(0, c, y, x), 1e-6);
      }
}

TEST(System, ZeroAlphaCopiesPrediction) {
  Rng rng(2);
  PFrameSystem<float> sys(tiny_system(), 3);
  const Tensor<float> xp = frame(rng), xt = frame(rng);
  const auto out = infer_forward(sys, xp, xt, std::optional(Tensor<float>(Shape{1, 1, 64, 64}, 0.0f)));
  EXPECT_EQ(out.x_hat, xp);
  EXPECT_FALSE(out.codec_code.has_value());
  EXPECT_EQ(out.rc_bits, 0.0);
}

TEST(System, UnitAlphaMatchesCodecOnly) {
  Rng rng(3);
  // Same seed: both systems draw identical CodecNet weights.
  PFrameSystem<float> with_mode(tiny_system(), 4);
  PFrameSystem<float> codec_only(tiny_system(CodecMode::Conditional, false), 4);
  const Tensor<float> xp = frame(rng), xt = frame(rng);
  const auto a = infer_forward(with_mode, xp, xt, std::optional(ones_alpha<float>(xt.shape())));
  const auto b = infer_forward(codec_only, xp, xt);
  EXPECT_EQ(a.x_hat, b.x_hat);
  EXPECT_EQ(a.codec_code->y, b.codec_code->y);
}

TEST(System, InferenceIsDeterministic) {
  Rng rng(4);
  PFrameSystem<float> sys(tiny_system(), 5);
  const Tensor<float> xp = frame(rng), xt = frame(rng);
  const auto a = infer_forward(sys, xp, xt);
  std::vector<Tensor<float>> churn;  // shifts later heap allocations
  for (int i = 1; i < 20; ++i) churn.emplace_back(Shape{1, 1, 1, i});
  const auto b = infer_forward(sys, xp, xt);
  EXPECT_EQ(a.x_hat, b.x_hat);
}

TEST(Codec, PaddedExtent) {
  EXPECT_EQ(padded_extent(720), 768);
  EXPECT_EQ(padded_extent(1280), 1280);
  EXPECT_EQ(padded_extent(1), 64);
  EXPECT_EQ(padded_extent(64), 64);
  Rng rng(5);
  EXPECT_EQ(pad_frame(frame(rng, 72, 80)).shape(), (Shape{1, 3, 128, 128}));
}

TEST(Codec, RoundTripBitExact) {
  for (auto m : {CodecMode::Image, CodecMode::Difference, CodecMode::Conditional}) {
    for (bool ctx : {false, true}) {
      Rng rng(6);
      PFrameSystem<float> sys(tiny_system(m, true, ctx), 7);
      jiggle(sys.mode_parameters(), rng, 0.1);
      const Tensor<float> xp = frame(rng, 72, 80), xt = frame(rng, 72, 80);
      const auto enc = encode_pair(sys, xp, xt);
      const Bitstream bs = Bitstream::parse(enc.stream.serialize());
      EXPECT_EQ(bs, enc.stream);
      const auto dec = decode_pair(sys, bs, xp);
      EXPECT_EQ(dec.x_hat, enc.x_hat) << codec_mode_name(m) << " ctx=" << ctx;
      EXPECT_EQ(dec.x_hat.shape(), xt.shape());
      EXPECT_EQ(dec.alpha.shape(), (Shape{1, 1, 72, 80}));
    }
  }
}

TEST(Codec, DecodeNeedsOnlyReference) {
  Rng rng(7);
  PFrameSystem<float> sys(tiny_system(), 8);
  jiggle(sys.mode_parameters(), rng, 0.1);
  const Tensor<float> xp = frame(rng);
  Tensor<float> xt = frame(rng);
  const auto bytes = encode_pair(sys, xp, xt).stream.serialize();
  const auto before = decode_pair(sys, Bitstream::parse(bytes), xp);
  xt.fill(0.0f);  // the decoder never sees x_t
  const auto after = decode_pair(sys, Bitstream::parse(bytes), xp);
  EXPECT_EQ(before.x_hat, after.x_hat);
}

TEST(Codec, StreamsAreReproducible) {
  Rng r1(8), r2(8);
  PFrameSystem<float> a(tiny_system(), 9), b(tiny_system(), 9);
  const Tensor<float> xp = frame(r1), xt = frame(r1);
  const Tensor<float> xp2 = frame(r2), xt2 = frame(r2);
  EXPECT_EQ(encode_pair(a, xp, xt).stream.serialize(), encode_pair(b, xp2, xt2).stream.serialize());
}

TEST(Codec, HashMismatchRejected) {
  Rng rng(9);
  PFrameSystem<float> a(tiny_system(), 10), b(tiny_system(), 11);
  const Tensor<float> xp = frame(rng), xt = frame(rng);
  const auto enc = encode_pair(a, xp, xt);
  EXPECT_THROW(decode_pair(b, enc.stream, xp), HashMismatchError);
  PFrameSystem<float> other_mode(tiny_system(CodecMode::Difference), 10);
  EXPECT_THROW(decode_pair(other_mode, enc.stream, xp), HashMismatchError);
}

TEST(Codec, WrongReferenceSizeRejected) {
  Rng rng(10);
  PFrameSystem<float> sys(tiny_system(), 11);
  const auto enc = encode_pair(sys, frame(rng), frame(rng));
  EXPECT_THROW(decode_pair(sys, enc.stream, frame(rng, 64, 128)), ShapeError);
}

TEST(Codec, TamperedStreamRejected) {
  Rng rng(11);
  PFrameSystem<float> sys(tiny_system(), 12);
  const auto bytes = encode_pair(sys, frame(rng), frame(rng)).stream.serialize();
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(Bitstream::parse(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(Bitstream::parse(truncated), FormatError);
  auto flags = bytes;
  flags[6] |= 0x80;
  EXPECT_THROW(Bitstream::parse(flags), FormatError);
  auto hash = bytes;
  hash[14] ^= 1;
  EXPECT_THROW(decode_pair(sys, Bitstream::parse(hash), frame(rng)), HashMismatchError);
}

TEST(Codec, BppCountsWholeFile) {
  Rng rng(12);
  PFrameSystem<float> sys(tiny_system(), 13);
  const auto enc = encode_pair(sys, frame(rng, 64, 96), frame(rng, 64, 96));
  const auto bytes = enc.stream.serialize();
  EXPECT_EQ(bytes.size(), enc.stream.total_bytes());
  EXPECT_DOUBLE_EQ(enc.bpp(), 8.0 * static_cast<double>(bytes.size()) / (64 * 96));
  // A skipped codec costs only the header and the ModeNet chunks.
  PFrameSystem<float> codec_only(tiny_system(CodecMode::Conditional, false), 13);
  const Tensor<float> xp = frame(rng), xt = frame(rng);
  const auto skip = encode_pair(codec_only, xp, xt, std::optional(Tensor<float>(Shape{1, 1, 64, 64}, 0.0f)));
  EXPECT_EQ(skip.stream.payload_bytes(), 0u);
  EXPECT_EQ(skip.x_hat, xp);
}

TEST(Codec, ForcedAlphaRejectedWithModeNet) {
  Rng rng(13);
  PFrameSystem<float> sys(tiny_system(), 14);
  EXPECT_THROW(encode_pair(sys, frame(rng), frame(rng), std::optional(Tensor<float>(Shape{1, 1, 64, 64}, 1.0f))),
               ValueError);
}

TEST(Synth, StaticSceneHasNoMotion) {
  SynthSpec s;
  s.min_speed = s.max_speed = 0;
  for (const auto& p : synth_dataset(s, 5)) {
    EXPECT_EQ(p.x_prev, p.x_t);
    for (float v : p.motion.vec()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Synth, MotionBoundedByObjectArea) {
  SynthSpec s;
  for (const auto& p : synth_dataset(s, 20)) {
    double moving = 0;
    for (float v : p.motion.vec()) moving += v;
    EXPECT_LE(moving, 2.0 * s.objects * s.max_size * s.max_size);
    // Pixels outside the mask are identical in both frames.
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
          if (p.motion.at(0, 0, y, x) == 0) {
            EXPECT_EQ(p.x_prev.at(0, c, y, x), p.x_t.at(0, c, y, x));
          }
        }
  }
}

TEST(Synth, Reproducible) {
  SynthSpec s;
  s.seed = 42;
  const auto a = synth_dataset(s, 3), b = synth_dataset(s, 3);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].x_t, b[i].x_t);
    EXPECT_EQ(a[i].motion, b[i].motion);
  }
  s.seed = 43;
  EXPECT_NE(synth_dataset(s, 1)[0].x_t, a[0].x_t);
}

TEST(Synth, InvalidSpecRejected) {
  SynthSpec s;
  s.min_size = 0;
  EXPECT_THROW(s.validate(), ValueError);
  s = {};
  s.max_speed = 1;
  EXPECT_THROW(s.validate(), ValueError);
}

namespace {

FrameBatchSource tiny_data(int count = 4) {
  SynthSpec s;
  s.seed = 5;
  return batch_source(synth_dataset(s, count));
}

TrainSchedule tiny_schedule() {
  TrainSchedule t;
  t.warmup_epochs = 1;
  t.alternate_epochs = 2;
  t.batch = 2;
  t.lr.base_lr = 1e-3;
  return t;
}

std::uint64_t checksum(const ParamList<float>& p) {
  const auto bytes = serialize_checkpoint(to_records(p));
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace

TEST(Train, StageSchedule) {
  TrainSchedule t = tiny_schedule();
  t.warmup_epochs = 2;
  t.alternate_epochs = 4;
  EXPECT_EQ(stage_of(t, 0, true), Stage::Warmup);
  EXPECT_EQ(stage_of(t, 1, true), Stage::Warmup);
  EXPECT_EQ(stage_of(t, 2, true), Stage::Mode);
  EXPECT_EQ(stage_of(t, 3, true), Stage::Codec);
  EXPECT_EQ(stage_of(t, 4, true), Stage::Mode);
  EXPECT_EQ(stage_of(t, 2, false), Stage::Codec);
}

TEST(Train, FrozenNetworkUnchanged) {
  PFrameSystem<float> sys(tiny_system(CodecMode::Conditional, true, false), 20);
  const auto mode = sys.mode_parameters();
  const auto codec = sys.codec_parameters();
  std::uint64_t m_prev = checksum(mode), c_prev = checksum(codec);
  int violations = 0, steps = 0;
  TrainOptions opt;
  opt.on_step = [&](int epoch, int) {
    const Stage s = stage_of(tiny_schedule(), epoch, true);
    const std::uint64_t m = checksum(mode), c = checksum(codec);
    if (s != Stage::Mode && m != m_prev) ++violations;
    if (s == Stage::Mode && c != c_prev) ++violations;
    if (s == Stage::Mode && m == m_prev) ++violations;
    if (s != Stage::Mode && c == c_prev) ++violations;
    m_prev = m;
    c_prev = c;
    ++steps;
  };
  const auto log = train_system(sys, tiny_data(), tiny_schedule(), opt);
  EXPECT_EQ(steps, 6);
  EXPECT_EQ(violations, 0);
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0].stage, Stage::Warmup);
  EXPECT_EQ(log[1].stage, Stage::Mode);
  EXPECT_EQ(log[2].stage, Stage::Codec);
  for (const auto& p : sys.parameters()) EXPECT_TRUE(p.var.requires_grad());
}

TEST(Train, CodecOnlyWithoutAlternation) {
  PFrameSystem<float> sys(tiny_system(CodecMode::Image, false, false), 21);
  TrainSchedule t = tiny_schedule();
  t.alternate_epochs = 0;
  const auto log = train_system(sys, tiny_data(), t);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].rm_bpp, 0.0);
  EXPECT_TRUE(std::isfinite(log[0].loss));
}

TEST(Train, NonFiniteLossRestoresParameters) {
  PFrameSystem<float> sys(tiny_system(CodecMode::Conditional, true, false), 22);
  FrameBatchSource data = tiny_data();
  TrainSchedule t = tiny_schedule();
  t.warmup_epochs = 1;
  t.alternate_epochs = 0;
  // Train once, then poison the data: the next run must fail on its first
  // batch and leave the parameters as they were.
  train_system(sys, data, t);
  const std::uint64_t good = checksum(sys.parameters());
  for (auto& x : data.cur) x[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train_system(sys, data, t), NumericError);
  EXPECT_EQ(checksum(sys.parameters()), good);
}

TEST(Train, LossLogAndCheckpoints) {
  const fs::path dir = temp_dir("train");
  PFrameSystem<float> sys(tiny_system(CodecMode::Difference, true, false), 23);
  TrainOptions opt;
  opt.checkpoint_dir = dir.string();
  const auto log = train_system(sys, tiny_data(), tiny_schedule(), opt);
  std::ifstream in(dir / "loss_log.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kLossLogHeader);
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 3);
  EXPECT_TRUE(fs::exists(dir / "epoch_000.mdnw"));
  EXPECT_TRUE(fs::exists(dir / "epoch_002.mdnw"));
  PFrameSystem<float> back(tiny_system(CodecMode::Difference, true, false), 99);
  load_checkpoint((dir / "last.mdnw").string(), back.parameters());
  EXPECT_EQ(back.hash(), sys.hash());
  fs::remove_all(dir);
}

TEST(Train, InvalidScheduleRejected) {
  TrainSchedule t;
  t.warmup_epochs = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.mode_lr_scale = 0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Config, DefaultsAndOverrides) {
  RunConfig c = RunConfig::parse("# comment\nlambda = 0.05\n\ncodec.mode = image  # trailing\n");
  c.apply_override("seed=7");
  EXPECT_DOUBLE_EQ(c.schedule().lambda, 0.05);
  EXPECT_EQ(c.schedule().seed, 7u);
  EXPECT_EQ(c.system().codec.mode, CodecMode::Image);
  EXPECT_EQ(c.system().mode.f, 32);
  const auto drops = c.get_list("lr_drops");
  EXPECT_EQ(drops, (std::vector<double>{0.5, 0.75}));
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(RunConfig::parse("lamda = 0.01\n"), ConfigError);
  RunConfig c;
  EXPECT_THROW(c.apply_override("nope=1"), ConfigError);
  EXPECT_THROW(c.apply_override("lambda"), ConfigError);
  EXPECT_THROW(RunConfig::parse("just words\n"), ConfigError);
}

TEST(Config, BadValuesRejected) {
  RunConfig c;
  c.set("batch", "eight");
  EXPECT_THROW(c.schedule(), ConfigError);
  c = RunConfig();
  c.set("codec.mode", "magic");
  EXPECT_THROW(c.system(), ConfigError);
  c = RunConfig();
  c.set("synth.min_size", "0");
  EXPECT_THROW(c.synth(), ConfigError);
}

TEST(Config, ResolvedTextRoundTrips) {
  RunConfig c;
  c.set("lambda", "0.02");
  const std::string text = c.resolved_text();
  EXPECT_NE(text.find("lambda = 0.02\n"), std::string::npos);
  EXPECT_EQ(RunConfig::parse(text).resolved_text(), text);
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  EXPECT_EQ(lines, config_keys().size());
}

TEST(Png, RoundTripOn8BitGrid) {
  const fs::path dir = temp_dir("png");
  Rng rng(30);
  const Tensor<float> img = quantize_8bit(frame(rng, 17, 23));
  write_png((dir / "a.png").string(), img);
  EXPECT_EQ(read_png((dir / "a.png").string()), img);
  const Tensor<float> gray = quantize_8bit(test::random_tensor_t<float>(Shape{1, 1, 5, 7}, rng, 0, 1));
  write_png((dir / "g.png").string(), gray);
  const Tensor<float> back = read_png((dir / "g.png").string());
  EXPECT_EQ(back.shape(), (Shape{1, 3, 5, 7}));
  for (int c = 0; c < 3; ++c) EXPECT_EQ(back.at(0, c, 4, 6), gray.at(0, 0, 4, 6));
  fs::remove_all(dir);
}

TEST(Png, Errors) {
  const fs::path dir = temp_dir("pngerr");
  EXPECT_THROW(read_png((dir / "missing.png").string()), IoError);
  std::ofstream((dir / "fake.png").string()) << "not a png at all";
  EXPECT_THROW(read_png((dir / "fake.png").string()), FormatError);
  Rng rng(31);
  write_png((dir / "ok.png").string(), frame(rng, 32, 32));
  auto bytes = read_file_bytes((dir / "ok.png").string());
  bytes.resize(bytes.size() / 2);
  write_file_bytes((dir / "cut.png").string(), bytes);
  EXPECT_THROW(read_png((dir / "cut.png").string()), FormatError);
  EXPECT_THROW(write_png((dir / "x.png").string(), Tensor<float>(Shape{1, 2, 4, 4})), ShapeError);
  fs::remove_all(dir);
}

TEST(Dataset, ManifestRoundTrip) {
  const std::vector<ManifestEntry> m = {{"a.png", "b.png", 0, 3}, {"b.png", "c.png", 10, 20}};
  EXPECT_EQ(parse_manifest(manifest_text(m)), m);
  EXPECT_THROW(parse_manifest("a.png b.png 1\n"), FormatError);
  EXPECT_THROW(parse_manifest("a.png b.png 1 2 3\n"), FormatError);
  EXPECT_THROW(parse_manifest("a.png b.png -1 2\n"), FormatError);
}

TEST(Dataset, CropsStayInsideFrames) {
  const fs::path dir = temp_dir("frames");
  Rng rng(32);
  for (int i = 0; i < 3; ++i) write_png((dir / ("f" + std::to_string(i) + ".png")).string(), frame(rng, 40, 50));
  write_png((dir / "f3.png").string(), frame(rng, 20, 20));  // too small: pairs f2/f3 skipped
  std::ostringstream warn;
  const auto m = make_crop_manifest(dir.string(), 32, 50, 7, warn);
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
  ASSERT_EQ(m.size(), 50u);
  for (const auto& e : m) {
    EXPECT_LE(e.crop_y, 40 - 32);
    EXPECT_LE(e.crop_x, 50 - 32);
    EXPECT_EQ(fs::path(e.cur).filename().string()[1] - fs::path(e.prev).filename().string()[1], 1);
  }
  EXPECT_EQ(make_crop_manifest(dir.string(), 32, 50, 7, warn), m);
  const FrameBatchSource src = load_manifest(m, 32);
  EXPECT_EQ(src.size(), 50u);
  EXPECT_EQ(src.cur[0].shape(), (Shape{1, 3, 32, 32}));
  EXPECT_EQ(src.cur[0], crop_at(read_png(m[0].cur), m[0].crop_y, m[0].crop_x, 32, 32));
  EXPECT_THROW(make_crop_manifest(dir.string(), 64, 5, 7, warn), ValueError);
  fs::remove_all(dir);
}

TEST(Diagnostic, TrivialPartitions) {
  Rng rng(40);
  const Tensor<float> x = frame(rng, 8, 8);
  Tensor<double> rate(Shape{1, 1, 8, 8}, 1.0);
  // Perfect prediction: every pixel is better copied.
  auto d = diagnostic_partition(x, x, frame(rng, 8, 8), rate, 0.01);
  EXPECT_EQ(d.s_count, 64u);
  // Perfect reconstruction and a bad prediction: transmit everywhere.
  Tensor<float> far = x;
  for (auto& v : far.vec()) v = 1 - v + 0.5f;
  d = diagnostic_partition(far, x, x, rate, 0.01, std::optional(Tensor<float>(Shape{1, 1, 8, 8}, 1.0f)));
  EXPECT_EQ(d.s_count, 0u);
  ASSERT_TRUE(d.agreement.has_value());
  EXPECT_EQ(*d.agreement, 1.0);
  // Zero rate: ell undefined, counted in S.
  rate.fill(0.0);
  d = diagnostic_partition(far, x, x, rate, 0.01);
  EXPECT_EQ(d.s_count, 64u);
  EXPECT_EQ(d.zero_rate, 64u);
  EXPECT_TRUE(std::isnan(d.ell[0]));
  EXPECT_THROW(diagnostic_partition(far, x, x, Tensor<double>(Shape{1, 1, 4, 4}), 0.01), ShapeError);
}

TEST(Diagnostic, PairUsesCodedRate) {
  Rng rng(41);
  PFrameSystem<float> sys(tiny_system(), 42);
  const Tensor<float> xp = frame(rng, 64, 80), xt = frame(rng, 64, 80);
  const auto d = diagnose_pair(sys, xp, xt, 0.01);
  EXPECT_EQ(d.pixels(), 64u * 80u);
  double total = 0;
  for (double r : d.rate) total += r;
  EXPECT_GT(total, 0);
  ASSERT_TRUE(d.agreement.has_value());
}

TEST(Eval, SkipsMissingCheckpoints) {
  const fs::path dir = temp_dir("eval");
  const SystemConfig cfg = tiny_system(CodecMode::Conditional, true, false);
  PFrameSystem<float> sys(cfg, 50);
  save_checkpoint((dir / "a.mdnw").string(), sys.parameters());
  const FrameBatchSource data = tiny_data(2);
  std::ostringstream warn;
  const auto pts = eval_rd<float>(cfg, {{0.01, (dir / "a.mdnw").string()}, {0.02, (dir / "none.mdnw").string()}},
                                  data, warn);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_NE(warn.str().find("0.02"), std::string::npos);
  const auto direct = evaluate_system(sys, data, 0.01);
  EXPECT_DOUBLE_EQ(pts[0].bpp, direct.bpp);
  const auto threaded = evaluate_system(sys, tiny_data(5), 0.01, 3);
  const auto serial = evaluate_system(sys, tiny_data(5), 0.01, 1);
  EXPECT_EQ(threaded.bpp, serial.bpp);
  EXPECT_EQ(threaded.msssim, serial.msssim);
  fs::remove_all(dir);
}
