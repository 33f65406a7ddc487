// mdn: train, code and inspect ModeNet/CodecNet P-frame systems.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mdn/pipeline/analysis.hpp"
#include "mdn/pipeline/config.hpp"
#include "mdn/pipeline/dataset.hpp"

using namespace mdn;
namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kFormat = 5,
  kHash = 6,
  kShape = 7,
  kValue = 8,
  kNumeric = 9,
  kRange = 10,
};

const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (bad command line)\n"
    "  3  config error (unknown key, bad value)\n"
    "  4  I/O error (missing or unwritable file)\n"
    "  5  format error (malformed bitstream, checkpoint, PNG or manifest)\n"
    "  6  model hash mismatch between bitstream and checkpoint\n"
    "  7  shape error (frame sizes, checkpoint shapes)\n"
    "  8  invalid value\n"
    "  9  numeric error (non-finite loss or values)\n"
    " 10  symbol outside the coder alphabet\n"
    "Errors are reported on stderr as one line:\n"
    "  mdn: error code=<n> kind=<kind> message=\"<text>\"\n";

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

int report(int code, const char* kind, const std::string& msg) {
  std::cerr << "mdn: error code=" << code << " kind=" << kind << " message=\"" << one_line(msg) << "\"\n";
  return code;
}

// Options shared by every command that needs a configuration.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value configuration file (defaults for missing keys)");
    cmd->add_option("--set", overrides, "override one key, e.g. --set lambda=0.003")->take_all();
  }

  RunConfig load() const {
    RunConfig c;
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw IoError("cannot open config " + file);
      std::stringstream ss;
      ss << in.rdbuf();
      c = RunConfig::parse(ss.str());
    }
    for (const auto& kv : overrides) c.apply_override(kv);
    return c;
  }
};

void echo_config(const RunConfig& c, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.txt");
  if (!out) throw IoError("cannot write " + (dir / "resolved_config.txt").string());
  out << "# mdn " << MDN_VERSION << "\n" << c.resolved_text();
}

std::string lambda_tag(double lambda) {
  std::ostringstream os;
  os << "lambda_" << lambda;
  return os.str();
}

FrameBatchSource load_data(const RunConfig& c) {
  const std::string kind = c.get("data");
  if (kind == "synth") return batch_source(synth_dataset(c.synth(), static_cast<int>(c.get_int("synth.count"))));
  if (kind == "manifest") {
    const std::string path = c.get("manifest");
    if (path.empty()) throw ConfigError("data = manifest needs the manifest key");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_manifest(parse_manifest(ss.str()), static_cast<int>(c.get_int("crop")));
  }
  throw ConfigError("config key 'data' = '" + kind + "' is not synth or manifest");
}

PFrameSystem<float> load_system(const RunConfig& c, const std::string& checkpoint) {
  PFrameSystem<float> sys(c.system(), 0);
  load_checkpoint(checkpoint, sys.parameters());
  return sys;
}

int cmd_train(const RunConfig& c, bool sweep) {
  const SystemConfig sc = c.system();
  const TrainSchedule base = c.schedule();
  const FrameBatchSource data = load_data(c);
  const fs::path out(c.get("out_dir"));
  echo_config(c, out);
  std::vector<double> lambdas = sweep ? c.get_list("lambda_grid") : std::vector<double>{base.lambda};
  if (lambdas.empty()) throw ConfigError("lambda_grid is empty");
  for (double lambda : lambdas) {
    TrainSchedule sched = base;
    sched.lambda = lambda;
    const fs::path dir = sweep ? out / lambda_tag(lambda) : out;
    PFrameSystem<float> sys(sc, sched.seed);
    std::cout << "training " << sc.describe() << " lambda=" << lambda << " pairs=" << data.size()
              << " epochs=" << sched.total_epochs() << " -> " << dir.string() << "\n";
    TrainOptions opt;
    opt.checkpoint_dir = dir.string();
    opt.on_epoch = [](const EpochLog& e) {
      std::cout << "epoch " << e.epoch << " " << stage_name(e.stage) << " loss=" << e.loss
                << " distortion=" << e.distortion << " rm_bpp=" << e.rm_bpp << " rc_bpp=" << e.rc_bpp << std::endl;
    };
    train_system(sys, data, sched, opt);
    std::cout << "checkpoint " << (dir / "last.mdnw").string() << "\n";
  }
  return kOk;
}

int cmd_eval(const RunConfig& c, const std::vector<std::string>& models, const std::string& csv, int workers) {
  std::vector<RdModel> list;
  for (const auto& m : models) {
    const auto eq = m.find('=');
    if (eq == std::string::npos) throw ConfigError("--model expects LAMBDA=CHECKPOINT, got '" + m + "'");
    try {
      list.push_back({std::stod(m.substr(0, eq)), m.substr(eq + 1)});
    } catch (const std::logic_error&) {
      throw ConfigError("--model: bad lambda in '" + m + "'");
    }
  }
  const fs::path out(c.get("out_dir"));
  if (list.empty()) {
    for (double l : c.get_list("lambda_grid")) list.push_back({l, (out / lambda_tag(l) / "last.mdnw").string()});
  }
  const FrameBatchSource data = load_data(c);
  const auto points = eval_rd<float>(c.system(), list, data, std::cerr, workers);
  const std::string path = csv.empty() ? (out / "rd.csv").string() : csv;
  echo_config(c, fs::path(path).parent_path().empty() ? fs::path(".") : fs::path(path).parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << rd_csv(points);
  for (const auto& p : points) {
    std::cout << "lambda=" << p.lambda << " bpp=" << p.bpp << " msssim=" << p.msssim << " msssim_db=" << p.msssim_db
              << "\n";
  }
  std::cout << "wrote " << path << " (" << points.size() << " of " << list.size() << " models)\n";
  return kOk;
}

int cmd_encode(const RunConfig& c, const std::string& prev, const std::string& cur, const std::string& ckpt,
               const std::string& out) {
  const Tensor<float> x_prev = read_png(prev);
  const Tensor<float> x_t = read_png(cur);
  const auto sys = load_system(c, ckpt);
  const auto enc = encode_pair(sys, x_prev, x_t);
  const auto bytes = enc.stream.serialize();
  write_file_bytes(out, bytes);
  std::cout << "wrote " << out << " bytes=" << bytes.size() << " header_bytes=" << Bitstream::kHeaderBytes
            << " width=" << enc.stream.width << " height=" << enc.stream.height << std::setprecision(8)
            << " bpp=" << enc.bpp() << " payload_bpp=" << enc.stream.payload_bpp() << "\n";
  return kOk;
}

int cmd_decode(const RunConfig& c, const std::string& in, const std::string& prev, const std::string& ckpt,
               const std::string& out, const std::string& alpha_out) {
  const auto sys = load_system(c, ckpt);
  const Bitstream bs = Bitstream::parse(read_file_bytes(in));
  const auto dec = decode_pair(sys, bs, read_png(prev));
  write_png(out, dec.x_hat);
  if (!alpha_out.empty()) write_png(alpha_out, dec.alpha);
  std::cout << "wrote " << out << " width=" << bs.width << " height=" << bs.height << std::setprecision(8)
            << " bpp=" << dec.bpp << "\n";
  return kOk;
}

// Black-red-yellow-white ramp for v in [0, 1].
std::array<float, 3> heat(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return {static_cast<float>(std::min(1.0, 3 * v)), static_cast<float>(std::clamp(3 * v - 1, 0.0, 1.0)),
          static_cast<float>(std::clamp(3 * v - 2, 0.0, 1.0))};
}

int cmd_visualize(const RunConfig& c, const std::string& prev_path, const std::string& cur_path,
                  const std::string& ckpt, const std::string& outdir) {
  const auto sys = load_system(c, ckpt);
  const Tensor<float> prev = read_png(prev_path);
  const Tensor<float> cur = read_png(cur_path);
  const double lambda = c.get_double("lambda");
  const auto enc = encode_pair(sys, prev, cur);
  const auto diag = diagnose_pair(sys, prev, cur, lambda);
  const Shape s = cur.shape();
  const Tensor<float> alpha = crop(enc.detail.alpha, s.h, s.w);
  Tensor<float> copy(s), transmit(s), heatmap(s);
  double max_rate = 0;
  for (double r : diag.rate) max_rate = std::max(max_rate, r);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      const float a = alpha.at(0, 0, y, x);
      const auto h = heat(max_rate > 0 ? diag.rate[static_cast<std::size_t>(y) * s.w + x] / max_rate : 0.0);
      for (int ch = 0; ch < 3; ++ch) {
        copy.at(0, ch, y, x) = (1 - a) * prev.at(0, ch, y, x);
        transmit.at(0, ch, y, x) = a * cur.at(0, ch, y, x);
        heatmap.at(0, ch, y, x) = h[static_cast<std::size_t>(ch)];
      }
    }
  const fs::path dir(outdir);
  fs::create_directories(dir);
  echo_config(c, dir);
  write_png((dir / "alpha.png").string(), alpha);
  write_png((dir / "copy.png").string(), copy);
  write_png((dir / "transmit.png").string(), transmit);
  write_png((dir / "rate.png").string(), heatmap);
  write_png((dir / "reconstruction.png").string(), enc.x_hat);
  std::ofstream csv(dir / "rate.csv");
  if (!csv) throw IoError("cannot write " + (dir / "rate.csv").string());
  csv << "y,x,alpha,rate_bits,d_copy,d_codec,in_s\n" << std::setprecision(8);
  double alpha_sum = 0;
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * s.w + x;
      alpha_sum += alpha[i];
      csv << y << "," << x << "," << alpha[i] << "," << diag.rate[i] << "," << diag.d_copy[i] << ","
          << diag.d_codec[i] << "," << int(diag.in_s[i]) << "\n";
    }
  const double n = static_cast<double>(diag.pixels());
  std::cout << std::setprecision(6) << "alpha_mean=" << alpha_sum / n << " bpp=" << enc.bpp()
            << " copy_set_fraction=" << static_cast<double>(diag.s_count) / n
            << " zero_rate_pixels=" << diag.zero_rate << " agreement=" << diag.agreement.value_or(0)
            << " max_rate_bits=" << max_rate << " -> " << dir.string() << "\n";
  return kOk;
}

int cmd_synth(const RunConfig& c, const std::string& outdir) {
  const SynthSpec spec = c.synth();
  const int count = static_cast<int>(c.get_int("synth.count"));
  const fs::path dir(outdir);
  fs::create_directories(dir);
  echo_config(c, dir);
  std::vector<ManifestEntry> manifest;
  Rng rng(spec.seed);
  for (int i = 0; i < count; ++i) {
    const SynthPair p = synth_pair(spec, rng);
    std::ostringstream stem;
    stem << "pair_" << std::setw(5) << std::setfill('0') << i;
    const std::string prev = (dir / (stem.str() + "_prev.png")).string();
    const std::string cur = (dir / (stem.str() + "_cur.png")).string();
    write_png(prev, p.x_prev);
    write_png(cur, p.x_t);
    write_png((dir / (stem.str() + "_mask.png")).string(), p.motion);
    manifest.push_back({prev, cur, 0, 0});
  }
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw IoError("cannot write " + (dir / "manifest.txt").string());
  m << manifest_text(manifest);
  std::cout << "wrote " << count << " pairs and manifest.txt to " << dir.string() << "\n";
  return kOk;
}

int cmd_crops(const std::string& frames, int crop, int count, std::uint64_t seed, const std::string& out) {
  const auto m = make_crop_manifest(frames, crop, count, seed);
  std::ofstream f(out);
  if (!f) throw IoError("cannot write " + out);
  f << manifest_text(m);
  std::cout << "wrote " << m.size() << " crops to " << out << "\n";
  return kOk;
}

int cmd_config(const RunConfig& c, bool describe) {
  c.system();
  c.schedule();
  c.synth();
  if (!describe) {
    std::cout << c.resolved_text();
    return kOk;
  }
  for (const auto& k : config_keys()) {
    std::cout << k.name << " = " << c.get(k.name) << "    # " << k.help << " (default " << k.default_value << ")\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mdn " MDN_VERSION ": learned P-frame coding with ModeNet and CodecNet"};
  app.footer(kExitCodeHelp);
  app.set_version_flag("--version", std::string("mdn ") + MDN_VERSION);
  app.require_subcommand(1);

  ConfigArgs train_cfg, eval_cfg, enc_cfg, dec_cfg, vis_cfg, synth_cfg, show_cfg;
  bool sweep = false, describe = false;
  int workers = 1, crop = 256, count = 10000;
  std::uint64_t seed = 1;
  std::string prev, cur, ckpt, out, in, alpha_out, outdir, csv, frames;
  std::vector<std::string> models;

  auto* train = app.add_subcommand("train", "train one system (or one per lambda_grid entry with --sweep)");
  train_cfg.add(train);
  train->add_flag("--sweep", sweep, "train every lambda of lambda_grid into out_dir/lambda_<value>");

  auto* eval = app.add_subcommand("eval", "RD points (coded bpp, MS-SSIM) of trained checkpoints");
  eval_cfg.add(eval);
  eval->add_option("--model", models, "LAMBDA=CHECKPOINT (repeatable); default out_dir/lambda_<v>/last.mdnw");
  eval->add_option("-o,--output", csv, "RD csv path (default out_dir/rd.csv)");
  eval->add_option("--workers", workers, "evaluation threads")->check(CLI::PositiveNumber);

  auto* encode = app.add_subcommand("encode", "code x_t given x_prev into a .mdn file");
  enc_cfg.add(encode);
  encode->add_option("prev", prev, "previous frame (PNG)")->required();
  encode->add_option("cur", cur, "frame to code (PNG)")->required();
  encode->add_option("-c,--checkpoint", ckpt, "trained weights (.mdnw)")->required();
  encode->add_option("-o,--output", out, "output .mdn")->required();

  auto* decode = app.add_subcommand("decode", "reconstruct x_t from a .mdn file and x_prev");
  dec_cfg.add(decode);
  decode->add_option("input", in, ".mdn file")->required();
  decode->add_option("prev", prev, "previous frame (PNG)")->required();
  decode->add_option("-c,--checkpoint", ckpt, "trained weights (.mdnw)")->required();
  decode->add_option("-o,--output", out, "reconstructed frame (PNG)")->required();
  decode->add_option("--alpha", alpha_out, "also write the decoded alpha map (PNG)");

  auto* vis = app.add_subcommand("visualize", "alpha map, copy/transmit regions and CodecNet rate map of one pair");
  vis_cfg.add(vis);
  vis->add_option("prev", prev, "previous frame (PNG)")->required();
  vis->add_option("cur", cur, "frame to code (PNG)")->required();
  vis->add_option("-c,--checkpoint", ckpt, "trained weights (.mdnw)")->required();
  vis->add_option("-o,--outdir", outdir, "output directory")->required();

  auto* synth = app.add_subcommand("synth", "write synthetic moving-object pairs (synth.* keys) and a manifest");
  synth_cfg.add(synth);
  synth->add_option("-o,--outdir", outdir, "output directory")->required();

  auto* crops = app.add_subcommand("crops", "manifest of seeded random crops from a directory of consecutive PNG frames");
  crops->add_option("frames", frames, "directory of frames, consecutive in name order")->required();
  crops->add_option("--crop", crop, "crop side in pixels")->check(CLI::PositiveNumber);
  crops->add_option("--count", count, "number of crop pairs")->check(CLI::NonNegativeNumber);
  crops->add_option("--seed", seed, "crop position seed");
  crops->add_option("-o,--output", out, "manifest path")->required();

  auto* config = app.add_subcommand("config", "print the resolved configuration");
  show_cfg.add(config);
  config->add_flag("--describe", describe, "include each key's documentation and default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kUsage, "usage", e.what());
  }

  try {
    if (train->parsed()) return cmd_train(train_cfg.load(), sweep);
    if (eval->parsed()) return cmd_eval(eval_cfg.load(), models, csv, workers);
    if (encode->parsed()) return cmd_encode(enc_cfg.load(), prev, cur, ckpt, out);
    if (decode->parsed()) return cmd_decode(dec_cfg.load(), in, prev, ckpt, out, alpha_out);
    if (vis->parsed()) return cmd_visualize(vis_cfg.load(), prev, cur, ckpt, outdir);
    if (synth->parsed()) return cmd_synth(synth_cfg.load(), outdir);
    if (crops->parsed()) return cmd_crops(frames, crop, count, seed, out);
    if (config->parsed()) return cmd_config(show_cfg.load(), describe);
  } catch (const ConfigError& e) {
    return report(kConfig, "config", e.what());
  } catch (const IoError& e) {
    return report(kIo, "io", e.what());
  } catch (const FormatError& e) {
    return report(kFormat, "format", e.what());
  } catch (const HashMismatchError& e) {
    return report(kHash, "hash_mismatch", e.what());
  } catch (const ShapeError& e) {
    return report(kShape, "shape", e.what());
  } catch (const ValueError& e) {
    return report(kValue, "value", e.what());
  } catch (const NumericError& e) {
    return report(kNumeric, "numeric", e.what());
  } catch (const RangeError& e) {
    return report(kRange, "range", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report(kIo, "io", e.what());
  } catch (const std::exception& e) {
    return report(kInternal, "internal", e.what());
  }
  return report(kInternal, "internal", "no command ran");
}
