#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdn/io/png.hpp"
#include "mdn/pipeline/codec.hpp"
#include "mdn/pipeline/config.hpp"

namespace mdn {
namespace {

namespace fs = std::filesystem;

const char* kTinyConfig =
    "mode.f = 4\nmode.n = 4\nmode.hyper_f = 4\nmode.hyper_n = 4\n"
    "codec.f = 8\ncodec.n = 8\ncodec.hyper_f = 4\ncodec.hyper_n = 4\ncodec.context = false\n"
    "warmup_epochs = 1\nalternate_epochs = 2\nbatch = 4\nlr = 1e-3\n"
    "synth.count = 8\nsynth.height = 64\nsynth.width = 64\n";

struct Cli {
  fs::path dir;
  std::string out;

  Cli() {
    dir = fs::temp_directory_path() / ("mdn_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "tiny.cfg") << kTinyConfig << "out_dir = " << (dir / "run").string() << "\n";
  }
  ~Cli() { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  int run(const std::string& args) {
    const std::string log = p("log.txt");
    const int status = std::system((std::string(MDN_CLI_PATH) + " " + args + " > " + log + " 2>&1").c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  RunConfig config() const {
    std::ifstream in(dir / "tiny.cfg");
    std::stringstream ss;
    ss << in.rdbuf();
    return RunConfig::parse(ss.str());
  }
};

TEST(Cli, TrainEncodeDecodeVisualizeEval) {
  Cli cli;
  const std::string cfg = " --config " + cli.p("tiny.cfg");
  ASSERT_EQ(cli.run("synth -o " + cli.p("data") + cfg), 0) << cli.out;
  ASSERT_TRUE(fs::exists(cli.p("data/pair_00007_cur.png")));
  ASSERT_EQ(cli.run("train" + cfg), 0) << cli.out;
  const std::string ckpt = cli.p("run/last.mdnw");
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_TRUE(fs::exists(cli.p("run/loss_log.csv")));
  EXPECT_TRUE(fs::exists(cli.p("run/resolved_config.txt")));

  // Coded frames need not be multiples of the padding grid.
  SynthSpec spec = cli.config().synth();
  spec.height = 48;
  spec.width = 80;
  Rng rng(5);
  const SynthPair pair = synth_pair(spec, rng);
  const std::string prev = cli.p("prev.png"), cur = cli.p("cur.png");
  write_png(prev, pair.x_prev);
  write_png(cur, pair.x_t);
  ASSERT_EQ(cli.run("encode " + prev + " " + cur + " -c " + ckpt + cfg + " -o " + cli.p("f.mdn")), 0) << cli.out;
  EXPECT_NE(cli.out.find("payload_bpp="), std::string::npos);
  ASSERT_EQ(cli.run("decode " + cli.p("f.mdn") + " " + prev + " -c " + ckpt + cfg + " -o " + cli.p("rec.png")), 0)
      << cli.out;

  // The decoded PNG is the 8-bit inference reconstruction.
  PFrameSystem<float> sys(cli.config().system(), 0);
  load_checkpoint(ckpt, sys.parameters());
  const auto enc = encode_pair(sys, read_png(prev), read_png(cur));
  EXPECT_EQ(read_png(cli.p("rec.png")), quantize_8bit(enc.x_hat));
  EXPECT_EQ(read_file_bytes(cli.p("f.mdn")), enc.stream.serialize());

  ASSERT_EQ(cli.run("visualize " + prev + " " + cur + " -c " + ckpt + cfg + " -o " + cli.p("vis")), 0) << cli.out;
  for (const char* f : {"alpha.png", "copy.png", "transmit.png", "rate.png", "rate.csv"}) {
    EXPECT_TRUE(fs::exists(cli.p(std::string("vis/") + f))) << f;
  }
  EXPECT_NE(cli.out.find("agreement="), std::string::npos);

  ASSERT_EQ(cli.run("eval --model 0.01=" + ckpt + " --model 0.03=" + cli.p("missing.mdnw") + cfg), 0) << cli.out;
  std::ifstream rd(cli.p("run/rd.csv"));
  std::string header, row, extra;
  std::getline(rd, header);
  std::getline(rd, row);
  EXPECT_FALSE(row.empty());
  EXPECT_FALSE(std::getline(rd, extra));

  // Decoding against a different model is a hash mismatch.
  PFrameSystem<float> other(cli.config().system(), 77);
  save_checkpoint(cli.p("other.mdnw"), other.parameters());
  EXPECT_EQ(cli.run("decode " + cli.p("f.mdn") + " " + prev + " -c " + cli.p("other.mdnw") + cfg + " -o " +
                    cli.p("x.png")),
            6)
      << cli.out;
  // Wrong reference size.
  write_png(cli.p("small.png"), Tensor<float>(Shape{1, 3, 32, 32}, 0.5f));
  EXPECT_EQ(cli.run("decode " + cli.p("f.mdn") + " " + cli.p("small.png") + " -c " + ckpt + cfg + " -o " +
                    cli.p("x.png")),
            7)
      << cli.out;
  // Truncated stream.
  auto bytes = read_file_bytes(cli.p("f.mdn"));
  bytes.resize(bytes.size() / 2);
  write_file_bytes(cli.p("cut.mdn"), bytes);
  EXPECT_EQ(cli.run("decode " + cli.p("cut.mdn") + " " + prev + " -c " + ckpt + cfg + " -o " + cli.p("x.png")), 5)
      << cli.out;
}

TEST(Cli, ErrorExitCodes) {
  Cli cli;
  EXPECT_EQ(cli.run("--version"), 0);
  EXPECT_NE(cli.out.find(MDN_VERSION), std::string::npos);
  EXPECT_EQ(cli.run("encode onlyone.png"), 2);
  EXPECT_EQ(cli.run("frobnicate"), 2);
  EXPECT_EQ(cli.run("config --set nope=1"), 3);
  EXPECT_NE(cli.out.find("kind=config"), std::string::npos);
  EXPECT_EQ(cli.run("config --set lambda=-1"), 3);
  EXPECT_EQ(cli.run("config --config " + cli.p("absent.cfg")), 4);
  EXPECT_EQ(cli.run("encode " + cli.p("a.png") + " " + cli.p("b.png") + " -c x -o y"), 4);
  std::ofstream(cli.p("junk.png")) << "not a png";
  EXPECT_EQ(cli.run("encode " + cli.p("junk.png") + " " + cli.p("junk.png") + " -c x -o y"), 5);
  EXPECT_EQ(cli.run("--help"), 0);
  EXPECT_NE(cli.out.find("Exit codes"), std::string::npos);
}

}  // namespace
}  // namespace mdn
