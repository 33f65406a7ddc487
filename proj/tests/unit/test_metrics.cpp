#include <gtest/gtest.h>

#include "mdn/metrics/metrics.hpp"
#include "msssim_reference.hpp"
#include "test_util.hpp"

namespace mdn {
namespace {

using test::grad_check;
using test::random_tensor;

Tensor<double> noisy_copy(const Tensor<double>& x, double amp, Rng& rng) {
  Tensor<double> y = x;
  for (auto& v : y.vec()) v = std::clamp(v + rng.uniform(-amp, amp), 0.0, 1.0);
  return y;
}

TEST(MsSsim, SelfSimilarityIsOne) {
  Rng rng(1);
  auto x = random_tensor(Shape{1, 3, 256, 256}, rng, 0, 1);
  EXPECT_NEAR(ms_ssim(Var<double>(x), Var<double>(x)).value()[0], 1.0, 1e-9);
  auto s = random_tensor(Shape{2, 3, 64, 64}, rng, 0, 1);
  EXPECT_NEAR(ms_ssim(Var<double>(s), Var<double>(s), MsSsimConfig::small()).value()[0], 1.0, 1e-9);
}

TEST(MsSsim, Symmetric) {
  Rng rng(2);
  auto a = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
  auto b = noisy_copy(a, 0.2, rng);
  const auto cfg = MsSsimConfig::small();
  EXPECT_NEAR(ms_ssim(Var<double>(a), Var<double>(b), cfg).value()[0],
              ms_ssim(Var<double>(b), Var<double>(a), cfg).value()[0], 1e-14);
}

TEST(MsSsim, MatchesDirectReference) {
  Rng rng(3);
  for (int pair = 0; pair < 2; ++pair) {
    auto a = random_tensor(Shape{1, 3, 256, 256}, rng, 0, 1);
    auto b = noisy_copy(a, 0.1 + 0.2 * pair, rng);
    const double got = ms_ssim(Var<double>(a), Var<double>(b)).value()[0];
    EXPECT_NEAR(got, test::reference_msssim(a, b, MsSsimConfig{}.weights), 1e-6);
  }
  auto a = random_tensor(Shape{2, 3, 70, 66}, rng, 0, 1);
  auto b = noisy_copy(a, 0.15, rng);
  const auto cfg = MsSsimConfig::small();
  EXPECT_NEAR(ms_ssim(Var<double>(a), Var<double>(b), cfg).value()[0], test::reference_msssim(a, b, cfg.weights), 1e-6);
}

TEST(MsSsim, DecreasesWithPerturbationAndStaysInRange) {
  Rng rng(4);
  auto x = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
  const auto cfg = MsSsimConfig::small();
  double prev = 1.0;
  for (double amp : {1e-3, 1e-2, 0.05, 0.2, 0.5}) {
    Rng local(5);
    const double v = ms_ssim(Var<double>(x), Var<double>(noisy_copy(x, amp, local)), cfg).value()[0];
    EXPECT_LT(v, prev) << amp;
    EXPECT_GT(v, -1.0);
    prev = v;
  }
  // Unrelated images, constant images and a shifted copy.
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
    auto b = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
    const double v = ms_ssim(Var<double>(a), Var<double>(b), cfg).value()[0];
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  Tensor<double> zero(Shape{1, 3, 64, 64}), one(Shape{1, 3, 64, 64}, 1.0);
  const double v = ms_ssim(Var<double>(zero), Var<double>(one), cfg).value()[0];
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1.0);
}

TEST(MsSsim, TooSmallSuggestsFewerScales) {
  Var<double> x(Tensor<double>(Shape{1, 3, 64, 64}));
  try {
    ms_ssim(x, x);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("fewer scales"), std::string::npos) << e.what();
  }
  EXPECT_EQ(MsSsimConfig{}.min_extent(), 176);
  EXPECT_EQ(MsSsimConfig::small().min_extent(), 44);
  EXPECT_EQ(MsSsimConfig::for_extent(64, 200).scales(), 3);
  EXPECT_EQ(MsSsimConfig::for_extent(176, 200).scales(), 5);
}

TEST(MsSsim, ExponentsRenormalize) {
  for (const auto& cfg : {MsSsimConfig{}, MsSsimConfig::small()}) {
    const auto w = cfg.normalized_weights();
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-15);
  }
  const auto g = MsSsimConfig{}.gaussian_taps();
  EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(g[0], g[10]);
}

TEST(MsSsim, DistortionGradientCheck) {
  Rng rng(6);
  auto x = random_tensor(Shape{1, 1, 64, 64}, rng, 0, 1);
  auto xh = noisy_copy(x, 0.1, rng);
  const auto cfg = MsSsimConfig::small();
  // Scaled by the pixel count so per-pixel gradients are O(1).
  auto r = grad_check({xh},
                      [&](const auto& in) {
                        return mul_scalar(rsub_scalar(1.0, ms_ssim(in[0], Var<double>(x), cfg)), 4096.0);
                      },
                      rng, 300, 1e-4);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(MsSsimDb, ClosedForms) {
  EXPECT_EQ(msssim_db(0.99), 20.0);
  EXPECT_EQ(msssim_db(0.9), 10.0);
  EXPECT_EQ(msssim_db(0.0), 0.0);
  EXPECT_NEAR(msssim_db(1.0), 100.0, 1e-6);
  EXPECT_TRUE(std::isfinite(msssim_db(1.0)));
}

TEST(RdLoss, TrivialCasesAndLinearity) {
  Rng rng(7);
  auto x = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
  auto xh = noisy_copy(x, 0.1, rng);
  const auto cfg = MsSsimConfig::small();
  Var<double> zero(Tensor<double>::scalar(0.0));
  EXPECT_NEAR(rd_loss(Var<double>(x), Var<double>(x), zero, zero, 0.3, cfg).value()[0], 0.0, 1e-9);
  const double d = 1.0 - ms_ssim(Var<double>(xh), Var<double>(x), cfg).value()[0];
  Var<double> rm(Tensor<double>::scalar(1000.0)), rc(Tensor<double>::scalar(3000.0));
  EXPECT_DOUBLE_EQ(rd_loss(Var<double>(xh), Var<double>(x), rm, rc, 0.0, cfg).value()[0], d);
  const double l1 = rd_loss(Var<double>(xh), Var<double>(x), rm, rc, 0.5, cfg).value()[0] - d;
  const double l2 = rd_loss(Var<double>(xh), Var<double>(x), rm, rc, 1.0, cfg).value()[0] - d;
  EXPECT_NEAR(l2, 2 * l1, 1e-12);
  EXPECT_THROW(rd_loss(Var<double>(xh), Var<double>(x), rm, rc, -0.1, cfg), ValueError);
}

TEST(RdLoss, BitsAndBppAgree) {
  Rng rng(8);
  auto x = random_tensor(Shape{1, 3, 64, 48}, rng, 0, 1);
  auto xh = noisy_copy(x, 0.1, rng);
  const auto cfg = MsSsimConfig::small();
  const double pixels = 64 * 48;
  Var<double> rm(Tensor<double>::scalar(0.12 * pixels)), rc(Tensor<double>::scalar(0.7 * pixels));
  Var<double> rmp(Tensor<double>::scalar(0.12)), rcp(Tensor<double>::scalar(0.7));
  EXPECT_NEAR(rd_loss(Var<double>(xh), Var<double>(x), rm, rc, 0.25, cfg).value()[0],
              rd_loss_bpp(Var<double>(xh), Var<double>(x), rmp, rcp, 0.25, cfg).value()[0], 1e-12);
}

TEST(RdCsv, RoundTripAndMalformed) {
  std::vector<RDPoint> pts{RDPoint::make(0.01, 0.25, 0.97), RDPoint::make(0.1, 0.05, 0.9)};
  const auto text = rd_csv(pts);
  EXPECT_EQ(text.substr(0, text.find('\n')), "lambda,bpp,msssim,msssim_db");
  const auto back = parse_rd_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_DOUBLE_EQ(back[1].msssim_db, 10.0);
  EXPECT_NEAR(back[0].bpp, 0.25, 1e-12);
  EXPECT_THROW(parse_rd_csv("bpp,msssim\n"), FormatError);
  EXPECT_THROW(parse_rd_csv(std::string(kRdCsvHeader) + "\n1,2\n"), FormatError);
}

}  // namespace
}  // namespace mdn
