#include <gtest/gtest.h>

#include <cstdio>

#include "mdn/core/optim.hpp"
#include "mdn/io/checkpoint.hpp"
#include "test_util.hpp"

namespace mdn {
namespace {

using test::grad_check;
using test::random_tensor;

GdnParams<double> fixed_gdn(int c, double beta, double gamma_diag, double gamma_off, bool inverse) {
  Tensor<double> b(Shape{1, c, 1, 1}, beta);
  Tensor<double> g(Shape{c, c, 1, 1}, gamma_off);
  for (int i = 0; i < c; ++i) g[i * c + i] = gamma_diag;
  return {Var<double>(b), Var<double>(g), inverse};
}

TEST(Gdn, IdentityWhenGammaZero) {
  Rng rng(1);
  auto x = random_tensor(Shape{2, 3, 4, 4}, rng);
  EXPECT_EQ(gdn(Var<double>(x), fixed_gdn(3, 1.0, 0.0, 0.0, false)).value(), x);
  EXPECT_EQ(gdn(Var<double>(x), fixed_gdn(3, 1.0, 0.0, 0.0, true)).value(), x);
}

TEST(Gdn, ScalarClosedForm) {
  // Independent scalar evaluation of x / sqrt(beta + gamma x^2).
  const double beta = 1e-12, x = 2.0;
  const double expected = x / std::sqrt(beta + 1.0 * x * x);
  auto y = gdn(Var<double>(Tensor<double>::scalar(x)), fixed_gdn(1, beta, 1.0, 0.0, false)).value();
  EXPECT_NEAR(y[0], expected, 1e-15);
  EXPECT_NEAR(y[0], 1.0, 1e-12);
}

TEST(Gdn, MixesChannels) {
  Tensor<double> x(Shape{1, 2, 1, 1}, std::vector<double>{1.0, 3.0});
  auto y = gdn(Var<double>(x), fixed_gdn(2, 0.5, 0.2, 0.1, false)).value();
  EXPECT_NEAR(y[0], 1.0 / std::sqrt(0.5 + 0.2 * 1 + 0.1 * 9), 1e-15);
  EXPECT_NEAR(y[1], 3.0 / std::sqrt(0.5 + 0.1 * 1 + 0.2 * 9), 1e-15);
}

TEST(Gdn, RejectsBadParameters) {
  Var<double> x(Tensor<double>(Shape{1, 2, 2, 2}));
  EXPECT_THROW(gdn(x, fixed_gdn(2, 0.0, 0.1, 0.0, false)), ValueError);
  EXPECT_THROW(gdn(x, fixed_gdn(3, 1.0, 0.1, 0.0, false)), ShapeError);
}

TEST(Gdn, GradientCheck) {
  Rng rng(2);
  auto x = random_tensor(Shape{2, 4, 8, 8}, rng);
  auto beta = random_tensor(Shape{1, 4, 1, 1}, rng, 0.5, 1.5);
  auto gamma = random_tensor(Shape{4, 4, 1, 1}, rng, 0.01, 0.5);
  for (bool inverse : {false, true}) {
    auto r = grad_check({x, beta, gamma},
                        [inverse](const auto& in) { return gdn(in[0], GdnParams<double>{in[1], in[2], inverse}); },
                        rng);
    EXPECT_LT(r.max_rel_error, 1e-5) << (inverse ? "igdn" : "gdn");
  }
}

TEST(GdnLayer, ReparameterizationKeepsBounds) {
  GdnLayer<double> layer(3, false);
  auto p = layer.effective();
  for (double b : p.beta.value().vec()) EXPECT_NEAR(b, 1.0, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.gamma.value()[i * 3 + i], 0.1, 1e-12);
  ParamList<double> params;
  layer.collect(params, "g");
  for (auto& v : params[0].var.mutable_value().vec()) v = -1e4;
  for (auto& v : params[1].var.mutable_value().vec()) v = -1e4;
  auto q = layer.effective();
  for (double b : q.beta.value().vec()) EXPECT_GE(b, 1e-6);
  for (double g : q.gamma.value().vec()) EXPECT_GE(g, 0.0);
}

TEST(Adam, FrozenParameterUnchanged) {
  Var<double> a(Tensor<double>(Shape{1, 1, 1, 2}, 1.0), true, "a");
  Var<double> b(Tensor<double>(Shape{1, 1, 1, 2}, 1.0), true, "b");
  ParamList<double> params{{"a", a}, {"b", b}};
  Adam<double> opt(params, AdamConfig{1e-2});
  set_trainable(ParamList<double>{{"b", b}}, false);
  const auto before = b.value();
  for (int i = 0; i < 5; ++i) {
    opt.zero_grad();
    backward(sum(square(add(a, b))));
    opt.step();
  }
  EXPECT_EQ(b.value(), before);
  EXPECT_LT(a.value()[0], 1.0);
  EXPECT_EQ(opt.step_count(), 5);
}

TEST(Adam, MinimizesQuadratic) {
  Var<double> w(Tensor<double>(Shape{1, 1, 1, 3}, std::vector<double>{3.0, -2.0, 0.5}), true);
  Adam<double> opt({{"w", w}}, AdamConfig{0.05});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    backward(sum(square(w)));
    opt.step();
  }
  for (double v : w.value().vec()) EXPECT_NEAR(v, 0.0, 1e-2);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Var<double> w(Tensor<double>::scalar(0.0), true);
  Adam<double> opt({{"codec.g_a.0.weight", w}}, AdamConfig{});
  backward(sqrt(w));  // d/dw sqrt(w) at 0 is inf
  try {
    opt.step();
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("codec.g_a.0.weight"), std::string::npos);
  }
}

TEST(LrSchedule, DropsAtHalfAndThreeQuarters) {
  LrSchedule s{1e-4};
  EXPECT_DOUBLE_EQ(s.at_epoch(0, 20), 1e-4);
  EXPECT_DOUBLE_EQ(s.at_epoch(9, 20), 1e-4);
  EXPECT_DOUBLE_EQ(s.at_epoch(10, 20), 2e-5);
  EXPECT_DOUBLE_EQ(s.at_epoch(14, 20), 2e-5);
  EXPECT_DOUBLE_EQ(s.at_epoch(15, 20), 4e-6);
}

TEST(Checkpoint, BitExactRoundTrip) {
  Rng rng(3);
  ConvStack<float> stack(3, {down_spec(4), down_spec(5)}, Activation::Gdn, rng);
  ParamList<float> params;
  stack.collect(params, "g_a");
  const auto bytes = serialize_checkpoint(to_records(params));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MDNW");

  Rng other(99);
  ConvStack<float> copy(3, {down_spec(4), down_spec(5)}, Activation::Gdn, other);
  ParamList<float> loaded;
  copy.collect(loaded, "g_a");
  load_records(loaded, parse_checkpoint(bytes));
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(params[i].var.value(), loaded[i].var.value());
  EXPECT_EQ(serialize_checkpoint(to_records(loaded)), bytes);
  EXPECT_EQ(model_hash(params, "x"), model_hash(loaded, "x"));
  EXPECT_NE(model_hash(params, "x"), model_hash(params, "y"));
}

TEST(Checkpoint, RecordLayout) {
  Tensor<float> t(Shape{1, 1, 1, 1}, 1.0f);
  auto bytes = serialize_checkpoint({make_record("w", t)});
  const std::vector<std::uint8_t> expected{'M', 'D', 'N', 'W', 1,  0, 0, 0, 1, 'w', 0, 4, 0, 0, 0, 1, 0, 0, 0,
                                           1,   0,   0,   0,   1,  0, 0, 0, 1, 0,   0, 0x80, 0x3f};
  EXPECT_EQ(bytes, expected);
}

TEST(Checkpoint, TruncatedAndMismatchedFail) {
  Rng rng(4);
  ConvLayer<double> l(2, same_spec(3, 3), rng);
  ParamList<double> p;
  l.collect(p, "c");
  auto bytes = serialize_checkpoint(to_records(p));
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(parse_checkpoint(cut), FormatError);
  ConvLayer<double> other(2, same_spec(4, 3), rng);
  ParamList<double> q;
  other.collect(q, "c");
  EXPECT_THROW(load_records(q, parse_checkpoint(bytes)), ShapeError);
}

TEST(Checkpoint, FileRoundTripConvertsPrecision) {
  Rng rng(5);
  ConvLayer<float> l(2, same_spec(3, 3), rng);
  ParamList<float> p;
  l.collect(p, "c");
  const std::string path = ::testing::TempDir() + "ckpt_test.mdnw";
  save_checkpoint(path, p);
  ConvLayer<double> d(2, same_spec(3, 3), rng);
  ParamList<double> q;
  d.collect(q, "c");
  load_checkpoint(path, q);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(q[i].var.value().cast<float>(), p[i].var.value());
  }
  std::remove(path.c_str());
}

}  // namespace
}  // namespace mdn
