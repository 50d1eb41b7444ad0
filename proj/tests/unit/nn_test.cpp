// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "../support/oracles.hpp"
#include "avsr/ad/tape.hpp"
#include "avsr/core/error.hpp"
#include "avsr/nn/gradcheck_layers.hpp"
#include "avsr/nn/layers.hpp"

namespace avsr::nn {
namespace {

using avsr::testing::max_abs_diff;
using avsr::testing::to_vec;

Tensor randn(Shape shape, std::uint64_t seed, double sd = 1.0) {
  return Tensor::normal(std::move(shape), seed, sd);
}

// Rows [b] of a batched tensor as a standalone batch of one.
Tensor slice_batch(const Tensor& x, std::size_t b) {
  Shape s = x.shape();
  const std::size_t per = x.size() / s[0];
  s[0] = 1;
  std::vector<double> v(x.data().begin() + b * per, x.data().begin() + (b + 1) * per);
  return Tensor::from(s, v);
}

std::vector<double> row(const Tensor& x, std::size_t b) {
  const std::size_t per = x.size() / x.dim(0);
  return std::vector<double>(x.data().begin() + b * per, x.data().begin() + (b + 1) * per);
}

void copy_into(Tensor& dst, const Tensor& src) {
  ASSERT_EQ(dst.shape(), src.shape());
  std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}

// ---- frontend -----------------------------------------------------------

TEST(Frontend, PaperScaleShape) {
  ad::NoGradGuard guard;
  Rng rng(1);
  SpatiotemporalFrontend fe(64, rng);
  Tensor y = fe.forward(Tensor::full({1, 1, 29, 96, 96}, 0.5));
  EXPECT_EQ(y.shape(), (Shape{1, 64, 29, 48, 48}));
}

TEST(Frontend, TinyProfileShape) {
  Rng rng(2);
  SpatiotemporalFrontend fe(8, rng);
  Tensor y = fe.forward(randn({2, 1, 7, 24, 24}, 3));
  EXPECT_EQ(y.shape(), (Shape{2, 8, 7, 12, 12}));
}

TEST(Frontend, RejectsTooSmallFrames) {
  Rng rng(2);
  SpatiotemporalFrontend fe(2, rng);
  EXPECT_THROW(fe.forward(randn({1, 1, 3, 6, 9}, 3)), ShapeError);
  EXPECT_THROW(fe.forward(randn({1, 1, 0, 9, 9}, 3)), ShapeError);
  EXPECT_THROW(fe.forward(randn({1, 2, 3, 9, 9}, 3)), ShapeError);
}

TEST(Frontend, NamesFollowTheModuleTree) {
  Rng rng(2);
  SpatiotemporalFrontend fe(4, rng);
  std::vector<std::string> names;
  for (const auto& e : fe.state()) names.push_back(e.name);
  EXPECT_EQ(names, (std::vector<std::string>{"conv.weight", "bn.gamma", "bn.beta",
                                             "bn.running_mean", "bn.running_var"}));
  EXPECT_EQ(fe.parameters().size(), 3u);
}

// ---- ResNet -------------------------------------------------------------

std::vector<std::size_t> tiny_widths() { return {8, 16, 32, 64}; }

TEST(ResNet, PerTimestepPreservesT) {
  for (std::size_t t : {1u, 3u, 5u}) {
    Rng rng(4);
    ResNetBackbone net(2, 18, 8, tiny_widths(), rng);
    Tensor y = net.forward_per_timestep(randn({2, 8, t, 12, 12}, 5));
    EXPECT_EQ(y.shape(), (Shape{2, t, 64}));
  }
}

TEST(ResNet, ConstantInputGivesIdenticalTimesteps) {
  Rng rng(6);
  ResNetBackbone net(2, 18, 3, tiny_widths(), rng);
  // Constant along time, varying in space and across the batch.
  const std::size_t B = 2, C = 3, T = 4, H = 10, W = 10;
  Tensor frame = randn({B, C, 1, H, W}, 7);
  std::vector<double> v(B * C * T * H * W);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t p = 0; p < H * W; ++p)
          v[(((b * C + c) * T + t) * H * W) + p] = frame[(b * C + c) * H * W + p];
  Tensor y = net.forward_per_timestep(Tensor::from({B, C, T, H, W}, v));
  const std::size_t F = y.dim(2);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 1; t < T; ++t) {
      for (std::size_t f = 0; f < F; ++f) EXPECT_EQ(y[(b * T + t) * F + f], y[(b * T) * F + f]);
    }
}

TEST(ResNet, Depth18And34ShareOutputShape) {
  Rng r18(8), r34(8);
  ResNetBackbone a(2, 18, 8, tiny_widths(), r18);
  ResNetBackbone b(2, 34, 8, tiny_widths(), r34);
  EXPECT_EQ(a.block_count(), 8u);
  EXPECT_EQ(b.block_count(), 16u);
  EXPECT_GT(b.parameter_count(), a.parameter_count());
  Tensor x = randn({1, 8, 2, 12, 12}, 9);
  EXPECT_EQ(a.forward_per_timestep(x).shape(), b.forward_per_timestep(x).shape());
  EXPECT_THROW(ResNetBackbone(2, 50, 8, tiny_widths(), r18), ShapeError);
}

TEST(ResNet, AudioPaperLengthGives29Steps) {
  ad::NoGradGuard guard;
  Rng rng(10);
  ResNetBackbone net(1, 18, 1, tiny_widths(), rng);
  Tensor y = net.forward_audio(randn({1, 1, 18560}, 11, 0.3), 29);
  EXPECT_EQ(y.shape(), (Shape{1, 29, 64}));
}

TEST(ResNet, AudioTinyProfile) {
  Rng rng(12);
  ResNetBackbone net(1, 18, 1, tiny_widths(), rng);
  Tensor y = net.forward_audio(randn({2, 1, 1024}, 13, 0.3), 7);
  EXPECT_EQ(y.shape(), (Shape{2, 7, 64}));
  // The backbone ends at 16 positions; seven near-equal spans cover them.
  const auto spans = ad::segment_bounds(16, 7);
  EXPECT_EQ(spans.front().first, 0u);
  EXPECT_EQ(spans.back().second, 16u);
  std::size_t lo = 16, hi = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (i > 0) {
      EXPECT_EQ(spans[i].first, spans[i - 1].second);
    }
    lo = std::min(lo, spans[i].second - spans[i].first);
    hi = std::max(hi, spans[i].second - spans[i].first);
  }
  EXPECT_LE(hi - lo, 1u);
}

TEST(ResNet, AudioConstantWaveformGivesIdenticalSteps) {
  for (bool training : {true, false}) {
    Rng rng(14);
    ResNetBackbone net(1, 18, 1, tiny_widths(), rng);
    net.set_training(training);
    std::vector<double> v(2 * 1024);
    std::fill(v.begin(), v.begin() + 1024, 0.3);
    std::fill(v.begin() + 1024, v.end(), -0.6);
    Tensor y = net.forward_audio(Tensor::from({2, 1, 1024}, v), 7);
    const std::size_t T = 7, F = 64;
    double worst = 0.0, scale = 0.0;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 1; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f) {
          worst = std::max(worst, std::abs(y[(b * T + t) * F + f] - y[(b * T) * F + f]));
          scale = std::max(scale, std::abs(y[(b * T) * F + f]));
        }
    EXPECT_GT(scale, 0.0);
    EXPECT_LE(worst, 1e-12 * std::max(1.0, scale));
  }
}

TEST(ResNet, AudioShorterThanTIsShapeError) {
  Rng rng(15);
  ResNetBackbone net(1, 18, 1, {2, 2, 2, 2}, rng);
  EXPECT_THROW(net.forward_audio(randn({1, 1, 5}, 16), 7), ShapeError);
}

TEST(ResNet, ResidualIdentityWithZeroedBranch) {
  Rng rng(17);
  for (std::size_t dims : {1u, 2u}) {
    ResidualBlock block(dims, 3, 3, 1, rng);
    ASSERT_FALSE(block.has_projection());
    for (double& w : block.conv1().weight().mutable_data()) w = 0.0;
    for (double& w : block.conv2().weight().mutable_data()) w = 0.0;
    Tensor x = dims == 1 ? randn({2, 3, 6}, 18) : randn({2, 3, 4, 5}, 18);
    Tensor y = block.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], std::max(0.0, x[i]));
  }
}

TEST(ResNet, ProjectionShortcutWhenShapeChanges) {
  Rng rng(19);
  ResidualBlock down(2, 4, 8, 2, rng);
  EXPECT_TRUE(down.has_projection());
  EXPECT_EQ(down.forward(randn({1, 4, 6, 6}, 20)).shape(), (Shape{1, 8, 3, 3}));
}

// ---- BGRU ---------------------------------------------------------------

// [B,T,F] slice for example b, timestep t.
std::vector<double> step_vec(const Tensor& x, std::size_t b, std::size_t t) {
  const std::size_t T = x.dim(1), F = x.dim(2);
  return std::vector<double>(x.data().begin() + (b * T + t) * F,
                             x.data().begin() + (b * T + t + 1) * F);
}

std::vector<double> vec(const Tensor& t) { return to_vec(t.data()); }

TEST(BGRU, SingleStepSeesSameInputBothWays) {
  Rng rng(21);
  BGRU gru(3, 4, 1, rng);
  copy_into(gru.backward_cell(0).w_ih(), gru.forward_cell(0).w_ih());
  copy_into(gru.backward_cell(0).w_hh(), gru.forward_cell(0).w_hh());
  copy_into(gru.backward_cell(0).bias(), gru.forward_cell(0).bias());
  Tensor y = gru.forward(randn({2, 1, 3}, 22));
  ASSERT_EQ(y.shape(), (Shape{2, 1, 8}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y[b * 8 + j], y[b * 8 + 4 + j]);
}

TEST(BGRU, MatchesHandUnrolledRecurrence) {
  using avsr::testing::gru_step;
  Rng rng(23);
  const std::size_t B = 2, T = 3, F = 3, H = 4;
  BGRU gru(F, H, 2, rng);
  Tensor x = randn({B, T, F}, 24);
  Tensor y = gru.forward(x);
  ASSERT_EQ(y.shape(), (Shape{B, T, 2 * H}));

  auto cell = [&](GruCell& c, const std::vector<double>& in, const std::vector<double>& h) {
    return gru_step(in, h, vec(c.w_ih()), vec(c.w_hh()), vec(c.bias()));
  };
  auto cat = [](std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const std::vector<double> h0(H, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    const auto x0 = step_vec(x, b, 0), x1 = step_vec(x, b, 1), x2 = step_vec(x, b, 2);
    // Layer 0, left to right then right to left.
    const auto f0 = cell(gru.forward_cell(0), x0, h0);
    const auto f1 = cell(gru.forward_cell(0), x1, f0);
    const auto f2 = cell(gru.forward_cell(0), x2, f1);
    const auto r2 = cell(gru.backward_cell(0), x2, h0);
    const auto r1 = cell(gru.backward_cell(0), x1, r2);
    const auto r0 = cell(gru.backward_cell(0), x0, r1);
    const auto y0 = cat(f0, r0), y1 = cat(f1, r1), y2 = cat(f2, r2);
    // Layer 1 over the concatenated layer-0 outputs.
    const auto g0 = cell(gru.forward_cell(1), y0, h0);
    const auto g1 = cell(gru.forward_cell(1), y1, g0);
    const auto g2 = cell(gru.forward_cell(1), y2, g1);
    const auto s2 = cell(gru.backward_cell(1), y2, h0);
    const auto s1 = cell(gru.backward_cell(1), y1, s2);
    const auto s0 = cell(gru.backward_cell(1), y0, s1);
    EXPECT_LE(max_abs_diff(step_vec(y, b, 0), cat(g0, s0)), 1e-10);
    EXPECT_LE(max_abs_diff(step_vec(y, b, 1), cat(g1, s1)), 1e-10);
    EXPECT_LE(max_abs_diff(step_vec(y, b, 2), cat(g2, s2)), 1e-10);
  }
}

TEST(BGRU, ReversedInputSwapsHalves) {
  Rng rng(25);
  const std::size_t T = 5, F = 3, H = 4;
  BGRU gru(F, H, 1, rng);
  copy_into(gru.backward_cell(0).w_ih(), gru.forward_cell(0).w_ih());
  copy_into(gru.backward_cell(0).w_hh(), gru.forward_cell(0).w_hh());
  copy_into(gru.backward_cell(0).bias(), gru.forward_cell(0).bias());
  Tensor x = randn({1, T, F}, 26);
  std::vector<double> rv(x.size());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < F; ++f) rv[t * F + f] = x[(T - 1 - t) * F + f];
  Tensor y = gru.forward(x);
  Tensor yr = gru.forward(Tensor::from({1, T, F}, rv));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < H; ++j) {
      EXPECT_NEAR(yr[t * 2 * H + j], y[(T - 1 - t) * 2 * H + H + j], 1e-12);
      EXPECT_NEAR(yr[t * 2 * H + H + j], y[(T - 1 - t) * 2 * H + j], 1e-12);
    }
}

TEST(BGRU, EveryOutputDependsOnEveryInputStep) {
  Rng rng(27);
  const std::size_t T = 3, F = 2, H = 3;
  BGRU gru(F, H, 2, rng);
  Tensor x = randn({1, T, F}, 28);
  Tensor base = gru.forward(x);
  for (std::size_t s = 0; s < T; ++s) {
    std::vector<double> v = vec(x);
    v[s * F] += 0.1;
    Tensor y = gru.forward(Tensor::from({1, T, F}, v));
    for (std::size_t t = 0; t < T; ++t) {
      const auto a = step_vec(base, 0, t), b = step_vec(y, 0, t);
      EXPECT_GT(max_abs_diff(a, b), 1e-8) << "input step " << s << " output step " << t;
    }
  }
}

// ---- attention ----------------------------------------------------------

TEST(Attention, ZeroRawHalvesInput) {
  TemporalAttention attn(4);
  Tensor x = randn({2, 4, 3}, 29);
  Tensor y = attn.forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i] / 2.0);
  EXPECT_EQ(attn.parameters().front().group, ParamGroup::kAttention);
}

TEST(Attention, SaturatedNegativeGateSilencesStep) {
  TemporalAttention attn(4);
  attn.raw().mutable_data()[2] = -1e6;
  Tensor x = randn({2, 4, 3}, 30);
  Tensor y = attn.forward(x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t f = 0; f < 3; ++f) EXPECT_NEAR(y[(b * 4 + 2) * 3 + f], 0.0, 1e-300);
}

TEST(Attention, SaturatedPositiveGateIsIdentity) {
  TemporalAttention attn(5);
  for (double& r : attn.raw().mutable_data()) r = 20.0;
  Tensor x = randn({3, 5, 4}, 31);
  EXPECT_LE(max_abs_diff(vec(attn.forward(x)), vec(x)), 1e-8);
}

TEST(Attention, LengthMismatchIsShapeError) {
  TemporalAttention attn(4);
  EXPECT_THROW(attn.forward(randn({1, 5, 2}, 32)), ShapeError);
}

TEST(Attention, RawGradientMatchesFiniteDifferences) {
  TemporalAttention attn(4);
  Rng r(33);
  for (double& v : attn.raw().mutable_data()) v = r.normal();
  Tensor x = randn({2, 4, 3}, 34);
  auto report = ad::grad_check([&] { return ad::sum(attn.forward(x)); },
                               named_parameters(attn), {});
  EXPECT_TRUE(report.pass) << report.max_rel_error;
}

// ---- backend ------------------------------------------------------------

TEST(Backend, OutputShapeForValidT) {
  for (std::size_t t : {5u, 7u, 11u}) {
    Rng rng(35);
    TemporalConvBackend be(6, 8, 10, rng);
    EXPECT_EQ(be.forward(randn({3, t, 6}, 36)).shape(), (Shape{3, 10}));
  }
}

TEST(Backend, TooFewStepsIsShapeError) {
  Rng rng(37);
  TemporalConvBackend be(6, 8, 10, rng);
  EXPECT_THROW(be.forward(randn({2, 4, 6}, 38)), ShapeError);
}

TEST(Backend, ChannelPermutationWithPermutedWeights) {
  const std::size_t B = 2, T = 7, F = 5, W = 6, C = 4;
  Rng ra(39), rb(40);
  TemporalConvBackend a(F, W, C, ra);
  TemporalConvBackend b(F, W, C, rb);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  // b copies a, with conv1's input channels permuted.
  auto sa = a.state(), sb = b.state();
  for (std::size_t i = 0; i < sa.size(); ++i) copy_into(sb[i].tensor, sa[i].tensor);
  const Tensor& w = a.conv(0).weight();
  std::vector<double> pw(w.size());
  for (std::size_t o = 0; o < W; ++o)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t k = 0; k < 5; ++k) pw[(o * F + f) * 5 + k] = w[(o * F + perm[f]) * 5 + k];
  copy_into(b.conv(0).weight(), Tensor::from(w.shape(), pw));

  Tensor x = randn({B, T, F}, 41);
  std::vector<double> px(x.size());
  for (std::size_t i = 0; i < B * T; ++i)
    for (std::size_t f = 0; f < F; ++f) px[i * F + f] = x[i * F + perm[f]];
  Tensor la = a.forward(x);
  Tensor lb = b.forward(Tensor::from(x.shape(), px));
  EXPECT_LE(max_abs_diff(vec(la), vec(lb)), 1e-12);
}

// ---- classifier ---------------------------------------------------------

TEST(Classifier, ZeroWeightsGiveUniformRows) {
  Rng rng(42);
  Classifier clf(3, 5, rng);
  for (double& v : clf.linear().weight().mutable_data()) v = 0.0;
  Tensor p = clf.forward(randn({2, 4, 3}, 43));
  ASSERT_EQ(p.shape(), (Shape{2, 4, 5}));
  for (double v : p.data()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Classifier, IdenticalFeaturesGiveIdenticalRows) {
  Rng rng(44);
  Classifier clf(3, 4, rng);
  Tensor x = Tensor::from({1, 2, 3}, {0.3, -1.2, 0.7, 0.3, -1.2, 0.7});
  Tensor p = clf.forward(x);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(p[c], p[4 + c]);
}

TEST(Classifier, MatchesManualAffineSoftmax) {
  Rng rng(45);
  Classifier clf(3, 2, rng);
  copy_into(clf.linear().weight(), Tensor::from({3, 2}, {1.0, -1.0, 0.5, 2.0, -0.5, 0.0}));
  copy_into(clf.linear().bias(), Tensor::from({2}, {0.1, -0.2}));
  Tensor x = Tensor::from({1, 2, 3}, {1.0, 2.0, 3.0, -1.0, 0.0, 0.5});
  Tensor p = clf.forward(x);
  // Step 0: z = [1+1-1.5+0.1, -1+4+0-0.2] = [0.6, 2.8]
  // Step 1: z = [-1+0-0.25+0.1, 1+0+0-0.2] = [-1.15, 0.8]
  auto two = [](double a, double b) {
    const double m = std::max(a, b), ea = std::exp(a - m), eb = std::exp(b - m);
    return std::vector<double>{ea / (ea + eb), eb / (ea + eb)};
  };
  auto r0 = two(0.6, 2.8), r1 = two(-1.15, 0.8);
  EXPECT_NEAR(p[0], r0[0], 1e-14);
  EXPECT_NEAR(p[1], r0[1], 1e-14);
  EXPECT_NEAR(p[2], r1[0], 1e-14);
  EXPECT_NEAR(p[3], r1[1], 1e-14);
  for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(p[2 * t] + p[2 * t + 1], 1.0, 1e-15);
}

// ---- cross-cutting ------------------------------------------------------

TEST(Layers, BatchIndependenceInEvalMode) {
  const std::size_t B = 3;
  Rng rng(46);
  SpatiotemporalFrontend fe(4, rng);
  ResNetBackbone r2(2, 18, 4, {4, 4, 8, 8}, rng);
  ResNetBackbone r1(1, 18, 1, {4, 4, 8, 8}, rng);
  BGRU gru(8, 5, 2, rng);
  TemporalAttention attn(7);
  TemporalConvBackend be(8, 6, 4, rng);
  Classifier clf(10, 4, rng);
  for (Module* m : std::initializer_list<Module*>{&fe, &r2, &r1, &gru, &attn, &be, &clf}) {
    m->set_training(false);
  }
  attn.raw().mutable_data()[3] = 1.3;

  auto check = [&](const char* what, const Tensor& x, auto fn) {
    Tensor all = fn(x);
    for (std::size_t b = 0; b < B; ++b) {
      Tensor one = fn(slice_batch(x, b));
      EXPECT_LE(max_abs_diff(vec(one), row(all, b)), 1e-10) << what << " example " << b;
    }
  };
  check("frontend", randn({B, 1, 3, 9, 9}, 47), [&](const Tensor& x) { return fe.forward(x); });
  check("resnet2d", randn({B, 4, 2, 8, 8}, 48),
        [&](const Tensor& x) { return r2.forward_per_timestep(x); });
  check("resnet1d", randn({B, 1, 400}, 49), [&](const Tensor& x) { return r1.forward_audio(x, 7); });
  check("bgru", randn({B, 7, 8}, 50), [&](const Tensor& x) { return gru.forward(x); });
  check("attention", randn({B, 7, 8}, 51), [&](const Tensor& x) { return attn.forward(x); });
  check("backend", randn({B, 7, 8}, 52), [&](const Tensor& x) { return be.forward(x); });
  check("classifier", randn({B, 7, 10}, 53), [&](const Tensor& x) { return clf.forward(x); });
}

TEST(Layers, FrozenModuleKeepsStatsAndLeavesGraph) {
  Rng rng(54);
  TemporalConvBackend be(4, 4, 3, rng);
  be.set_frozen(true);
  for (const auto& e : be.parameters()) EXPECT_FALSE(e.tensor.requires_grad()) << e.name;
  std::vector<std::vector<double>> before;
  for (const auto& e : be.state()) before.push_back(vec(e.tensor));
  Tensor x = randn({2, 6, 4}, 55);
  x.set_requires_grad(true);
  ad::backward(ad::sum(be.forward(x)));
  auto after = be.state();
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_EQ(vec(after[i].tensor), before[i]) << after[i].name;
    EXPECT_FALSE(after[i].tensor.has_grad()) << after[i].name;
  }
  EXPECT_TRUE(x.has_grad());
  be.set_frozen(false);
  for (const auto& e : be.parameters()) EXPECT_TRUE(e.tensor.requires_grad()) << e.name;
}

TEST(Layers, ParameterNamesAreUnique) {
  Rng rng(56);
  ResNetBackbone net(1, 34, 1, {2, 2, 2, 2}, rng);
  std::set<std::string> names;
  for (const auto& e : net.state()) EXPECT_TRUE(names.insert(e.name).second) << e.name;
  EXPECT_TRUE(names.count("stem.weight"));
  EXPECT_TRUE(names.count("layer4.2.conv2.weight"));
  EXPECT_TRUE(names.count("layer2.0.proj.weight"));
}

class LayerGradCheck : public ::testing::TestWithParam<std::size_t> {};

TEST_P(LayerGradCheck, Passes) {
  static const auto cases = layer_gradcheck_cases();
  const auto& c = cases.at(GetParam());
  ad::GradCheckOptions opt;
  const auto report = c.run(opt);
  EXPECT_TRUE(report.pass) << c.name << " max rel error " << report.max_rel_error;
  for (const auto& p : report.params) EXPECT_GE(p.probes, 1u) << p.name;
}

INSTANTIATE_TEST_SUITE_P(AllLayers, LayerGradCheck,
                         ::testing::Range<std::size_t>(0, layer_gradcheck_cases().size()),
                         [](const auto& info) { return layer_gradcheck_cases()[info.param].name; });

}  // namespace
}  // namespace avsr::nn
