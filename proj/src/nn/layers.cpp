// SPDX-License-Identifier: Apache-2.0
#include "avsr/nn/layers.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "avsr/core/error.hpp"

namespace avsr::nn {

namespace ad = avsr::ad;

Tensor init_normal(Shape shape, Rng& rng, double stddev) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor init_uniform(Shape shape, Rng& rng, double bound) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
  return t;
}

// ---- Conv ---------------------------------------------------------------

Conv::Conv(std::size_t in_ch, std::size_t out_ch, std::vector<std::size_t> kernel,
           std::vector<std::size_t> stride, std::vector<std::size_t> pad, bool bias, Rng& rng,
           PadMode mode)
    : kernel_(std::move(kernel)), win_{std::move(stride), std::move(pad)} {
  if (mode == PadMode::kReplicate) {
    if (kernel_.size() != 1) throw ShapeError("replicate padding is 1D only");
    edge_pad_ = win_.pad[0];
    win_.pad[0] = 0;
  }
  Shape wshape{out_ch, in_ch};
  std::size_t fan_in = in_ch;
  for (std::size_t k : kernel_) {
    wshape.push_back(k);
    fan_in *= k;
  }
  weight_ = register_parameter("weight", init_normal(wshape, rng, std::sqrt(2.0 / fan_in)));
  if (bias) bias_ = register_parameter("bias", Tensor::zeros({out_ch}));
}

Tensor Conv::forward(const Tensor& x) const {
  if (edge_pad_ > 0) return ad::conv(ad::replicate_pad(x, edge_pad_), weight_, bias_, win_);
  return ad::conv(x, weight_, bias_, win_);
}

// ---- BatchNorm ----------------------------------------------------------

BatchNorm::BatchNorm(std::size_t channels) {
  gamma_ = register_parameter("gamma", Tensor::full({channels}, 1.0));
  beta_ = register_parameter("beta", Tensor::zeros({channels}));
  state_.running_mean = register_buffer("running_mean", Tensor::zeros({channels}));
  state_.running_var = register_buffer("running_var", Tensor::full({channels}, 1.0));
}

Tensor BatchNorm::forward(const Tensor& x) {
  return ad::batchnorm(x, gamma_, beta_, state_, updates_statistics());
}

// ---- Linear -------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  weight_ = register_parameter("weight", init_normal({in, out}, rng, std::sqrt(1.0 / in)));
  bias_ = register_parameter("bias", Tensor::zeros({out}));
}

Tensor Linear::forward(const Tensor& x) const { return ad::affine(x, weight_, bias_); }

// ---- SpatiotemporalFrontend ---------------------------------------------

SpatiotemporalFrontend::SpatiotemporalFrontend(std::size_t out_ch, Rng& rng)
    : out_ch_(out_ch),
      conv_(1, out_ch, {5, 7, 7}, {1, 2, 2}, {2, 3, 3}, false, rng),
      bn_(out_ch) {
  register_module("conv", conv_);
  register_module("bn", bn_);
}

Tensor SpatiotemporalFrontend::forward(const Tensor& video) {
  if (video.rank() != 5 || video.dim(1) != 1) {
    throw ShapeError("frontend expects [B,1,T,H,W], got " + ad::shape_str(video.shape()));
  }
  if (video.dim(2) < 1 || video.dim(3) < 7 || video.dim(4) < 7) {
    throw ShapeError("frontend needs T >= 1 and H, W >= 7, got " + ad::shape_str(video.shape()));
  }
  return ad::relu(bn_.forward(conv_.forward(video)));
}

// ---- ResidualBlock ------------------------------------------------------

namespace {

std::vector<std::size_t> repeat(std::size_t dims, std::size_t v) {
  return std::vector<std::size_t>(dims, v);
}

PadMode mode_for(std::size_t dims) { return dims == 1 ? PadMode::kReplicate : PadMode::kZero; }

}  // namespace

ResidualBlock::ResidualBlock(std::size_t dims, std::size_t in_ch, std::size_t out_ch,
                             std::size_t stride, Rng& rng)
    : conv1_(in_ch, out_ch, repeat(dims, 3), repeat(dims, stride), repeat(dims, 1), false, rng,
             mode_for(dims)),
      bn1_(out_ch),
      conv2_(out_ch, out_ch, repeat(dims, 3), repeat(dims, 1), repeat(dims, 1), false, rng,
             mode_for(dims)),
      bn2_(out_ch) {
  register_module("conv1", conv1_);
  register_module("bn1", bn1_);
  register_module("conv2", conv2_);
  register_module("bn2", bn2_);
  if (stride != 1 || in_ch != out_ch) {
    proj_ = std::make_unique<Conv>(in_ch, out_ch, repeat(dims, 1), repeat(dims, stride),
                                   repeat(dims, 0), false, rng);
    proj_bn_ = std::make_unique<BatchNorm>(out_ch);
    register_module("proj", *proj_);
    register_module("proj_bn", *proj_bn_);
  }
}

Tensor ResidualBlock::forward(const Tensor& x) {
  Tensor branch = ad::relu(bn1_.forward(conv1_.forward(x)));
  branch = bn2_.forward(conv2_.forward(branch));
  Tensor shortcut = proj_ ? proj_bn_->forward(proj_->forward(x)) : x;
  return ad::relu(ad::add(branch, shortcut));
}

// ---- ResNetBackbone -----------------------------------------------------

std::vector<std::size_t> resnet_stage_blocks(int depth) {
  if (depth == 18) return {2, 2, 2, 2};
  if (depth == 34) return {3, 4, 6, 3};
  throw ShapeError("unsupported ResNet depth " + std::to_string(depth) + " (expected 18 or 34)");
}

ResNetBackbone::ResNetBackbone(std::size_t dims, int depth, std::size_t in_ch,
                               const std::vector<std::size_t>& widths, Rng& rng)
    : dims_(dims), depth_(depth), widths_(widths) {
  if (dims != 1 && dims != 2) throw ShapeError("ResNet backbone is 1D or 2D");
  const auto blocks = resnet_stage_blocks(depth);
  if (widths.size() != blocks.size()) throw ShapeError("ResNet needs one width per stage");
  std::size_t ch = in_ch;
  if (dims == 1) {
    stem_ = std::make_unique<Conv>(in_ch, widths[0], std::vector<std::size_t>{80},
                                   std::vector<std::size_t>{4}, std::vector<std::size_t>{38},
                                   false, rng, PadMode::kReplicate);
    stem_bn_ = std::make_unique<BatchNorm>(widths[0]);
    register_module("stem", *stem_);
    register_module("stem_bn", *stem_bn_);
    ch = widths[0];
  }
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    for (std::size_t b = 0; b < blocks[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      blocks_.push_back(std::make_unique<ResidualBlock>(dims, ch, widths[s], stride, rng));
      register_module("layer" + std::to_string(s + 1) + "." + std::to_string(b), *blocks_.back());
      ch = widths[s];
    }
  }
}

Tensor ResNetBackbone::run_stages(Tensor h) {
  const std::vector<std::size_t> k(dims_, 3);
  h = ad::max_pool(h, k, ad::Window{repeat(dims_, 2), repeat(dims_, 1)});
  for (auto& block : blocks_) h = block->forward(h);
  return h;
}

Tensor ResNetBackbone::forward_per_timestep(const Tensor& x) {
  if (dims_ != 2) throw ShapeError("per-timestep path needs a 2D backbone");
  if (x.rank() != 5) throw ShapeError("expected [B,C,T,H,W], got " + ad::shape_str(x.shape()));
  const std::size_t b = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  Tensor frames = ad::reshape(ad::permute(x, {0, 2, 1, 3, 4}), {b * t, c, h, w});
  Tensor feats = ad::global_avg_pool(run_stages(frames));
  return ad::reshape(feats, {b, t, out_features()});
}

Tensor ResNetBackbone::forward_audio(const Tensor& waveform, std::size_t timesteps) {
  if (dims_ != 1) throw ShapeError("audio path needs a 1D backbone");
  if (waveform.rank() != 3 || waveform.dim(1) != 1) {
    throw ShapeError("expected waveform [B,1,L], got " + ad::shape_str(waveform.shape()));
  }
  if (waveform.dim(2) < timesteps) {
    throw ShapeError("waveform length " + std::to_string(waveform.dim(2)) + " shorter than " +
                     std::to_string(timesteps) + " timesteps");
  }
  Tensor h = ad::relu(stem_bn_->forward(stem_->forward(waveform)));
  h = run_stages(h);
  return ad::permute(ad::segment_mean(h, timesteps), {0, 2, 1});
}

// ---- GRU ----------------------------------------------------------------

GruCell::GruCell(std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_ih_ = register_parameter("w_ih", init_uniform({in, 3 * hidden}, rng, bound));
  w_hh_ = register_parameter("w_hh", init_uniform({hidden, 3 * hidden}, rng, bound));
  bias_ = register_parameter("bias", init_uniform({3 * hidden}, rng, bound));
}

Tensor GruCell::run(const Tensor& x, bool reverse) const {
  return ad::gru_sequence(x, w_ih_, w_hh_, bias_, reverse);
}

BGRU::BGRU(std::size_t in, std::size_t hidden, std::size_t layers, Rng& rng) : hidden_(hidden) {
  if (layers == 0) throw ShapeError("BGRU needs at least one layer");
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t width = l == 0 ? in : 2 * hidden;
    fwd_.push_back(std::make_unique<GruCell>(width, hidden, rng));
    bwd_.push_back(std::make_unique<GruCell>(width, hidden, rng));
    register_module("l" + std::to_string(l) + ".fwd", *fwd_.back());
    register_module("l" + std::to_string(l) + ".bwd", *bwd_.back());
  }
}

Tensor BGRU::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l < fwd_.size(); ++l) {
    h = ad::concat({fwd_[l]->run(h, false), bwd_[l]->run(h, true)}, 2);
  }
  return h;
}

// ---- TemporalAttention --------------------------------------------------

TemporalAttention::TemporalAttention(std::size_t timesteps) {
  raw_ = register_parameter("raw", Tensor::zeros({timesteps}), ParamGroup::kAttention);
}

Tensor TemporalAttention::forward(const Tensor& x) const { return ad::temporal_gate(x, raw_); }

std::vector<double> TemporalAttention::gates() const {
  std::vector<double> g;
  for (double r : raw_.data()) g.push_back(1.0 / (1.0 + std::exp(-r)));
  return g;
}

// ---- TemporalConvBackend ------------------------------------------------

TemporalConvBackend::TemporalConvBackend(std::size_t in, std::size_t width, std::size_t classes,
                                         Rng& rng)
    : conv1_(in, width, {5}, {1}, {2}, false, rng),
      bn1_(width),
      conv2_(width, width, {5}, {1}, {2}, false, rng),
      bn2_(width),
      head_(width, classes, rng) {
  register_module("conv1", conv1_);
  register_module("bn1", bn1_);
  register_module("conv2", conv2_);
  register_module("bn2", bn2_);
  register_module("head", head_);
}

Tensor TemporalConvBackend::forward(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("backend expects [B,T,F], got " + ad::shape_str(x.shape()));
  if (x.dim(1) < conv1_.kernel()[0]) {
    throw ShapeError("backend needs at least " + std::to_string(conv1_.kernel()[0]) +
                     " timesteps, got " + std::to_string(x.dim(1)));
  }
  Tensor h = ad::permute(x, {0, 2, 1});
  h = ad::relu(bn1_.forward(conv1_.forward(h)));
  h = ad::relu(bn2_.forward(conv2_.forward(h)));
  return head_.forward(ad::mean_axis(h, 2));
}

// ---- Classifier ---------------------------------------------------------

Classifier::Classifier(std::size_t in, std::size_t classes, Rng& rng)
    : classes_(classes), linear_(in, classes, rng) {
  register_module("linear", linear_);
}

Tensor Classifier::logits(const Tensor& x) const {
  if (x.rank() != 3) throw ShapeError("classifier expects [B,T,F], got " + ad::shape_str(x.shape()));
  const std::size_t b = x.dim(0), t = x.dim(1);
  Tensor flat = linear_.forward(ad::reshape(x, {b * t, x.dim(2)}));
  return ad::reshape(flat, {b, t, classes_});
}

Tensor Classifier::forward(const Tensor& x) const { return ad::softmax(logits(x), 2); }

}  // namespace avsr::nn
