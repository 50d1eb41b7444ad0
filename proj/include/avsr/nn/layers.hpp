// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "avsr/ad/ops.hpp"
#include "avsr/core/random.hpp"
#include "avsr/nn/module.hpp"

namespace avsr::nn {

Tensor init_normal(Shape shape, Rng& rng, double stddev);
Tensor init_uniform(Shape shape, Rng& rng, double bound);

/// Border handling: zeros, or edge replication (1D only).
enum class PadMode { kZero, kReplicate };

/// N-d convolution over the trailing 1-3 axes. He-normal init on fan-in.
class Conv : public Module {
 public:
  Conv(std::size_t in_ch, std::size_t out_ch, std::vector<std::size_t> kernel,
       std::vector<std::size_t> stride, std::vector<std::size_t> pad, bool bias, Rng& rng,
       PadMode mode = PadMode::kZero);
  Tensor forward(const Tensor& x) const;

  Tensor& weight() { return weight_; }
  const std::vector<std::size_t>& kernel() const { return kernel_; }

 private:
  std::vector<std::size_t> kernel_;
  ad::Window win_;
  std::size_t edge_pad_ = 0;
  Tensor weight_;
  Tensor bias_;
};

/// Per-channel batch normalization with running statistics.
class BatchNorm : public Module {
 public:
  explicit BatchNorm(std::size_t channels);
  Tensor forward(const Tensor& x);

  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  const ad::BatchNormState& stats() const { return state_; }

 private:
  Tensor gamma_;
  Tensor beta_;
  ad::BatchNormState state_;
};

/// x[N,K] -> [N,C] with weight [K,C].
class Linear : public Module {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// conv3d(1 -> C, kernel 5x7x7, stride (1,2,2), pad (2,3,3)) -> BN -> relu.
/// [B,1,T,H,W] -> [B,C,T,ceil(H/2),ceil(W/2)].
class SpatiotemporalFrontend : public Module {
 public:
  SpatiotemporalFrontend(std::size_t out_ch, Rng& rng);
  Tensor forward(const Tensor& video);
  std::size_t out_channels() const { return out_ch_; }

 private:
  std::size_t out_ch_;
  Conv conv_;
  BatchNorm bn_;
};

/// Two 3-tap convolutions with BN, plus a projection shortcut when the
/// stride or width changes. Works in 1 or 2 spatial dimensions.
class ResidualBlock : public Module {
 public:
  ResidualBlock(std::size_t dims, std::size_t in_ch, std::size_t out_ch, std::size_t stride,
                Rng& rng);
  Tensor forward(const Tensor& x);
  bool has_projection() const { return proj_ != nullptr; }

  Conv& conv1() { return conv1_; }
  Conv& conv2() { return conv2_; }

 private:
  Conv conv1_;
  BatchNorm bn1_;
  Conv conv2_;
  BatchNorm bn2_;
  std::unique_ptr<Conv> proj_;
  std::unique_ptr<BatchNorm> proj_bn_;
};

/// Blocks per stage for the supported depths; ShapeError otherwise.
std::vector<std::size_t> resnet_stage_blocks(int depth);

/// Residual stages of the given widths with strides 1,2,2,2.
/// 2D: [N,C,H,W] -> max_pool 3/2 -> stages -> global average -> [N,F].
/// 1D: [B,1,L] -> stem conv k80 s4 -> BN -> relu -> max_pool 3/2 -> stages
///     -> segment average to T -> [B,T,F].
class ResNetBackbone : public Module {
 public:
  ResNetBackbone(std::size_t dims, int depth, std::size_t in_ch,
                 const std::vector<std::size_t>& widths, Rng& rng);

  /// Video path: x [B,C,T,H,W] -> [B,T,F], the time axis folded into the
  /// batch so every frame shares weights.
  Tensor forward_per_timestep(const Tensor& x);
  /// Audio path: waveform [B,1,L] -> [B,T,F].
  Tensor forward_audio(const Tensor& waveform, std::size_t timesteps);

  std::size_t dims() const { return dims_; }
  int depth() const { return depth_; }
  std::size_t out_features() const { return widths_.back(); }
  std::size_t block_count() const { return blocks_.size(); }

 private:
  Tensor run_stages(Tensor h);

  std::size_t dims_;
  int depth_;
  std::vector<std::size_t> widths_;
  std::unique_ptr<Conv> stem_;
  std::unique_ptr<BatchNorm> stem_bn_;
  std::vector<std::unique_ptr<ResidualBlock>> blocks_;
};

/// One direction of a GRU layer.
class GruCell : public Module {
 public:
  GruCell(std::size_t in, std::size_t hidden, Rng& rng);
  Tensor run(const Tensor& x, bool reverse) const;

  Tensor& w_ih() { return w_ih_; }
  Tensor& w_hh() { return w_hh_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor w_ih_;
  Tensor w_hh_;
  Tensor bias_;
};

/// Stacked bidirectional GRU: [B,T,F] -> [B,T,2H].
class BGRU : public Module {
 public:
  BGRU(std::size_t in, std::size_t hidden, std::size_t layers, Rng& rng);
  Tensor forward(const Tensor& x) const;

  std::size_t hidden() const { return hidden_; }
  std::size_t out_features() const { return 2 * hidden_; }
  std::size_t layer_count() const { return fwd_.size(); }
  GruCell& forward_cell(std::size_t layer) { return *fwd_.at(layer); }
  GruCell& backward_cell(std::size_t layer) { return *bwd_.at(layer); }

 private:
  std::size_t hidden_;
  std::vector<std::unique_ptr<GruCell>> fwd_;
  std::vector<std::unique_ptr<GruCell>> bwd_;
};

/// Input-independent per-timestep gate sigmoid(raw[t]), raw initialized to 0.
class TemporalAttention : public Module {
 public:
  explicit TemporalAttention(std::size_t timesteps);
  Tensor forward(const Tensor& x) const;

  Tensor& raw() { return raw_; }
  const Tensor& raw() const { return raw_; }
  std::vector<double> gates() const;

 private:
  Tensor raw_;
};

/// Two temporal convolutions (k5, p2) with BN+relu, mean over time, affine.
/// [B,T,F] -> [B,C] logits.
class TemporalConvBackend : public Module {
 public:
  TemporalConvBackend(std::size_t in, std::size_t width, std::size_t classes, Rng& rng);
  Tensor forward(const Tensor& x);

  Conv& conv(std::size_t i) { return i == 0 ? conv1_ : conv2_; }
  Linear& head() { return head_; }

 private:
  Conv conv1_;
  BatchNorm bn1_;
  Conv conv2_;
  BatchNorm bn2_;
  Linear head_;
};

/// Shared affine map applied at every timestep.
class Classifier : public Module {
 public:
  Classifier(std::size_t in, std::size_t classes, Rng& rng);
  /// [B,T,F] -> [B,T,C] logits.
  Tensor logits(const Tensor& x) const;
  /// Softmax over classes of logits(x).
  Tensor forward(const Tensor& x) const;

  std::size_t classes() const { return classes_; }
  Linear& linear() { return linear_; }

 private:
  std::size_t classes_;
  Linear linear_;
};

}  // namespace avsr::nn
