// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "avsr/ad/tensor.hpp"

/// Differentiable primitives. Every op validates shapes (ShapeError), records
/// itself on the current tape when an input requires a gradient, and rejects
/// non-finite results (EvaluationError). Broadcasting exists only for the
/// per-channel bias and the per-timestep gate; everything else requires
/// explicit reshapes.
namespace avsr::ad {

// ---- elementwise / structural ------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Weighted sum sum(a * w) with constant weights; a scalar probe objective.
Tensor dot_const(const Tensor& a, std::span<const double> weights);

Tensor reshape(const Tensor& a, Shape shape);
/// out.shape[i] = a.shape[perm[i]].
Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm);
/// Concatenates along `axis`; all other extents must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Mean over one axis, which is removed.
Tensor mean_axis(const Tensor& a, std::size_t axis);

// ---- activations --------------------------------------------------------

enum class Activation { kRelu, kSigmoid, kTanh };
Tensor activation(const Tensor& x, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::kRelu); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::kSigmoid); }
inline Tensor tanh(const Tensor& x) { return activation(x, Activation::kTanh); }

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Mean over the batch of -log softmax(logits)[label]. logits is [N,C].
/// Throws LabelError for labels outside [0, C).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// ---- dense --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// x[N,K] * w[K,C] + bias[C]. `bias` may be undefined.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);
/// x[B,C,...] + bias[C] broadcast over every non-channel position.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// ---- convolution / pooling ---------------------------------------------

/// Per-axis geometry for 1-3 spatial dimensions, innermost last.
struct Window {
  std::vector<std::size_t> stride;
  std::vector<std::size_t> pad;
};

/// Output extent floor((in + 2*pad - k)/stride) + 1; ShapeError when < 1.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

/// Cross-correlation over the trailing 1-3 axes. input [B,Cin,...],
/// weight [Cout,Cin,k...], bias [Cout] or undefined.
Tensor conv(const Tensor& input, const Tensor& weight, const Tensor& bias, const Window& win);

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::array<std::size_t, 3> stride, std::array<std::size_t, 3> pad);

/// Max pooling over the trailing spatial axes of [B,C,...]; padded cells
/// never win. Ties resolve to the first cell in scan order.
Tensor max_pool(const Tensor& input, const std::vector<std::size_t>& kernel, const Window& win);

/// [B,C,...] -> [B,C], mean over all spatial positions.
Tensor global_avg_pool(const Tensor& input);

/// Contiguous spans covering [0, length) for `parts` segments. Span t is
/// [floor(t*length/parts), floor((t+1)*length/parts)); lengths differ by <= 1.
std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t length,
                                                                 std::size_t parts);

/// [B,C,L] -> [B,C,parts], averaging each segment_bounds span.
Tensor segment_mean(const Tensor& input, std::size_t parts);

/// Extends the last axis by `pad` copies of its first and last element on
/// either side.
Tensor replicate_pad(const Tensor& input, std::size_t pad);

// ---- normalization ------------------------------------------------------

struct BatchNormState {
  Tensor running_mean;  // [C], updated in place in training mode
  Tensor running_var;   // [C]
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Per-channel normalization of [B,C,...]. Training mode uses batch
/// statistics and updates the running stats; eval mode uses the running
/// stats. Throws DegenerateBatchError on an empty training batch.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 bool training);

// ---- sequence ----------------------------------------------------------

/// out[b,t,f] = x[b,t,f] * sigmoid(raw[t]).
Tensor temporal_gate(const Tensor& x, const Tensor& raw);

/// Single-direction GRU over x[B,T,F] from a zero state. Gate columns are
/// ordered (update z, reset r, candidate n):
///   z = sig(x Wz + h Uz + bz),  r = sig(x Wr + h Ur + br)
///   n = tanh(x Wn + (r*h) Un + bn),  h' = (1-z)*n + z*h
/// w_ih [F,3H], w_hh [H,3H], bias [3H]. `reverse` runs right to left; the
/// output stays time-aligned with the input. Returns [B,T,H].
Tensor gru_sequence(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh, const Tensor& bias,
                    bool reverse);

}  // namespace avsr::ad
