// SPDX-License-Identifier: Apache-2.0
// Convolution via patch matrices (im2col) and the dispatched GEMM; pooling.

#include <algorithm>
#include <cmath>
#include <limits>

#include "avsr/ad/ops.hpp"
#include "avsr/core/parallel.hpp"
#include "avsr/kernels/kernels.hpp"
#include "op_util.hpp"

namespace avsr::ad {

using detail::grad_of;
using detail::make_result;
using detail::record;
using detail::require;

namespace {

// Geometry normalized to three spatial axes (leading axes of extent 1).
struct Geometry {
  std::size_t batch = 0, cin = 0, cout = 0;
  std::array<std::size_t, 3> in{1, 1, 1}, k{1, 1, 1}, out{1, 1, 1}, stride{1, 1, 1}, pad{0, 0, 0};
  std::size_t spatial_rank = 0;

  std::size_t in_size() const { return in[0] * in[1] * in[2]; }
  std::size_t out_size() const { return out[0] * out[1] * out[2]; }
  std::size_t k_size() const { return k[0] * k[1] * k[2]; }
  std::size_t patch() const { return cin * k_size(); }
  std::size_t rows() const { return batch * out_size(); }
};

Geometry make_geometry(const Shape& input, const std::vector<std::size_t>& kernel, const Window& win,
                       const char* op) {
  require(input.size() >= 3 && input.size() <= 5,
          std::string(op) + ": expected [B,C,...] with 1-3 spatial axes, got " + shape_str(input));
  Geometry g;
  g.spatial_rank = input.size() - 2;
  g.batch = input[0];
  g.cin = input[1];
  require(kernel.size() == g.spatial_rank, std::string(op) + ": kernel rank mismatch");
  require(win.stride.size() == g.spatial_rank && win.pad.size() == g.spatial_rank,
          std::string(op) + ": stride/pad rank mismatch");
  const std::size_t shift = 3 - g.spatial_rank;
  for (std::size_t i = 0; i < g.spatial_rank; ++i) {
    g.in[shift + i] = input[2 + i];
    g.k[shift + i] = kernel[i];
    require(win.stride[i] >= 1, std::string(op) + ": stride must be >= 1");
    g.stride[shift + i] = win.stride[i];
    g.pad[shift + i] = win.pad[i];
    g.out[shift + i] = conv_out_extent(input[2 + i], kernel[i], win.stride[i], win.pad[i]);
  }
  return g;
}

Shape output_shape(const Geometry& g, std::size_t channels) {
  Shape s{g.batch, channels};
  for (std::size_t i = 3 - g.spatial_rank; i < 3; ++i) s.push_back(g.out[i]);
  return s;
}

// col[(b*O + o) * patch + (c*K + kk)] = padded input value under the window.
void im2col(const Geometry& g, const double* x, double* col) {
  const std::size_t osz = g.out_size(), ksz = g.k_size(), patch = g.patch();
  parallel_for(g.batch, [&](std::size_t b) {
    for (std::size_t ot = 0; ot < g.out[0]; ++ot)
      for (std::size_t oh = 0; oh < g.out[1]; ++oh)
        for (std::size_t ow = 0; ow < g.out[2]; ++ow) {
          const std::size_t o = (ot * g.out[1] + oh) * g.out[2] + ow;
          double* row = col + (b * osz + o) * patch;
          for (std::size_t c = 0; c < g.cin; ++c) {
            const double* xc = x + (b * g.cin + c) * g.in_size();
            double* dst = row + c * ksz;
            for (std::size_t kt = 0; kt < g.k[0]; ++kt) {
              const long it = static_cast<long>(ot * g.stride[0] + kt) - static_cast<long>(g.pad[0]);
              const bool tin = it >= 0 && it < static_cast<long>(g.in[0]);
              for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
                const long ih = static_cast<long>(oh * g.stride[1] + kh) - static_cast<long>(g.pad[1]);
                const bool hin = tin && ih >= 0 && ih < static_cast<long>(g.in[1]);
                for (std::size_t kw = 0; kw < g.k[2]; ++kw) {
                  const long iw = static_cast<long>(ow * g.stride[2] + kw) - static_cast<long>(g.pad[2]);
                  const bool in = hin && iw >= 0 && iw < static_cast<long>(g.in[2]);
                  *dst++ = in ? xc[(static_cast<std::size_t>(it) * g.in[1] + static_cast<std::size_t>(ih)) * g.in[2] +
                                   static_cast<std::size_t>(iw)]
                              : 0.0;
                }
              }
            }
          }
        }
  });
}

// Adjoint of im2col: scatter-add patch gradients back into gx.
void col2im(const Geometry& g, const double* col, double* gx) {
  const std::size_t osz = g.out_size(), ksz = g.k_size(), patch = g.patch();
  parallel_for(g.batch, [&](std::size_t b) {
    for (std::size_t ot = 0; ot < g.out[0]; ++ot)
      for (std::size_t oh = 0; oh < g.out[1]; ++oh)
        for (std::size_t ow = 0; ow < g.out[2]; ++ow) {
          const std::size_t o = (ot * g.out[1] + oh) * g.out[2] + ow;
          const double* row = col + (b * osz + o) * patch;
          for (std::size_t c = 0; c < g.cin; ++c) {
            double* xc = gx + (b * g.cin + c) * g.in_size();
            const double* src = row + c * ksz;
            for (std::size_t kt = 0; kt < g.k[0]; ++kt) {
              const long it = static_cast<long>(ot * g.stride[0] + kt) - static_cast<long>(g.pad[0]);
              const bool tin = it >= 0 && it < static_cast<long>(g.in[0]);
              for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
                const long ih = static_cast<long>(oh * g.stride[1] + kh) - static_cast<long>(g.pad[1]);
                const bool hin = tin && ih >= 0 && ih < static_cast<long>(g.in[1]);
                for (std::size_t kw = 0; kw < g.k[2]; ++kw, ++src) {
                  const long iw = static_cast<long>(ow * g.stride[2] + kw) - static_cast<long>(g.pad[2]);
                  if (hin && iw >= 0 && iw < static_cast<long>(g.in[2])) {
                    xc[(static_cast<std::size_t>(it) * g.in[1] + static_cast<std::size_t>(ih)) * g.in[2] +
                       static_cast<std::size_t>(iw)] += *src;
                  }
                }
              }
            }
          }
        }
  });
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  const long span = static_cast<long>(in + 2 * pad) - static_cast<long>(k);
  if (stride == 0 || span < 0) {
    throw ShapeError("window of extent " + std::to_string(k) + " does not fit input extent " +
                     std::to_string(in) + " with padding " + std::to_string(pad));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

Tensor conv(const Tensor& input, const Tensor& weight, const Tensor& bias, const Window& win) {
  require(weight.rank() == input.rank(), "conv: weight rank " + shape_str(weight.shape()) +
                                             " does not match input " + shape_str(input.shape()));
  require(weight.dim(1) == input.dim(1), "conv: weight expects " + std::to_string(weight.dim(1)) +
                                             " input channels, input has " +
                                             std::to_string(input.dim(1)));
  std::vector<std::size_t> kernel(weight.shape().begin() + 2, weight.shape().end());
  Geometry g = make_geometry(input.shape(), kernel, win, "conv");
  g.cout = weight.dim(0);
  if (bias.defined()) require(bias.rank() == 1 && bias.dim(0) == g.cout, "conv: bias extent");

  const std::size_t rows = g.rows(), patch = g.patch(), cout = g.cout, osz = g.out_size();
  std::vector<double> col(rows * patch);
  im2col(g, input.data().data(), col.data());
  std::vector<double> yrows(rows * cout);
  kernels::gemm(kernels::Trans::kNo, kernels::Trans::kYes, rows, cout, patch, 1.0, col.data(), patch,
                weight.data().data(), patch, 0.0, yrows.data(), cout);
  std::vector<double> out(rows * cout);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      const double bv = bias.defined() ? bias[co] : 0.0;
      double* dst = out.data() + (b * cout + co) * osz;
      const double* src = yrows.data() + b * osz * cout + co;
      for (std::size_t o = 0; o < osz; ++o) dst[o] = src[o * cout] + bv;
    }
  }
  Tensor y = make_result(output_shape(g, cout), std::move(out), "conv");
  if (needs_record({&input, &weight, &bias})) {
    if (!weight.requires_grad()) col.clear();
    record("conv", {input, weight}, y,
           [input, weight, bias, g, col = std::move(col)](const TensorNode& o) {
             using kernels::Trans;
             const std::size_t rows = g.rows(), patch = g.patch(), cout = g.cout, osz = g.out_size();
             std::vector<double> grows(rows * cout);
             for (std::size_t b = 0; b < g.batch; ++b) {
               for (std::size_t co = 0; co < cout; ++co) {
                 const double* src = o.grad.data() + (b * cout + co) * osz;
                 double* dst = grows.data() + b * osz * cout + co;
                 for (std::size_t q = 0; q < osz; ++q) dst[q * cout] = src[q];
               }
             }
             if (double* gw = grad_of(weight)) {
               std::vector<double> gwt(patch * cout);
               kernels::gemm(Trans::kYes, Trans::kNo, patch, cout, rows, 1.0, col.data(), patch,
                             grows.data(), cout, 0.0, gwt.data(), cout);
               for (std::size_t co = 0; co < cout; ++co) {
                 for (std::size_t p = 0; p < patch; ++p) gw[co * patch + p] += gwt[p * cout + co];
               }
             }
             if (double* gb = grad_of(bias)) {
               for (std::size_t r = 0; r < rows; ++r) {
                 for (std::size_t co = 0; co < cout; ++co) gb[co] += grows[r * cout + co];
               }
             }
             if (double* gx = grad_of(input)) {
               std::vector<double> gcol(rows * patch);
               kernels::gemm(Trans::kNo, Trans::kNo, rows, patch, cout, 1.0, grows.data(), cout,
                             weight.data().data(), patch, 0.0, gcol.data(), patch);
               col2im(g, gcol.data(), gx);
             }
           });
  }
  return y;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require(input.rank() == 3, "conv1d expects [B,C,L], got " + shape_str(input.shape()));
  return conv(input, weight, bias, Window{{stride}, {pad}});
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require(input.rank() == 4, "conv2d expects [B,C,H,W], got " + shape_str(input.shape()));
  return conv(input, weight, bias, Window{{stride, stride}, {pad, pad}});
}

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::array<std::size_t, 3> stride, std::array<std::size_t, 3> pad) {
  require(input.rank() == 5, "conv3d expects [B,C,T,H,W], got " + shape_str(input.shape()));
  return conv(input, weight, bias,
              Window{{stride[0], stride[1], stride[2]}, {pad[0], pad[1], pad[2]}});
}

Tensor max_pool(const Tensor& input, const std::vector<std::size_t>& kernel, const Window& win) {
  Geometry g = make_geometry(input.shape(), kernel, win, "max_pool");
  g.cout = g.cin;
  const std::size_t planes = g.batch * g.cin, osz = g.out_size(), isz = g.in_size();
  std::vector<double> out(planes * osz);
  std::vector<std::size_t> argmax(planes * osz);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* x = input.data().data() + p * isz;
    for (std::size_t ot = 0; ot < g.out[0]; ++ot)
      for (std::size_t oh = 0; oh < g.out[1]; ++oh)
        for (std::size_t ow = 0; ow < g.out[2]; ++ow) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_at = 0;
          bool found = false;
          for (std::size_t kt = 0; kt < g.k[0]; ++kt) {
            const long it = static_cast<long>(ot * g.stride[0] + kt) - static_cast<long>(g.pad[0]);
            if (it < 0 || it >= static_cast<long>(g.in[0])) continue;
            for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
              const long ih = static_cast<long>(oh * g.stride[1] + kh) - static_cast<long>(g.pad[1]);
              if (ih < 0 || ih >= static_cast<long>(g.in[1])) continue;
              for (std::size_t kw = 0; kw < g.k[2]; ++kw) {
                const long iw = static_cast<long>(ow * g.stride[2] + kw) - static_cast<long>(g.pad[2]);
                if (iw < 0 || iw >= static_cast<long>(g.in[2])) continue;
                const std::size_t at =
                    (static_cast<std::size_t>(it) * g.in[1] + static_cast<std::size_t>(ih)) * g.in[2] +
                    static_cast<std::size_t>(iw);
                if (!found || x[at] > best) {
                  best = x[at];
                  best_at = at;
                  found = true;
                }
              }
            }
          }
          require(found, "max_pool: window covers only padding");
          const std::size_t o = (ot * g.out[1] + oh) * g.out[2] + ow;
          out[p * osz + o] = best;
          argmax[p * osz + o] = p * isz + best_at;
        }
  }
  if (KinkTrace::active()) {
    for (std::size_t a : argmax) KinkTrace::mix(a);
  }
  Tensor y = make_result(output_shape(g, g.cin), std::move(out), "max_pool");
  if (needs_record({&input})) {
    record("max_pool", {input}, y, [input, argmax = std::move(argmax)](const TensorNode& o) {
      if (double* gx = grad_of(input)) {
        for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += o.grad[i];
      }
    });
  }
  return y;
}

Tensor global_avg_pool(const Tensor& input) {
  require(input.rank() >= 3, "global_avg_pool expects [B,C,...], got " + shape_str(input.shape()));
  const std::size_t bsz = input.dim(0), c = input.dim(1);
  const std::size_t inner = input.size() / std::max<std::size_t>(1, bsz * c);
  require(inner > 0, "global_avg_pool over empty spatial extent");
  std::vector<double> out(bsz * c);
  const double inv = 1.0 / static_cast<double>(inner);
  for (std::size_t p = 0; p < bsz * c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += input[p * inner + i];
    out[p] = acc * inv;
  }
  Tensor y = make_result({bsz, c}, std::move(out), "global_avg_pool");
  if (needs_record({&input})) {
    record("global_avg_pool", {input}, y, [input, inner, inv](const TensorNode& o) {
      if (double* gx = grad_of(input)) {
        for (std::size_t p = 0; p < o.grad.size(); ++p) {
          for (std::size_t i = 0; i < inner; ++i) gx[p * inner + i] += o.grad[p] * inv;
        }
      }
    });
  }
  return y;
}

std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t length,
                                                                 std::size_t parts) {
  if (parts == 0 || length < parts) {
    throw ShapeError("cannot split length " + std::to_string(length) + " into " +
                     std::to_string(parts) + " non-empty segments");
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans(parts);
  for (std::size_t t = 0; t < parts; ++t) {
    spans[t] = {t * length / parts, (t + 1) * length / parts};
  }
  return spans;
}

Tensor segment_mean(const Tensor& input, std::size_t parts) {
  require(input.rank() == 3, "segment_mean expects [B,C,L], got " + shape_str(input.shape()));
  const std::size_t planes = input.dim(0) * input.dim(1), len = input.dim(2);
  const auto spans = segment_bounds(len, parts);
  std::vector<double> out(planes * parts);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t t = 0; t < parts; ++t) {
      double acc = 0.0;
      for (std::size_t i = spans[t].first; i < spans[t].second; ++i) acc += input[p * len + i];
      out[p * parts + t] = acc / static_cast<double>(spans[t].second - spans[t].first);
    }
  }
  Tensor y = make_result({input.dim(0), input.dim(1), parts}, std::move(out), "segment_mean");
  if (needs_record({&input})) {
    record("segment_mean", {input}, y, [input, spans, planes, len, parts](const TensorNode& o) {
      if (double* gx = grad_of(input)) {
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t t = 0; t < parts; ++t) {
            const double share =
                o.grad[p * parts + t] / static_cast<double>(spans[t].second - spans[t].first);
            for (std::size_t i = spans[t].first; i < spans[t].second; ++i) gx[p * len + i] += share;
          }
        }
      }
    });
  }
  return y;
}

Tensor replicate_pad(const Tensor& input, std::size_t pad) {
  require(input.rank() >= 1, "replicate_pad expects at least one axis");
  const std::size_t len = input.shape().back();
  require(len > 0, "replicate_pad over an empty axis");
  if (pad == 0) return input;
  const std::size_t rows = input.size() / len, out_len = len + 2 * pad;
  std::vector<double> out(rows * out_len);
  auto src_index = [len, pad](std::size_t j) {
    return j < pad ? 0 : std::min(j - pad, len - 1);
  };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out_len; ++j) out[r * out_len + j] = input[r * len + src_index(j)];
  }
  Shape shape = input.shape();
  shape.back() = out_len;
  Tensor y = make_result(std::move(shape), std::move(out), "replicate_pad");
  if (needs_record({&input})) {
    record("replicate_pad", {input}, y, [input, rows, len, out_len, src_index](const TensorNode& o) {
      if (double* gx = grad_of(input)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < out_len; ++j) gx[r * len + src_index(j)] += o.grad[r * out_len + j];
        }
      }
    });
  }
  return y;
}

}  // namespace avsr::ad
