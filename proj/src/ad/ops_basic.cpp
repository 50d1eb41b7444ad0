// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>

#include "avsr/ad/ops.hpp"
#include "avsr/kernels/kernels.hpp"
#include "op_util.hpp"

namespace avsr::ad {

using detail::grad_of;
using detail::make_result;
using detail::record;
using detail::require;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

// Splits `shape` around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor y = make_result(a.shape(), std::move(out), "add");
  if (needs_record({&a, &b})) {
    record("add", {a, b}, y, [a, b](const TensorNode& o) {
      if (double* ga = grad_of(a)) kernels::axpy(o.grad.size(), 1.0, o.grad.data(), ga);
      if (double* gb = grad_of(b)) kernels::axpy(o.grad.size(), 1.0, o.grad.data(), gb);
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor y = make_result(a.shape(), std::move(out), "sub");
  if (needs_record({&a, &b})) {
    record("sub", {a, b}, y, [a, b](const TensorNode& o) {
      if (double* ga = grad_of(a)) kernels::axpy(o.grad.size(), 1.0, o.grad.data(), ga);
      if (double* gb = grad_of(b)) kernels::axpy(o.grad.size(), -1.0, o.grad.data(), gb);
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor y = make_result(a.shape(), std::move(out), "mul");
  if (needs_record({&a, &b})) {
    record("mul", {a, b}, y, [a, b](const TensorNode& o) {
      if (double* ga = grad_of(a)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i] * b[i];
      }
      if (double* gb = grad_of(b)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i] += o.grad[i] * a[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  Tensor y = make_result(a.shape(), std::move(out), "scale");
  if (needs_record({&a})) {
    record("scale", {a}, y, [a, factor](const TensorNode& o) {
      if (double* ga = grad_of(a)) kernels::axpy(o.grad.size(), factor, o.grad.data(), ga);
    });
  }
  return y;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor y = make_result({}, {acc}, "sum");
  if (needs_record({&a})) {
    record("sum", {a}, y, [a](const TensorNode& o) {
      if (double* ga = grad_of(a)) {
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += o.grad[0];
      }
    });
  }
  return y;
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor dot_const(const Tensor& a, std::span<const double> weights) {
  require(weights.size() == a.size(), "dot_const: weight count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * weights[i];
  Tensor y = make_result({}, {acc}, "dot_const");
  if (needs_record({&a})) {
    std::vector<double> w(weights.begin(), weights.end());
    record("dot_const", {a}, y, [a, w = std::move(w)](const TensorNode& o) {
      if (double* ga = grad_of(a)) {
        for (std::size_t i = 0; i < w.size(); ++i) ga[i] += o.grad[0] * w[i];
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.size(), "reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  Tensor y = make_result(std::move(shape), std::move(out), "reshape");
  if (needs_record({&a})) {
    record("reshape", {a}, y, [a](const TensorNode& o) {
      if (double* ga = grad_of(a)) kernels::axpy(o.grad.size(), 1.0, o.grad.data(), ga);
    });
  }
  return y;
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t r = a.rank();
  require(perm.size() == r, "permute: rank mismatch");
  {
    std::vector<std::size_t> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < r; ++i) require(sorted[i] == i, "permute: not a permutation");
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = a.dim(perm[i]);
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * a.dim(i);
  // src_offset[k] = offset in `a` of the k-th element of the output.
  std::vector<std::size_t> src(a.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t k = 0; k < src.size(); ++k) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_strides[perm[i]];
    src[k] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[src[k]];
  Tensor y = make_result(std::move(out_shape), std::move(out), "permute");
  if (needs_record({&a})) {
    record("permute", {a}, y, [a, src = std::move(src)](const TensorNode& o) {
      if (double* ga = grad_of(a)) {
        for (std::size_t k = 0; k < src.size(); ++k) ga[src[k]] += o.grad[k];
      }
    });
  }
  return y;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat of nothing");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require(p.rank() == first.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis) require(p.dim(i) == first[i], "concat: extent mismatch on axis " + std::to_string(i));
    }
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit total = split_axis(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::size_t offset = 0;  // running position along `axis`
  for (const auto& p : parts) {
    const AxisSplit s = split_axis(p.shape(), axis);
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(p.data().begin() + o * s.extent * s.inner, s.extent * s.inner,
                  out.begin() + (o * total.extent + offset) * total.inner);
    }
    offset += s.extent;
  }
  Tensor y = make_result(out_shape, std::move(out), "concat");
  std::vector<const Tensor*> ptrs;
  bool any = false;
  for (const auto& p : parts) any = any || needs_record({&p});
  if (any) {
    record("concat", parts, y, [parts, axis, total](const TensorNode& o) {
      std::size_t off = 0;
      for (const auto& p : parts) {
        const AxisSplit s = split_axis(p.shape(), axis);
        if (double* gp = grad_of(p)) {
          for (std::size_t q = 0; q < s.outer; ++q) {
            const double* src = o.grad.data() + (q * total.extent + off) * total.inner;
            double* dst = gp + q * s.extent * s.inner;
            for (std::size_t i = 0; i < s.extent * s.inner; ++i) dst[i] += src[i];
          }
        }
        off += s.extent;
      }
    });
  }
  return y;
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  require(axis < a.rank(), "mean_axis: axis out of range");
  const AxisSplit s = split_axis(a.shape(), axis);
  require(s.extent > 0, "mean_axis over an empty axis");
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = a.data().data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  for (double& v : out) v *= inv;
  Tensor y = make_result(std::move(out_shape), std::move(out), "mean_axis");
  if (needs_record({&a})) {
    record("mean_axis", {a}, y, [a, s, inv](const TensorNode& o) {
      if (double* ga = grad_of(a)) {
        for (std::size_t q = 0; q < s.outer; ++q) {
          for (std::size_t e = 0; e < s.extent; ++e) {
            double* dst = ga + (q * s.extent + e) * s.inner;
            const double* src = o.grad.data() + q * s.inner;
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * inv;
          }
        }
      }
    });
  }
  return y;
}

Tensor activation(const Tensor& x, Activation kind) {
  std::vector<double> out(x.size());
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      if (KinkTrace::active()) {
        for (std::size_t i = 0; i < out.size(); ++i) KinkTrace::mix(x[i] > 0.0 ? 1 : 0);
      }
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) {
        // Branching keeps exp() from overflowing for large |x|.
        const double v = x[i];
        if (v >= 0.0) {
          out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
          const double e = std::exp(v);
          out[i] = e / (1.0 + e);
        }
      }
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
      break;
  }
  Tensor y = make_result(x.shape(), std::move(out), "activation");
  if (needs_record({&x})) {
    record("activation", {x}, y, [x, kind](const TensorNode& o) {
      double* gx = grad_of(x);
      if (gx == nullptr) return;
      const auto& yv = o.data;
      for (std::size_t i = 0; i < yv.size(); ++i) {
        double d = 0.0;
        switch (kind) {
          case Activation::kRelu:
            d = x[i] > 0.0 ? 1.0 : 0.0;
            break;
          case Activation::kSigmoid:
            d = yv[i] * (1.0 - yv[i]);
            break;
          case Activation::kTanh:
            d = 1.0 - yv[i] * yv[i];
            break;
        }
        gx[i] += o.grad[i] * d;
      }
    });
  }
  return y;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require(axis < x.rank(), "softmax: axis out of range");
  const AxisSplit s = split_axis(x.shape(), axis);
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = -INFINITY;
      for (std::size_t e = 0; e < s.extent; ++e) mx = std::max(mx, x[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(x[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= z;
    }
  }
  Tensor y = make_result(x.shape(), std::move(out), "softmax");
  if (needs_record({&x})) {
    record("softmax", {x}, y, [x, s](const TensorNode& o) {
      double* gx = grad_of(x);
      if (gx == nullptr) return;
      for (std::size_t q = 0; q < s.outer; ++q) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = q * s.extent * s.inner + in;
          double dotp = 0.0;
          for (std::size_t e = 0; e < s.extent; ++e) {
            dotp += o.grad[base + e * s.inner] * o.data[base + e * s.inner];
          }
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            gx[k] += o.data[k] * (o.grad[k] - dotp);
          }
        }
      }
    });
  }
  return y;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() == 2, "cross_entropy expects [N,C] logits, got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0);
  const std::size_t c = logits.dim(1);
  require(labels.size() == n, "cross_entropy: label count does not match batch");
  require(n > 0, "cross_entropy over an empty batch");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= c) {
      throw LabelError("label " + std::to_string(l) + " outside [0, " + std::to_string(c) + ")");
    }
  }
  // Probabilities are kept for the backward pass.
  std::vector<double> probs(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    total += -(row[labels[i]] - mx - std::log(z));
  }
  Tensor y = make_result({}, {total / static_cast<double>(n)}, "cross_entropy");
  if (needs_record({&logits})) {
    std::vector<int> lab(labels.begin(), labels.end());
    record("cross_entropy", {logits}, y,
           [logits, probs = std::move(probs), lab = std::move(lab), n, c](const TensorNode& o) {
             double* g = grad_of(logits);
             if (g == nullptr) return;
             const double s = o.grad[0] / static_cast<double>(n);
             for (std::size_t i = 0; i < n; ++i) {
               for (std::size_t j = 0; j < c; ++j) {
                 const double target = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
                 g[i * c + j] += s * (probs[i * c + j] - target);
               }
             }
           });
  }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul expects matrices");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  std::vector<double> out(m * n);
  kernels::gemm(kernels::Trans::kNo, kernels::Trans::kNo, m, n, k, 1.0, a.data().data(), k,
                b.data().data(), n, 0.0, out.data(), n);
  Tensor y = make_result({m, n}, std::move(out), "matmul");
  if (needs_record({&a, &b})) {
    record("matmul", {a, b}, y, [a, b, m, n, k](const TensorNode& o) {
      using kernels::Trans;
      if (double* ga = grad_of(a)) {
        kernels::gemm(Trans::kNo, Trans::kYes, m, k, n, 1.0, o.grad.data(), n, b.data().data(), n,
                      1.0, ga, k);
      }
      if (double* gb = grad_of(b)) {
        kernels::gemm(Trans::kYes, Trans::kNo, k, n, m, 1.0, a.data().data(), k, o.grad.data(), n,
                      1.0, gb, n);
      }
    });
  }
  return y;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(x.rank() == 2 && w.rank() == 2, "affine expects [N,K] x [K,C]");
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  require(w.dim(0) == k, "affine: inner extents differ " + shape_str(x.shape()) + " x " +
                             shape_str(w.shape()));
  if (bias.defined()) require(bias.rank() == 1 && bias.dim(0) == n, "affine: bias extent");
  std::vector<double> out(m * n);
  if (bias.defined()) {
    for (std::size_t i = 0; i < m; ++i) std::copy_n(bias.data().begin(), n, out.begin() + i * n);
  }
  kernels::gemm(kernels::Trans::kNo, kernels::Trans::kNo, m, n, k, 1.0, x.data().data(), k,
                w.data().data(), n, bias.defined() ? 1.0 : 0.0, out.data(), n);
  Tensor y = make_result({m, n}, std::move(out), "affine");
  if (needs_record({&x, &w, &bias})) {
    record("affine", {x, w}, y, [x, w, bias, m, n, k](const TensorNode& o) {
      using kernels::Trans;
      if (double* gx = grad_of(x)) {
        kernels::gemm(Trans::kNo, Trans::kYes, m, k, n, 1.0, o.grad.data(), n, w.data().data(), n,
                      1.0, gx, k);
      }
      if (double* gw = grad_of(w)) {
        kernels::gemm(Trans::kYes, Trans::kNo, k, n, m, 1.0, x.data().data(), k, o.grad.data(), n,
                      1.0, gw, n);
      }
      if (double* gb = grad_of(bias)) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) gb[j] += o.grad[i * n + j];
        }
      }
    });
  }
  return y;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require(x.rank() >= 2, "add_channel_bias expects [B,C,...]");
  const std::size_t c = x.dim(1);
  require(bias.rank() == 1 && bias.dim(0) == c, "add_channel_bias: bias extent");
  const AxisSplit s = split_axis(x.shape(), 1);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t b = 0; b < s.outer; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* dst = out.data() + (b * c + ch) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += bias[ch];
    }
  }
  Tensor y = make_result(x.shape(), std::move(out), "add_channel_bias");
  if (needs_record({&x, &bias})) {
    record("add_channel_bias", {x, bias}, y, [x, bias, s, c](const TensorNode& o) {
      if (double* gx = grad_of(x)) kernels::axpy(o.grad.size(), 1.0, o.grad.data(), gx);
      if (double* gb = grad_of(bias)) {
        for (std::size_t b = 0; b < s.outer; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double* src = o.grad.data() + (b * c + ch) * s.inner;
            double acc = 0.0;
            for (std::size_t i = 0; i < s.inner; ++i) acc += src[i];
            gb[ch] += acc;
          }
        }
      }
    });
  }
  return y;
}

Tensor temporal_gate(const Tensor& x, const Tensor& raw) {
  require(x.rank() == 3, "temporal_gate expects [B,T,F], got " + shape_str(x.shape()));
  const std::size_t bsz = x.dim(0), t = x.dim(1), f = x.dim(2);
  require(raw.rank() == 1 && raw.dim(0) == t,
          "temporal_gate: gate length " + shape_str(raw.shape()) + " does not match T=" +
              std::to_string(t));
  std::vector<double> gate(t);
  for (std::size_t i = 0; i < t; ++i) {
    const double v = raw[i];
    gate[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  std::vector<double> out(x.size());
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t i = 0; i < t; ++i) {
      const std::size_t base = (b * t + i) * f;
      for (std::size_t j = 0; j < f; ++j) out[base + j] = x[base + j] * gate[i];
    }
  }
  Tensor y = make_result(x.shape(), std::move(out), "temporal_gate");
  if (needs_record({&x, &raw})) {
    record("temporal_gate", {x, raw}, y, [x, raw, gate, bsz, t, f](const TensorNode& o) {
      double* gx = grad_of(x);
      double* gr = grad_of(raw);
      for (std::size_t b = 0; b < bsz; ++b) {
        for (std::size_t i = 0; i < t; ++i) {
          const std::size_t base = (b * t + i) * f;
          double acc = 0.0;
          for (std::size_t j = 0; j < f; ++j) {
            if (gx) gx[base + j] += o.grad[base + j] * gate[i];
            acc += o.grad[base + j] * x[base + j];
          }
          if (gr) gr[i] += acc * gate[i] * (1.0 - gate[i]);
        }
      }
    });
  }
  return y;
}

}  // namespace avsr::ad
