// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "avsr/ad/ops.hpp"
#include "op_util.hpp"

namespace avsr::ad {

using detail::grad_of;
using detail::make_result;
using detail::record;
using detail::require;

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 bool training) {
  require(x.rank() >= 2, "batchnorm expects [B,C,...], got " + shape_str(x.shape()));
  const std::size_t bsz = x.dim(0), c = x.dim(1);
  require(gamma.rank() == 1 && gamma.dim(0) == c && beta.rank() == 1 && beta.dim(0) == c,
          "batchnorm: gamma/beta extent must equal channel count " + std::to_string(c));
  require(state.running_mean.size() == c && state.running_var.size() == c,
          "batchnorm: running statistics extent");
  std::size_t inner = 1;
  for (std::size_t i = 2; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t count = bsz * inner;
  if (training && count == 0) {
    throw DegenerateBatchError("batchnorm in training mode over an empty batch");
  }

  std::vector<double> mu(c), inv_std(c);
  if (training) {
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < bsz; ++b) {
        const double* p = x.data().data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < bsz; ++b) {
        const double* p = x.data().data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) ss += (p[i] - m) * (p[i] - m);
      }
      const double var = ss / static_cast<double>(count);
      mu[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      rm[ch] = (1.0 - state.momentum) * rm[ch] + state.momentum * m;
      rv[ch] = (1.0 - state.momentum) * rv[ch] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = state.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
    }
  }

  std::vector<double> xhat(x.size());
  std::vector<double> out(x.size());
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double h = (x[base + i] - mu[ch]) * inv_std[ch];
        xhat[base + i] = h;
        out[base + i] = gamma[ch] * h + beta[ch];
      }
    }
  }
  Tensor y = make_result(x.shape(), std::move(out), "batchnorm");
  if (needs_record({&x, &gamma, &beta})) {
    record("batchnorm", {x, gamma, beta}, y,
           [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), bsz, c, inner,
            count, training](const TensorNode& o) {
             double* gx = grad_of(x);
             double* gg = grad_of(gamma);
             double* gb = grad_of(beta);
             for (std::size_t ch = 0; ch < c; ++ch) {
               double sum_dy = 0.0, sum_dy_xhat = 0.0;
               for (std::size_t b = 0; b < bsz; ++b) {
                 const std::size_t base = (b * c + ch) * inner;
                 for (std::size_t i = 0; i < inner; ++i) {
                   sum_dy += o.grad[base + i];
                   sum_dy_xhat += o.grad[base + i] * xhat[base + i];
                 }
               }
               if (gg) gg[ch] += sum_dy_xhat;
               if (gb) gb[ch] += sum_dy;
               if (gx == nullptr) continue;
               const double g = gamma[ch] * inv_std[ch];
               if (training) {
                 const double n = static_cast<double>(count);
                 for (std::size_t b = 0; b < bsz; ++b) {
                   const std::size_t base = (b * c + ch) * inner;
                   for (std::size_t i = 0; i < inner; ++i) {
                     gx[base + i] +=
                         g / n * (n * o.grad[base + i] - sum_dy - xhat[base + i] * sum_dy_xhat);
                   }
                 }
               } else {
                 for (std::size_t b = 0; b < bsz; ++b) {
                   const std::size_t base = (b * c + ch) * inner;
                   for (std::size_t i = 0; i < inner; ++i) gx[base + i] += g * o.grad[base + i];
                 }
               }
             }
           });
  }
  return y;
}

}  // namespace avsr::ad
