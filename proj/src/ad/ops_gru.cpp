// SPDX-License-Identifier: Apache-2.0
// Fused single-direction GRU with hand-written backpropagation through time.

#include <cmath>

#include "avsr/ad/ops.hpp"
#include "avsr/kernels/kernels.hpp"
#include "op_util.hpp"

namespace avsr::ad {

using detail::grad_of;
using detail::make_result;
using detail::record;
using detail::require;
using kernels::Trans;

namespace {

inline double sigm(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

Tensor gru_sequence(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh, const Tensor& bias,
                    bool reverse) {
  require(x.rank() == 3, "gru_sequence expects [B,T,F], got " + shape_str(x.shape()));
  const std::size_t bsz = x.dim(0), steps = x.dim(1), f = x.dim(2);
  require(w_ih.rank() == 2 && w_ih.dim(0) == f && w_ih.dim(1) % 3 == 0,
          "gru_sequence: input weight must be [F,3H], got " + shape_str(w_ih.shape()));
  const std::size_t h = w_ih.dim(1) / 3, h3 = 3 * h;
  require(w_hh.rank() == 2 && w_hh.dim(0) == h && w_hh.dim(1) == h3,
          "gru_sequence: recurrent weight must be [H,3H], got " + shape_str(w_hh.shape()));
  require(bias.rank() == 1 && bias.dim(0) == h3, "gru_sequence: bias must be [3H]");

  const std::size_t rows = bsz * steps;
  // Input projections for every (b, t): row b*T + t.
  std::vector<double> xw(rows * h3);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias.data().begin(), h3, xw.begin() + r * h3);
  kernels::gemm(Trans::kNo, Trans::kNo, rows, h3, f, 1.0, x.data().data(), f, w_ih.data().data(),
                h3, 1.0, xw.data(), h3);

  const std::size_t plane = bsz * h;
  std::vector<double> hprev(steps * plane), zs(steps * plane), rs(steps * plane), ns(steps * plane),
      rhs(steps * plane);
  std::vector<double> state(plane, 0.0), hu(bsz * 2 * h), hn(plane);
  std::vector<double> out(rows * h);
  const double* whh = w_hh.data().data();

  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    std::copy(state.begin(), state.end(), hprev.begin() + s * plane);
    kernels::gemm(Trans::kNo, Trans::kNo, bsz, 2 * h, h, 1.0, state.data(), h, whh, h3, 0.0,
                  hu.data(), 2 * h);
    double* z = zs.data() + s * plane;
    double* r = rs.data() + s * plane;
    double* rh = rhs.data() + s * plane;
    for (std::size_t b = 0; b < bsz; ++b) {
      const double* xrow = xw.data() + (b * steps + t) * h3;
      for (std::size_t j = 0; j < h; ++j) {
        z[b * h + j] = sigm(xrow[j] + hu[b * 2 * h + j]);
        r[b * h + j] = sigm(xrow[h + j] + hu[b * 2 * h + h + j]);
        rh[b * h + j] = r[b * h + j] * state[b * h + j];
      }
    }
    kernels::gemm(Trans::kNo, Trans::kNo, bsz, h, h, 1.0, rh, h, whh + 2 * h, h3, 0.0, hn.data(), h);
    double* n = ns.data() + s * plane;
    for (std::size_t b = 0; b < bsz; ++b) {
      const double* xrow = xw.data() + (b * steps + t) * h3;
      for (std::size_t j = 0; j < h; ++j) {
        const std::size_t k = b * h + j;
        n[k] = std::tanh(xrow[2 * h + j] + hn[k]);
        state[k] = (1.0 - z[k]) * n[k] + z[k] * state[k];
        out[(b * steps + t) * h + j] = state[k];
      }
    }
  }

  Tensor y = make_result({bsz, steps, h}, std::move(out), "gru_sequence");
  if (needs_record({&x, &w_ih, &w_hh, &bias})) {
    record("gru_sequence", {x, w_ih, w_hh, bias}, y,
           [x, w_ih, w_hh, bias, reverse, bsz, steps, f, h, hprev = std::move(hprev),
            zs = std::move(zs), rs = std::move(rs), ns = std::move(ns),
            rhs = std::move(rhs)](const TensorNode& o) {
             const std::size_t h3 = 3 * h, plane = bsz * h, rows = bsz * steps;
             const std::size_t ld = steps * h3;  // stride between batch rows at fixed t
             const double* whh = w_hh.data().data();
             std::vector<double> dxw(rows * h3, 0.0), dwhh(h * h3, 0.0);
             std::vector<double> carry(plane, 0.0), dh(plane), dhp(plane), drh(plane);
             for (std::size_t s = steps; s-- > 0;) {
               const std::size_t t = reverse ? steps - 1 - s : s;
               const double* z = zs.data() + s * plane;
               const double* r = rs.data() + s * plane;
               const double* n = ns.data() + s * plane;
               const double* hp = hprev.data() + s * plane;
               const double* rh = rhs.data() + s * plane;
               double* dcol = dxw.data() + t * h3;  // row b at dcol + b*ld
               for (std::size_t b = 0; b < bsz; ++b) {
                 for (std::size_t j = 0; j < h; ++j) {
                   const std::size_t k = b * h + j;
                   dh[k] = o.grad[(b * steps + t) * h + j] + carry[k];
                   const double dn = dh[k] * (1.0 - z[k]);
                   dcol[b * ld + 2 * h + j] = dn * (1.0 - n[k] * n[k]);
                   dhp[k] = dh[k] * z[k];
                 }
               }
               // d(r*h) = dan * Un^T ; dUn += (r*h)^T dan
               kernels::gemm(Trans::kNo, Trans::kYes, bsz, h, h, 1.0, dcol + 2 * h, ld, whh + 2 * h,
                             h3, 0.0, drh.data(), h);
               kernels::gemm(Trans::kYes, Trans::kNo, h, h, bsz, 1.0, rh, h, dcol + 2 * h, ld, 1.0,
                             dwhh.data() + 2 * h, h3);
               for (std::size_t b = 0; b < bsz; ++b) {
                 for (std::size_t j = 0; j < h; ++j) {
                   const std::size_t k = b * h + j;
                   const double dz = dh[k] * (hp[k] - n[k]);
                   const double dr = drh[k] * hp[k];
                   dhp[k] += drh[k] * r[k];
                   dcol[b * ld + j] = dz * z[k] * (1.0 - z[k]);
                   dcol[b * ld + h + j] = dr * r[k] * (1.0 - r[k]);
                 }
               }
               kernels::gemm(Trans::kYes, Trans::kNo, h, 2 * h, bsz, 1.0, hp, h, dcol, ld, 1.0,
                             dwhh.data(), h3);
               kernels::gemm(Trans::kNo, Trans::kYes, bsz, h, 2 * h, 1.0, dcol, ld, whh, h3, 1.0,
                             dhp.data(), h);
               carry.swap(dhp);
             }
             if (double* gw = grad_of(w_ih)) {
               kernels::gemm(Trans::kYes, Trans::kNo, f, h3, rows, 1.0, x.data().data(), f,
                             dxw.data(), h3, 1.0, gw, h3);
             }
             if (double* gb = grad_of(bias)) {
               for (std::size_t r = 0; r < rows; ++r) {
                 for (std::size_t j = 0; j < h3; ++j) gb[j] += dxw[r * h3 + j];
               }
             }
             if (double* gu = grad_of(w_hh)) kernels::axpy(dwhh.size(), 1.0, dwhh.data(), gu);
             if (double* gx = grad_of(x)) {
               kernels::gemm(Trans::kNo, Trans::kYes, rows, f, h3, 1.0, dxw.data(), h3,
                             w_ih.data().data(), h3, 1.0, gx, f);
             }
           });
  }
  return y;
}

}  // namespace avsr::ad
