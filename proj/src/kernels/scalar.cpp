// SPDX-License-Identifier: Apache-2.0
// Reference kernels. Plain loops, fixed summation order.

#include "avsr/kernels/kernels.hpp"

namespace avsr::kernels::scalar {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc) {
  const bool at = ta == Trans::kYes;
  const bool bt = tb == Trans::kYes;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = at ? a[p * lda + i] : a[i * lda + p];
        const double bv = bt ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      double& out = c[i * ldc + j];
      out = (beta == 0.0 ? 0.0 : beta * out) + alpha * acc;
    }
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace avsr::kernels::scalar
