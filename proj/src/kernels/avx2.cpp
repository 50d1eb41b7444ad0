// SPDX-License-Identifier: Apache-2.0
// AVX2/FMA kernels. This translation unit is built with -mavx2 -mfma and is
// only entered after a runtime CPU check.

#include <algorithm>
#include <cstring>
#include <vector>

#include "avsr/kernels/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define AVSR_HAVE_AVX2 1
#else
#define AVSR_HAVE_AVX2 0
#endif

namespace avsr::kernels::avx2 {

#if AVSR_HAVE_AVX2

namespace {

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 8;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 96;
constexpr std::size_t kNc = 2048;

struct Operand {
  const double* p;
  std::size_t ld;
  bool trans;
  // Logical element (row, col) of op(X).
  double at(std::size_t r, std::size_t c) const {
    return trans ? p[c * ld + r] : p[r * ld + c];
  }
};

// Packs op(A)[i0:i0+mc, p0:p0+kc] into kMr-row panels, k-major inside each.
void pack_a(const Operand& a, std::size_t i0, std::size_t mc, std::size_t p0,
            std::size_t kc, double* dst) {
  for (std::size_t ip = 0; ip < mc; ip += kMr) {
    const std::size_t rows = std::min(kMr, mc - ip);
    for (std::size_t p = 0; p < kc; ++p) {
      std::size_t r = 0;
      for (; r < rows; ++r) dst[r] = a.at(i0 + ip + r, p0 + p);
      for (; r < kMr; ++r) dst[r] = 0.0;
      dst += kMr;
    }
  }
}

// Packs op(B)[p0:p0+kc, j0:j0+nc] into kNr-column panels.
void pack_b(const Operand& b, std::size_t p0, std::size_t kc, std::size_t j0,
            std::size_t nc, double* dst) {
  for (std::size_t jp = 0; jp < nc; jp += kNr) {
    const std::size_t cols = std::min(kNr, nc - jp);
    if (!b.trans && cols == kNr) {
      for (std::size_t p = 0; p < kc; ++p) {
        std::memcpy(dst, b.p + (p0 + p) * b.ld + j0 + jp, kNr * sizeof(double));
        dst += kNr;
      }
      continue;
    }
    for (std::size_t p = 0; p < kc; ++p) {
      std::size_t c = 0;
      for (; c < cols; ++c) dst[c] = b.at(p0 + p, j0 + jp + c);
      for (; c < kNr; ++c) dst[c] = 0.0;
      dst += kNr;
    }
  }
}

// acc[kMr][kNr] = sum_p A_panel[p][:] (x) B_panel[p][:]
inline void micro_kernel(std::size_t kc, const double* ap, const double* bp,
                         double* out /* kMr x kNr, row-major */) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
  __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d a = _mm256_broadcast_sd(ap + 0);
    c00 = _mm256_fmadd_pd(a, b0, c00);
    c01 = _mm256_fmadd_pd(a, b1, c01);
    a = _mm256_broadcast_sd(ap + 1);
    c10 = _mm256_fmadd_pd(a, b0, c10);
    c11 = _mm256_fmadd_pd(a, b1, c11);
    a = _mm256_broadcast_sd(ap + 2);
    c20 = _mm256_fmadd_pd(a, b0, c20);
    c21 = _mm256_fmadd_pd(a, b1, c21);
    a = _mm256_broadcast_sd(ap + 3);
    c30 = _mm256_fmadd_pd(a, b0, c30);
    c31 = _mm256_fmadd_pd(a, b1, c31);
    a = _mm256_broadcast_sd(ap + 4);
    c40 = _mm256_fmadd_pd(a, b0, c40);
    c41 = _mm256_fmadd_pd(a, b1, c41);
    a = _mm256_broadcast_sd(ap + 5);
    c50 = _mm256_fmadd_pd(a, b0, c50);
    c51 = _mm256_fmadd_pd(a, b1, c51);
    ap += kMr;
    bp += kNr;
  }
  _mm256_storeu_pd(out + 0, c00);
  _mm256_storeu_pd(out + 4, c01);
  _mm256_storeu_pd(out + 8, c10);
  _mm256_storeu_pd(out + 12, c11);
  _mm256_storeu_pd(out + 16, c20);
  _mm256_storeu_pd(out + 20, c21);
  _mm256_storeu_pd(out + 24, c30);
  _mm256_storeu_pd(out + 28, c31);
  _mm256_storeu_pd(out + 32, c40);
  _mm256_storeu_pd(out + 36, c41);
  _mm256_storeu_pd(out + 40, c50);
  _mm256_storeu_pd(out + 44, c51);
}

struct PackBuffers {
  std::vector<double> a;
  std::vector<double> b;
};

PackBuffers& buffers() {
  thread_local PackBuffers bufs;
  return bufs;
}

}  // namespace

bool supported() { return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"); }

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = c + i * ldc;
    if (beta == 0.0) {
      std::fill(row, row + n, 0.0);
    } else if (beta != 1.0) {
      for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
  if (k == 0 || alpha == 0.0) return;

  const Operand opa{a, lda, ta == Trans::kYes};
  const Operand opb{b, ldb, tb == Trans::kYes};
  auto& bufs = buffers();
  const std::size_t kc_max = std::min(kKc, k);
  bufs.a.resize(((std::min(kMc, m) + kMr - 1) / kMr) * kMr * kc_max);
  bufs.b.resize(((std::min(kNc, n) + kNr - 1) / kNr) * kNr * kc_max);
  alignas(32) double tile[kMr * kNr];

  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      pack_b(opb, pc, kc, jc, nc, bufs.b.data());
      for (std::size_t ic = 0; ic < m; ic += kMc) {
        const std::size_t mc = std::min(kMc, m - ic);
        pack_a(opa, ic, mc, pc, kc, bufs.a.data());
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const std::size_t cols = std::min(kNr, nc - jr);
          const double* bp = bufs.b.data() + (jr / kNr) * kNr * kc;
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const std::size_t rows = std::min(kMr, mc - ir);
            const double* ap = bufs.a.data() + (ir / kMr) * kMr * kc;
            micro_kernel(kc, ap, bp, tile);
            for (std::size_t r = 0; r < rows; ++r) {
              double* crow = c + (ic + ir + r) * ldc + jc + jr;
              const double* trow = tile + r * kNr;
              if (cols == kNr) {
                const __m256d al = _mm256_set1_pd(alpha);
                _mm256_storeu_pd(crow, _mm256_fmadd_pd(al, _mm256_load_pd(trow), _mm256_loadu_pd(crow)));
                _mm256_storeu_pd(crow + 4, _mm256_fmadd_pd(al, _mm256_load_pd(trow + 4), _mm256_loadu_pd(crow + 4)));
              } else {
                for (std::size_t q = 0; q < cols; ++q) crow[q] += alpha * trow[q];
              }
            }
          }
        }
      }
    }
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d al = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(al, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

#else  // !AVSR_HAVE_AVX2

bool supported() { return false; }

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc) {
  scalar::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void axpy(std::size_t n, double alpha, const double* x, double* y) { scalar::axpy(n, alpha, x, y); }
double dot(std::size_t n, const double* x, const double* y) { return scalar::dot(n, x, y); }

#endif

}  // namespace avsr::kernels::avx2
