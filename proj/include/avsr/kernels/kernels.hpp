// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

namespace avsr::kernels {

/// Instruction-set variant backing the dense kernels.
enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

/// Best variant supported by the running CPU. `AVSR_SIMD=scalar` in the
/// environment forces the reference path.
Isa detect_isa();

/// Variant currently used by the dispatching entry points.
Isa active_isa();

/// Overrides dispatch; returns the previous selection. Selecting an
/// unsupported variant falls back to scalar.
Isa set_active_isa(Isa isa);

enum class Trans { kNo, kYes };

/// Row-major C[M,N] = alpha * op(A) * op(B) + beta * C.
///
/// op(A) is M x K; when `ta == kYes` A is stored K x M. Likewise op(B) is
/// K x N and B is stored N x K under `tb == kYes`. Leading dimensions are
/// the storage row strides. beta == 0 overwrites C without reading it.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc);

/// y[i] += alpha * x[i]
void axpy(std::size_t n, double alpha, const double* x, double* y);

double dot(std::size_t n, const double* x, const double* y);

namespace scalar {
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
}  // namespace scalar

namespace avx2 {
bool supported();
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
}  // namespace avx2

}  // namespace avsr::kernels
