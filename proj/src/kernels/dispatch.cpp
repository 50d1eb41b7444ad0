// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "avsr/kernels/kernels.hpp"

namespace avsr::kernels {

namespace {

std::atomic<Isa>& selection() {
  static std::atomic<Isa> isa{detect_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

Isa detect_isa() {
  if (const char* env = std::getenv("AVSR_SIMD"); env != nullptr && std::string(env) == "scalar") {
    return Isa::kScalar;
  }
  return avx2::supported() ? Isa::kAvx2 : Isa::kScalar;
}

Isa active_isa() { return selection().load(std::memory_order_relaxed); }

Isa set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !avx2::supported()) isa = Isa::kScalar;
  return selection().exchange(isa);
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc) {
  if (active_isa() == Isa::kAvx2) {
    avx2::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  } else {
    scalar::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  if (active_isa() == Isa::kAvx2) {
    avx2::axpy(n, alpha, x, y);
  } else {
    scalar::axpy(n, alpha, x, y);
  }
}

double dot(std::size_t n, const double* x, const double* y) {
  return active_isa() == Isa::kAvx2 ? avx2::dot(n, x, y) : scalar::dot(n, x, y);
}

}  // namespace avsr::kernels
