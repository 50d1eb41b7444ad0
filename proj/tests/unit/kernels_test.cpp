// SPDX-License-Identifier: Apache-2.0
// The SIMD variants must agree with the scalar reference kernels.

#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"
#include "avsr/kernels/kernels.hpp"

namespace avsr::kernels {
namespace {

using avsr::testing::max_abs_diff;
using avsr::testing::random_values;

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!avx2::supported()) GTEST_SKIP() << "CPU lacks AVX2/FMA";
  }
};

TEST_F(KernelEquivalence, GemmMatchesScalarAcrossShapesAndTransposes) {
  std::mt19937 gen(11);
  std::uniform_int_distribution<std::size_t> ext(1, 70);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t m = ext(gen), n = ext(gen), k = trial % 10 == 0 ? 300 : ext(gen);
    const Trans ta = (trial & 1) ? Trans::kYes : Trans::kNo;
    const Trans tb = (trial & 2) ? Trans::kYes : Trans::kNo;
    const double alpha = (trial % 3 == 0) ? 1.0 : 0.7;
    const double beta = (trial % 4 == 0) ? 0.0 : (trial % 4 == 1 ? 1.0 : -0.5);
    const std::size_t lda = (ta == Trans::kYes ? m : k) + trial % 3;
    const std::size_t ldb = (tb == Trans::kYes ? k : n) + trial % 2;
    const std::size_t ldc = n + trial % 5;
    const auto a = random_values((ta == Trans::kYes ? k : m) * lda, trial);
    const auto b = random_values((tb == Trans::kYes ? n : k) * ldb, trial + 1000);
    auto c_ref = random_values(m * ldc, trial + 2000);
    auto c_simd = c_ref;
    scalar::gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta, c_ref.data(), ldc);
    avx2::gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta, c_simd.data(), ldc);
    ASSERT_LT(max_abs_diff(c_ref, c_simd), 1e-11) << "trial " << trial << " m=" << m << " n=" << n
                                                  << " k=" << k;
  }
}

TEST_F(KernelEquivalence, BetaZeroIgnoresGarbageInOutput) {
  const auto a = random_values(4 * 3, 1);
  const auto b = random_values(3 * 5, 2);
  std::vector<double> c_ref(20, std::nan("")), c_simd(20, std::nan(""));
  scalar::gemm(Trans::kNo, Trans::kNo, 4, 5, 3, 1.0, a.data(), 3, b.data(), 5, 0.0, c_ref.data(), 5);
  avx2::gemm(Trans::kNo, Trans::kNo, 4, 5, 3, 1.0, a.data(), 3, b.data(), 5, 0.0, c_simd.data(), 5);
  for (double v : c_simd) EXPECT_TRUE(std::isfinite(v));
  EXPECT_LT(max_abs_diff(c_ref, c_simd), 1e-14);
}

TEST_F(KernelEquivalence, AxpyAndDotMatchScalar) {
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 1000u}) {
    const auto x = random_values(n, 3 + n);
    auto y_ref = random_values(n, 4 + n);
    auto y_simd = y_ref;
    scalar::axpy(n, -1.3, x.data(), y_ref.data());
    avx2::axpy(n, -1.3, x.data(), y_simd.data());
    EXPECT_LT(max_abs_diff(y_ref, y_simd), 1e-15);
    EXPECT_NEAR(scalar::dot(n, x.data(), y_ref.data()), avx2::dot(n, x.data(), y_ref.data()), 1e-11);
  }
}

TEST(KernelDispatch, ScalarSelectionIsHonoured) {
  const Isa before = set_active_isa(Isa::kScalar);
  EXPECT_EQ(active_isa(), Isa::kScalar);
  const std::vector<double> a{1, 2, 3, 4}, b{1, 1};
  std::vector<double> c(2);
  gemm(Trans::kNo, Trans::kNo, 2, 1, 2, 1.0, a.data(), 2, b.data(), 1, 0.0, c.data(), 1);
  EXPECT_EQ(c[0], 3.0);
  EXPECT_EQ(c[1], 7.0);
  set_active_isa(before);
  EXPECT_EQ(isa_name(Isa::kAvx2), "avx2");
}

}  // namespace
}  // namespace avsr::kernels
