#include <doctest.h>

#include "gen.hpp"
#include "oracles.hpp"
#include "widthfold/gemm.hpp"

using namespace widthfold;

TEST_CASE("gemm_ref") {
  SUBCASE("identity rhs") {
    const DenseTensor a({2, 2}, {1, 2, 3, 4});
    const DenseTensor eye({2, 2}, {1, 0, 0, 1});
    CHECK(gemm_ref(a, eye).bitwise_equal(a));
  }
  SUBCASE("hand arithmetic") {
    const DenseTensor a({2, 2}, {1, 2, 3, 4});
    const DenseTensor b({2, 1}, {5, 6});
    const DenseTensor c = gemm_ref(a, b);
    CHECK(c.at({0, 0}) == 17.0f);
    CHECK(c.at({1, 0}) == 39.0f);
  }
  SUBCASE("matches the loop oracle") {
    testgen::Rng rng(60);
    for (int i = 0; i < 30; ++i) {
      const std::int64_t M = rng.range(1, 6), K = rng.range(1, 6),
                         N = rng.range(1, 6);
      const DenseTensor a = rng.float_tensor({M, K});
      const DenseTensor b = rng.float_tensor({K, N});
      CHECK(gemm_ref(a, b).bitwise_equal(oracles::gemm(a, b)));
    }
  }
  CHECK_THROWS_AS(gemm_ref(DenseTensor::zeros({2, 3}), DenseTensor::zeros({2, 2})),
                  ShapeMismatch);
}

TEST_CASE("gemm_as_conv1x1") {
  SUBCASE("scalar product") {
    const DenseTensor a({1, 1}, {3.0f});
    const DenseTensor b({1, 1}, {4.0f});
    CHECK(gemm_as_conv1x1(a, b).at({0, 0}) == 12.0f);
  }
  SUBCASE("bitwise equal to gemm_ref") {
    testgen::Rng rng(61);
    const DenseTensor a = rng.float_tensor({4, 3});
    const DenseTensor b = rng.float_tensor({3, 2});
    CHECK(gemm_as_conv1x1(a, b).bitwise_equal(gemm_ref(a, b)));
  }
  SUBCASE("exhaustive small grid, integer data") {
    testgen::Rng rng(62);
    for (std::int64_t M = 1; M <= 5; ++M)
      for (std::int64_t K = 1; K <= 5; ++K)
        for (std::int64_t N = 1; N <= 5; ++N) {
          const DenseTensor a = rng.int_tensor({M, K});
          const DenseTensor b = rng.int_tensor({K, N});
          CHECK(gemm_as_conv1x1(a, b).bitwise_equal(gemm_ref(a, b)));
        }
  }
  SUBCASE("three-channel reduction") {
    testgen::Rng rng(63);
    const DenseTensor a = rng.float_tensor({6, 3});
    const DenseTensor b = rng.float_tensor({3, 4});
    CHECK(gemm_as_conv1x1(a, b).bitwise_equal(gemm_ref(a, b)));
  }
}

TEST_CASE("fold_tall_skinny") {
  SUBCASE("factor 1 reduces to the 1x1 conv form") {
    testgen::Rng rng(64);
    const DenseTensor a = rng.float_tensor({5, 2});
    const DenseTensor b = rng.float_tensor({2, 3});
    CHECK(fold_tall_skinny(a, b, 1).bitwise_equal(gemm_as_conv1x1(a, b)));
  }
  SUBCASE("fully folded single column") {
    testgen::Rng rng(65);
    const DenseTensor a = rng.float_tensor({8, 1});
    const DenseTensor b = rng.float_tensor({1, 1});
    const DenseTensor c = fold_tall_skinny(a, b, 8);
    CHECK(max_abs_diff(c, gemm_ref(a, b)) <= 1e-5f);
  }
  SUBCASE("tall-skinny case reaches alignment") {
    testgen::Rng rng(66);
    const DenseTensor a = rng.float_tensor({64, 3});
    const DenseTensor b = rng.float_tensor({3, 4});
    // folded reduction channels: K*F = 24, a multiple of 8
    CHECK((3 * 8) % 8 == 0);
    CHECK(max_abs_diff(fold_tall_skinny(a, b, 8), gemm_ref(a, b)) <= 1e-5f);
  }
  SUBCASE("integer sweep is exact") {
    testgen::Rng rng(67);
    for (const std::int64_t F : {2, 4, 8}) {
      for (const std::int64_t mults : {1, 2, 4}) {
        for (const std::int64_t K : {1, 2, 3}) {
          for (const std::int64_t N : {1, 4}) {
            const DenseTensor a = rng.int_tensor({F * mults, K});
            const DenseTensor b = rng.int_tensor({K, N});
            CHECK(max_abs_diff(fold_tall_skinny(a, b, F), gemm_ref(a, b)) ==
                  0.0f);
          }
        }
      }
    }
  }
  SUBCASE("rows must divide") {
    CHECK_THROWS_AS(
        fold_tall_skinny(DenseTensor::zeros({7, 2}), DenseTensor::zeros({2, 2}), 2),
        IllegalFold);
  }
}
