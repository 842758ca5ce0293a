// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support.hpp"
#include "ulx/error.hpp"
#include "ulx/kernels.hpp"

using namespace ulx;

namespace {

std::vector<kernels::Isa> available() {
  std::vector<kernels::Isa> out;
  for (auto isa : {kernels::Isa::avx2, kernels::Isa::neon})
    if (kernels::table_for(isa)) out.push_back(isa);
  return out;
}

TEST(Kernels, ScalarAlwaysAvailable) {
  ASSERT_NE(kernels::table_for(kernels::Isa::scalar), nullptr);
  EXPECT_EQ(kernels::table_for(kernels::Isa::scalar)->isa, kernels::Isa::scalar);
}

TEST(Kernels, VariantsMatchScalarReference) {
  const auto& ref = *kernels::table_for(kernels::Isa::scalar);
  std::mt19937_64 rng(11);
  for (auto isa : available()) {
    const auto& k = *kernels::table_for(isa);
    for (std::size_t n = 0; n < 70; ++n) {
      const auto a = testing_support::random_vector(rng, n);
      const auto b = testing_support::random_vector(rng, n);
      double abs_sum = 0.0, sq_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        abs_sum += std::fabs(a[i] * b[i]);
        sq_sum += (a[i] - b[i]) * (a[i] - b[i]);
      }
      const double tol = 8 * 1e-16 * (n + 1);
      EXPECT_NEAR(k.dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), tol * (abs_sum + 1e-300))
          << kernels::isa_name(isa) << " n=" << n;
      EXPECT_NEAR(k.squared_distance(a.data(), b.data(), n), ref.squared_distance(a.data(), b.data(), n),
                  tol * (sq_sum + 1e-300));

      auto y1 = b, y2 = b;
      k.axpy(0.37, a.data(), y1.data(), n);
      ref.axpy(0.37, a.data(), y2.data(), n);
      EXPECT_EQ(y1, y2);

      auto s1 = a, s2 = a;
      k.scale(-1.25, s1.data(), n);
      ref.scale(-1.25, s2.data(), n);
      EXPECT_EQ(s1, s2);

      auto x1 = a, x2 = a, z1 = b, z2 = b;
      k.rotate(std::cos(0.3), std::sin(0.3), x1.data(), z1.data(), n);
      ref.rotate(std::cos(0.3), std::sin(0.3), x2.data(), z2.data(), n);
      EXPECT_EQ(x1, x2);
      EXPECT_EQ(z1, z2);
    }
  }
}

TEST(Kernels, ScalarDotIsExactOnSmallIntegers) {
  const auto& ref = *kernels::table_for(kernels::Isa::scalar);
  std::vector<double> a{1, 2, 3, 4, 5}, b{5, 4, 3, 2, 1};
  EXPECT_EQ(ref.dot(a.data(), b.data(), 5), 35.0);
  EXPECT_EQ(ref.squared_distance(a.data(), b.data(), 5), 40.0);
}

TEST(Kernels, ForceAndReset) {
  ASSERT_TRUE(kernels::force_isa(kernels::Isa::scalar));
  EXPECT_EQ(kernels::active().isa, kernels::Isa::scalar);
  kernels::reset_isa();
  for (auto isa : available()) {
    ASSERT_TRUE(kernels::force_isa(isa));
    EXPECT_EQ(kernels::active().isa, isa);
  }
  kernels::reset_isa();
  kernels::Isa parsed;
  EXPECT_TRUE(kernels::parse_isa("scalar", parsed));
  EXPECT_EQ(parsed, kernels::Isa::scalar);
  EXPECT_FALSE(kernels::parse_isa("sse9", parsed));
}

TEST(Kernels, SpanWrappersRejectLengthMismatch) {
  std::vector<double> a(3), b(4);
  EXPECT_THROW(kernels::dot(a, b), DimensionError);
  EXPECT_THROW(kernels::axpy(1.0, a, b), DimensionError);
  EXPECT_THROW(kernels::rotate(1.0, 0.0, a, b), DimensionError);
}

}  // namespace
