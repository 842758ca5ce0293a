// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ulx/kernels.hpp"

namespace ulx::kernels::detail {

extern const KernelTable scalar_table;
#if defined(ULX_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(ULX_HAVE_NEON)
extern const KernelTable neon_table;
#endif

// Scalar tails shared by the vector variants so leftovers round the same way.
inline double dot_tail(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_distance_tail(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace ulx::kernels::detail
