// SPDX-License-Identifier: Apache-2.0
#include "kernels_internal.hpp"

namespace ulx::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) { return dot_tail(a, b, n); }

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  return squared_distance_tail(a, b, n);
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void rotate_scalar(double c, double s, double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

}  // namespace

const KernelTable scalar_table{Isa::scalar,  dot_scalar,   squared_distance_scalar,
                               axpy_scalar,  scale_scalar, rotate_scalar};

}  // namespace ulx::kernels::detail
