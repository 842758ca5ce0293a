// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense double-precision inner loops used by every module. Each kernel has a
// scalar reference implementation and ISA-specific variants; the variant is
// picked once at runtime from CPU features and can be forced for testing.
//
// Element-wise kernels (axpy, rotate, scale) are bit-identical across
// variants. Reductions (dot, squared_distance) reassociate the sum and agree
// with the scalar reference to a few ulps of sum(|a_i * b_i|).

#include <cstddef>
#include <span>
#include <string_view>

namespace ulx::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // (x, y) <- (c*x - s*y, s*x + c*y)
  void (*rotate)(double c, double s, double* x, double* y, std::size_t n);
};

// Table for a specific ISA. Returns nullptr when the ISA was not compiled in
// or the running CPU does not support it.
const KernelTable* table_for(Isa isa) noexcept;

// Best supported table, unless overridden with force_isa().
const KernelTable& active() noexcept;

// Pins the dispatch to `isa`. Returns false (and leaves the dispatch
// unchanged) if the ISA is unavailable.
bool force_isa(Isa isa) noexcept;

// Restores automatic selection.
void reset_isa() noexcept;

bool parse_isa(std::string_view name, Isa& out) noexcept;

// Convenience wrappers over active().
double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
void rotate(double c, double s, std::span<double> x, std::span<double> y);

}  // namespace ulx::kernels
