// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include "ulx/error.hpp"

#include "kernels_internal.hpp"

namespace ulx::kernels {
namespace {

const KernelTable* detect() noexcept {
#if defined(ULX_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &detail::avx2_table;
#endif
#if defined(ULX_HAVE_NEON)
  return &detail::neon_table;
#endif
  return &detail::scalar_table;
}

std::atomic<const KernelTable*> g_forced{nullptr};

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("kernel operands differ in length");
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool parse_isa(std::string_view name, Isa& out) noexcept {
  if (name == "scalar") out = Isa::scalar;
  else if (name == "avx2") out = Isa::avx2;
  else if (name == "neon") out = Isa::neon;
  else return false;
  return true;
}

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return &detail::scalar_table;
    case Isa::avx2:
#if defined(ULX_HAVE_AVX2)
      __builtin_cpu_init();
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &detail::avx2_table;
#endif
      return nullptr;
    case Isa::neon:
#if defined(ULX_HAVE_NEON)
      return &detail::neon_table;
#endif
      return nullptr;
  }
  return nullptr;
}

const KernelTable& active() noexcept {
  static const KernelTable* const detected = detect();
  const KernelTable* forced = g_forced.load(std::memory_order_acquire);
  return forced ? *forced : *detected;
}

bool force_isa(Isa isa) noexcept {
  const KernelTable* t = table_for(isa);
  if (!t) return false;
  g_forced.store(t, std::memory_order_release);
  return true;
}

void reset_isa() noexcept { g_forced.store(nullptr, std::memory_order_release); }

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_sizes(x.size(), y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

void rotate(double c, double s, std::span<double> x, std::span<double> y) {
  check_sizes(x.size(), y.size());
  active().rotate(c, s, x.data(), y.data(), x.size());
}

}  // namespace ulx::kernels
