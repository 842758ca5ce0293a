// SPDX-License-Identifier: Apache-2.0
#include "ulx/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "ulx/error.hpp"
#include "ulx/kernels.hpp"

namespace ulx {

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Mat m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    std::size_t j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
  return t;
}

double norm(std::span<const double> v) { return std::sqrt(kernels::dot(v, v)); }

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> v, const char* what) {
  if (v.empty()) throw DimensionError(std::string(what) + ": empty vector");
  if (!all_finite(v)) throw NumericError(std::string(what) + ": non-finite entry");
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DimensionError("cosine: length " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu < kZeroNormGuard || nv < kZeroNormGuard) return 0.0;
  return kernels::dot(u, v) / (nu * nv);
}

double angle(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DimensionError("angle: length " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu < kZeroNormGuard || nv < kZeroNormGuard) return std::numbers::pi / 2;
  double diff = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i] / nu;
    const double b = v[i] / nv;
    diff += (a - b) * (a - b);
    sum += (a + b) * (a + b);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

Mat multiply(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw DimensionError("multiply: inner dimensions differ");
  Mat c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t k = 0; k < a.cols(); ++k) kernels::axpy(b(k, j), a.col(k), c.col(j));
  return c;
}

namespace {

constexpr double kJacobiTolerance = 1e-12;
constexpr int kMaxSweeps = 80;

// Replaces column `j` of `u` by a unit vector orthogonal to columns [0, j).
void complete_column(Mat& u, std::size_t j) {
  const std::size_t n = u.rows();
  double best_norm = -1.0;
  std::vector<double> best;
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<double> cand(n, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        const double proj = kernels::dot(u.col(k), cand);
        kernels::axpy(-proj, u.col(k), cand);
      }
    }
    const double nrm = norm(cand);
    if (nrm > best_norm) {
      best_norm = nrm;
      best = std::move(cand);
    }
    if (best_norm > 0.5) break;
  }
  kernels::scale(1.0 / best_norm, best);
  std::copy(best.begin(), best.end(), u.col(j).begin());
}

// One-sided Jacobi on a tall (rows >= cols) matrix.
Svd jacobi_tall(const Mat& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Mat w = a;
  Mat v = Mat::identity(n);

  bool converged = n < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = kernels::dot(w.col(i), w.col(i));
        const double beta = kernels::dot(w.col(j), w.col(j));
        const double gamma = kernels::dot(w.col(i), w.col(j));
        if (gamma == 0.0 || std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        kernels::rotate(c, s, w.col(i), w.col(j));
        kernels::rotate(c, s, v.col(i), v.col(j));
        rotated = true;
      }
    }
    converged = !rotated;
  }
  if (!converged) throw NumericError("svd: Jacobi sweeps did not converge");

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm(w.col(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out{Mat(m, n), std::vector<double>(n), Mat(n, n)};
  const double smax = n ? sigma[order[0]] : 0.0;
  const double cutoff = static_cast<double>(std::max(m, n)) * std::numeric_limits<double>::epsilon() * smax;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.s[k] = sigma[src];
    std::copy(v.col(src).begin(), v.col(src).end(), out.v.col(k).begin());
    if (sigma[src] > cutoff && sigma[src] > 0.0) {
      auto dst = out.u.col(k);
      std::copy(w.col(src).begin(), w.col(src).end(), dst.begin());
      kernels::scale(1.0 / sigma[src], dst);
    } else {
      complete_column(out.u, k);
    }
  }
  return out;
}

void fix_signs(Svd& f) {
  for (std::size_t k = 0; k < f.s.size(); ++k) {
    auto u = f.u.col(k);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < u.size(); ++i)
      if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
    if (u[arg] < 0.0) {
      kernels::scale(-1.0, u);
      kernels::scale(-1.0, f.v.col(k));
    }
  }
}

}  // namespace

Svd svd(const Mat& a) {
  if (a.rows() == 0 || a.cols() == 0) throw DimensionError("svd: empty matrix");
  if (!all_finite(a.data())) throw NumericError("svd: non-finite input");
  Svd f;
  if (a.rows() >= a.cols()) {
    f = jacobi_tall(a);
  } else {
    Svd t = jacobi_tall(a.transposed());
    f = Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
  }
  fix_signs(f);
  return f;
}

Mat reconstruct(const Svd& f) {
  Mat us = f.u;
  for (std::size_t k = 0; k < f.s.size(); ++k) kernels::scale(f.s[k], us.col(k));
  return multiply(us, f.v.transposed());
}

}  // namespace ulx
