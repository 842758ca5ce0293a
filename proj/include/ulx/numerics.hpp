// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ulx {

// Dense real vector (one hidden state, a language center, ...).
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  explicit Vec(std::vector<double> data) : data_(std::move(data)) {}
  Vec(std::initializer_list<double> values) : data_(values) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> span() const noexcept { return data_; }
  std::span<double> span() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const Vec&) const = default;

 private:
  std::vector<double> data_;
};

// Column-major dense matrix. Columns are contiguous so they can be handed to
// the kernels as spans.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }

  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }
  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }

  // Column-major backing store.
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  Mat transposed() const;

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Norms below this are treated as zero by cosine/angle.
inline constexpr double kZeroNormGuard = 1e-12;

double norm(std::span<const double> v);
inline double norm(const Vec& v) { return norm(v.span()); }

bool all_finite(std::span<const double> v) noexcept;

// Throws NumericError naming `what` if any entry is NaN/Inf, or
// DimensionError if `v` is empty.
void require_finite(std::span<const double> v, const char* what);

// u.v / (|u||v|), or 0 when either norm is below kZeroNormGuard.
double cosine(std::span<const double> u, std::span<const double> v);
inline double cosine(const Vec& u, const Vec& v) { return cosine(u.span(), v.span()); }

// Angle in [0, pi]. Equal to acos(clamp(cosine(u, v))) but evaluated as
// 2*atan2(|u^ - v^|, |u^ + v^|) on the unit vectors, which stays accurate
// for nearly (anti)parallel inputs. Zero-norm operands give pi/2.
double angle(std::span<const double> u, std::span<const double> v);
inline double angle(const Vec& u, const Vec& v) { return angle(u.span(), v.span()); }

Mat multiply(const Mat& a, const Mat& b);

struct Svd {
  Mat u;                  // rows x p, orthonormal columns
  std::vector<double> s;  // p singular values, descending, >= 0
  Mat v;                  // cols x p, orthonormal columns
};

// Thin SVD (p = min(rows, cols)) by one-sided Jacobi rotations. Each left
// singular vector is signed so that its largest-magnitude entry is positive;
// the matching right vector is flipped with it.
Svd svd(const Mat& a);

// Reassembles U diag(S) V^T.
Mat reconstruct(const Svd& f);

}  // namespace ulx
