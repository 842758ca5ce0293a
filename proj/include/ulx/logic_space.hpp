// SPDX-License-Identifier: Apache-2.0
#pragma once

// Language-invariant "logic space": per-layer language centers, the
// language-variation basis spanned by their top singular directions, and the
// shrinkage projector h -> h - lambda * B (B^T h).

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ulx/numerics.hpp"
#include "ulx/types.hpp"

namespace ulx {

// Parallel corpus of hidden states: every (sample, layer) is realized in
// every language.
struct ValidationItem {
  std::string sample;
  LanguageId language;
  int layer = 0;
  Vec state;
};

struct ValidationSet {
  std::vector<ValidationItem> items;
};

using CenterMap = std::map<LanguageId, Vec>;

// Arithmetic mean of each language's states at `layer`. Throws CoverageError
// when a language present elsewhere in the set has no states at this layer or
// a (sample, layer) pair is missing for some language.
CenterMap compute_language_centers(const ValidationSet& val, int layer);

struct ShiftMatrix {
  Mat matrix;                       // d x |L|, column j = center of languages[j]
  std::vector<LanguageId> languages;  // sorted
};

ShiftMatrix build_shift_matrix(const CenterMap& centers);

class LogicSpaceModel {
 public:
  LogicSpaceModel(int layer, CenterMap centers, Mat basis, double lambda,
                  std::vector<double> singular_values = {});

  // Fits the top-`rank` left singular vectors of the shift matrix at `layer`.
  static LogicSpaceModel fit(const ValidationSet& val, int layer, int rank, double lambda);

  int layer() const noexcept { return layer_; }
  std::size_t dim() const noexcept { return basis_.rows(); }
  int rank() const noexcept { return static_cast<int>(basis_.cols()); }
  double lambda() const noexcept { return lambda_; }
  const CenterMap& centers() const noexcept { return centers_; }
  const Mat& basis() const noexcept { return basis_; }
  // All singular values of the shift matrix (empty if unknown).
  const std::vector<double>& singular_values() const noexcept { return singular_values_; }

  // h - lambda * B (B^T h). Never materializes the d x d projector.
  Vec project(const Vec& h) const;
  void project_into(std::span<const double> h, std::span<double> out) const;
  // out += project(h)
  void project_accumulate(std::span<const double> h, std::span<double> out) const;

  std::string to_json() const;
  static LogicSpaceModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static LogicSpaceModel load(const std::filesystem::path& path);

 private:
  int layer_;
  CenterMap centers_;
  Mat basis_;
  double lambda_;
  std::vector<double> singular_values_;
};

// Mean squared distance of the centers from their mean.
double center_dispersion(const CenterMap& centers);
CenterMap project_centers(const LogicSpaceModel& model, const CenterMap& centers);

}  // namespace ulx
