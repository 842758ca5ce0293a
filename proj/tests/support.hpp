// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ulx/orchestrator.hpp"
#include "ulx/synthetic.hpp"
#include "ulx/config.hpp"

namespace testing_support {

inline std::vector<ulx::LanguageId> languages(int n) {
  static const char* codes[] = {"ar", "bn", "de", "en", "es", "fr", "id", "it", "ja", "ko", "ms", "pt",
                                "ru", "sw", "te", "th", "vi", "zh", "af", "cs", "hi", "hu", "mr", "ne",
                                "sr", "uk", "ur", "wo", "yo", "zu", "el", "he"};
  std::vector<ulx::LanguageId> out;
  for (int i = 0; i < n; ++i) out.emplace_back(codes[i]);
  return out;
}

inline ulx::SyntheticScenario scenario(int n_langs, std::uint64_t seed = 7) {
  ulx::SyntheticScenario s;
  s.seed = seed;
  s.languages = languages(n_langs);
  return s;
}

inline ulx::OrchestratorConfig config_for(const ulx::Provider& p, int k) {
  ulx::OrchestratorConfig c;
  c.selection.k = k;
  const auto [lo, hi] = ulx::middle_third(p.info().layer_count);
  c.pruning.layer_lo = lo;
  c.pruning.layer_hi = hi;
  return c;
}

inline ulx::ModelMap models_for(const ulx::Provider& p, const ulx::OrchestratorConfig& c, int rank = 4,
                                double lambda = 0.4) {
  std::set<int> unique{c.selection.analysis_layer};
  for (int m = c.pruning.layer_lo; m <= c.pruning.layer_hi; ++m) unique.insert(m);
  const std::vector<int> layers(unique.begin(), unique.end());
  return ulx::fit_models(p.validation_set(layers), layers, rank, lambda);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ulx_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

}  // namespace testing_support
