// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic multilingual hidden-state generator with planted ground truth.
//
// Token state of path (l, replica) at position t and layer m:
//
//   h = s(t, m) + o_l + sigma_eps * eps + w(t, m)
//
// s is a smooth query-specific signal (sinusoids over layers and positions),
// o_l a per-language offset inside a random rank-r* subspace, eps iid
// standard normal noise, and w a per-layer random walk with step scale
// sigma_w that is present only on drifting paths. Coherent paths therefore
// agree in the logic space while drifting paths wander off. Each path's
// token stream ends by spelling its planted answer as \boxed{...}.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ulx/backend.hpp"
#include "ulx/rng.hpp"

namespace ulx {

struct SyntheticScenario {
  std::uint64_t seed = 1;
  std::size_t dim = 64;
  int layers = 28;
  std::vector<LanguageId> languages;
  int offset_rank = 4;
  double offset_scale = 1.0;
  double signal_scale = 1.0;
  double signal_bias = 1.0;
  double sigma_eps = 0.01;
  double sigma_w = 0.0;
  // Explicit drifting languages; when empty, `num_drifting` are drawn per
  // query from the non-source languages.
  std::vector<LanguageId> drifting;
  int num_drifting = 0;
  LanguageId source{"en"};
  int max_length = 200;
  // Probability that a coherent / drifting path carries the correct answer.
  double coherent_accuracy = 1.0;
  double drifting_accuracy = 0.0;
  double rendition_noise = 0.05;
  double drifting_rendition_noise = 0.5;
  int validation_samples = 16;
  // Per-language path length overrides (early finishers).
  std::map<LanguageId, int> lengths;

  static SyntheticScenario from_json(const std::string& text);
  static SyntheticScenario load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

class SyntheticProvider final : public Provider {
 public:
  explicit SyntheticProvider(SyntheticScenario scenario);

  ProviderInfo info() const override;
  Vec rendition_state(const std::string& query, const LanguageId& language, int layer) const override;
  std::unique_ptr<PathStream> open(const std::string& query, const PathId& path,
                                   std::span<const int> layers) const override;
  std::optional<std::string> reference_answer(const std::string& query) const override;
  ValidationSet validation_set(std::span<const int> layers) const override;

  const SyntheticScenario& scenario() const noexcept { return scenario_; }
  // Planted subspace basis (dim x offset_rank, orthonormal columns).
  const Mat& offset_basis() const noexcept { return offset_basis_; }
  const Vec& offset(const LanguageId& language) const;

  std::set<LanguageId> drifting_languages(const std::string& query) const;
  std::string planted_answer(const std::string& query, const PathId& path) const;
  int path_length(const LanguageId& language) const;

  // Per-query parameters of the shared signal.
  struct SignalParams {
    std::vector<double> bias, layer_amp, layer_freq, layer_phase, pos_amp, pos_freq, pos_phase;
  };
  SignalParams signal_params(const std::string& query) const;

  // Noise-free shared signal s(t, m).
  static void signal(const SignalParams& p, int t, int layer, std::span<double> out);

 private:
  SyntheticScenario scenario_;
  CounterRng root_;
  Mat offset_basis_;
  std::map<LanguageId, Vec> offsets_;
};

}  // namespace ulx
