// SPDX-License-Identifier: Apache-2.0
#pragma once

// Online trajectory pruning in the logic space.
//
// Every decoding step after warm-up, each active path yields a curvature
// descriptor kappa = r_M - r_A computed from its position-averaged projected
// states across the monitored layers. The cohort of kappas is tested for
// divergence; divergent steps award a point to the K' most central paths,
// quiet steps award points to a random K'-subset. Points accumulated over the
// scoring window [c, c + tau] form the logical quality score (LQS), and the
// top k' paths by LQS survive.

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "ulx/logic_space.hpp"
#include "ulx/rng.hpp"
#include "ulx/types.hpp"

namespace ulx {

enum class WindowMode { fixed, proportional };

struct PruningConfig {
  int t_warm = 10;
  int tau = 12;
  WindowMode window_mode = WindowMode::fixed;
  double tau_factor = 3.0;  // proportional mode: tau = round(tau_factor * c)
  double rho = 0.6;
  double eps_abs = 0.05;
  double eps_rel = 0.5;
  double gamma = 1.1;
  double delta = 1e-8;
  int layer_lo = 0;
  int layer_hi = 0;  // both zero: middle third of the backend's layers
  // Scoring starts here if no divergent step has occurred; negative means
  // t_warm + 32.
  int score_deadline = -1;

  // k' = max(1, round((1 - rho) * n)); also used as K' inside the window.
  int k_prime(int cohort_size) const;
  int deadline() const { return score_deadline >= 0 ? score_deadline : t_warm + 32; }
  int window_length(int window_start) const;
  // Throws ConfigError when a field is out of range.
  void validate() const;
};

struct CurvatureSample {
  int step = 0;
  std::vector<double> delta_m;  // |h_m - h_{m-1}| per adjacent layer pair
  std::vector<double> delta_a;  // angle(h_m, h_{m-1})
  double chord_m = 0.0;         // |h_last - h_first|
  double chord_a = 0.0;
  double r_m = 0.0;
  double r_a = 0.0;
  double kappa = 0.0;
};

// Middle third of a model's layers, [L/3, 2L/3] inclusive.
std::pair<int, int> middle_third(int layer_count);

using KappaMap = std::map<PathId, double>;

struct CohortStats {
  int step = 0;
  int n = 0;
  KappaMap kappas;
  double d_max = 0.0;
  double r_max = 0.0;
  double r_mean = 0.0;
  bool divergent = false;
  std::optional<int> c;  // first divergence step, once known
  std::map<PathId, double> g;
  std::set<PathId> awarded;
};

// Mean over token positions of the projected states at one layer.
Vec position_averaged_state(std::span<const Vec> prefix_states, const LogicSpaceModel& model);

// States ordered from the first to the last monitored layer. Chords below
// `delta` zero the corresponding ratio.
CurvatureSample curvature(std::span<const Vec> layer_states, double delta, int step = 0);

// Spreads and the divergence indicator. Cohorts with fewer than two paths are
// reported non-divergent with zero spreads.
CohortStats divergence_test(const KappaMap& kappas, const PruningConfig& cfg, int step = 0);

// Mean absolute kappa distance of each path to the rest of the cohort.
std::map<PathId, double> centrality(const KappaMap& kappas);

// Awards one point to min(k_prime, n) paths: the most central ones (ties by
// ascending path id) on a divergent step, otherwise a uniformly random
// subset drawn from `rng`. Fills cohort.g when divergent.
std::set<PathId> step_score(CohortStats& cohort, int k_prime, CounterRng rng);

// One step's awards inside the scoring window.
struct WindowStep {
  int step = 0;
  std::set<PathId> awarded;
};

// Sums points over a complete window of `window_length + 1` steps. Throws
// StateError if fewer steps were recorded.
std::map<PathId, int> accumulate_lqs(std::span<const WindowStep> window, std::span<const PathId> paths,
                                     int window_length);

// Keeps the k' paths with the highest LQS. Ties go to the lower mean
// centrality (when provided) and then to the smaller path id.
std::set<PathId> finalize_pruning(const std::map<PathId, int>& lqs, double rho,
                                  const std::map<PathId, double>& mean_g = {});

}  // namespace ulx
