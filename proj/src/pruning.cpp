// SPDX-License-Identifier: Apache-2.0
#include "ulx/pruning.hpp"

#include <algorithm>
#include <cmath>

#include "ulx/error.hpp"
#include "ulx/kernels.hpp"

namespace ulx {

int PruningConfig::k_prime(int cohort_size) const {
  if (cohort_size <= 0) return 0;
  const long keep = std::lround((1.0 - rho) * static_cast<double>(cohort_size));
  return static_cast<int>(std::clamp<long>(keep, 1, cohort_size));
}

int PruningConfig::window_length(int window_start) const {
  if (window_mode == WindowMode::proportional)
    return std::max(1, static_cast<int>(std::lround(tau_factor * static_cast<double>(window_start))));
  return tau;
}

void PruningConfig::validate() const {
  if (t_warm < 0) throw ConfigError("t_warm must be >= 0");
  if (tau < 1) throw ConfigError("tau must be >= 1");
  if (!(tau_factor > 0.0)) throw ConfigError("tau_factor must be > 0");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(eps_abs > 0.0)) throw ConfigError("eps_abs must be > 0");
  if (!(eps_rel > 0.0)) throw ConfigError("eps_rel must be > 0");
  if (!(gamma >= 1.0)) throw ConfigError("gamma must be >= 1");
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  if (layer_lo >= layer_hi) throw ConfigError("monitored layer range needs at least two layers");
  if (score_deadline >= 0 && score_deadline < t_warm) throw ConfigError("score_deadline must be >= t_warm");
}

std::pair<int, int> middle_third(int layer_count) {
  if (layer_count < 3) throw ConfigError("need at least three layers to pick a monitored range");
  return {layer_count / 3, (2 * layer_count) / 3};
}

Vec position_averaged_state(std::span<const Vec> prefix_states, const LogicSpaceModel& model) {
  if (prefix_states.empty()) throw PreconditionError("position_averaged_state: empty prefix");
  Vec acc(model.dim());
  for (const Vec& h : prefix_states) model.project_accumulate(h.span(), acc.span());
  kernels::scale(1.0 / static_cast<double>(prefix_states.size()), acc.span());
  return acc;
}

CurvatureSample curvature(std::span<const Vec> layer_states, double delta, int step) {
  if (layer_states.size() < 2) throw PreconditionError("curvature: needs states from at least two layers");
  const std::size_t d = layer_states.front().size();
  for (const Vec& h : layer_states)
    if (h.size() != d) throw DimensionError("curvature: layer states differ in dimension");

  CurvatureSample s;
  s.step = step;
  const std::size_t pairs = layer_states.size() - 1;
  s.delta_m.resize(pairs);
  s.delta_a.resize(pairs);
  double sum_m = 0.0;
  double sum_a = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    s.delta_m[i] = std::sqrt(kernels::squared_distance(layer_states[i + 1].span(), layer_states[i].span()));
    s.delta_a[i] = angle(layer_states[i + 1], layer_states[i]);
    sum_m += s.delta_m[i];
    sum_a += s.delta_a[i];
  }
  s.chord_m = std::sqrt(kernels::squared_distance(layer_states.back().span(), layer_states.front().span()));
  s.chord_a = angle(layer_states.back(), layer_states.front());
  s.r_m = s.chord_m < delta ? 0.0 : sum_m / s.chord_m;
  s.r_a = s.chord_a < delta ? 0.0 : sum_a / s.chord_a;
  s.kappa = s.r_m - s.r_a;
  return s;
}

CohortStats divergence_test(const KappaMap& kappas, const PruningConfig& cfg, int step) {
  CohortStats st;
  st.step = step;
  st.n = static_cast<int>(kappas.size());
  st.kappas = kappas;
  if (kappas.size() < 2) return st;

  std::vector<double> k;
  k.reserve(kappas.size());
  for (const auto& [p, v] : kappas) k.push_back(v);
  double rel_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    for (std::size_t j = i + 1; j < k.size(); ++j) {
      const double diff = std::abs(k[i] - k[j]);
      const double rel = diff / std::max({std::abs(k[i]), std::abs(k[j]), cfg.delta});
      st.d_max = std::max(st.d_max, diff);
      st.r_max = std::max(st.r_max, rel);
      rel_sum += rel;
      ++pairs;
    }
  }
  st.r_mean = rel_sum / static_cast<double>(pairs);
  st.divergent = st.d_max > cfg.eps_abs && st.r_max > cfg.eps_rel && st.r_max >= cfg.gamma * st.r_mean;
  return st;
}

std::map<PathId, double> centrality(const KappaMap& kappas) {
  if (kappas.empty()) throw PreconditionError("centrality: empty cohort");
  const double denom = static_cast<double>(std::max<std::size_t>(1, kappas.size() - 1));
  std::map<PathId, double> g;
  for (const auto& [p, kp] : kappas) {
    double sum = 0.0;
    for (const auto& [q, kq] : kappas)
      if (!(q == p)) sum += std::abs(kp - kq);
    g.emplace(p, sum / denom);
  }
  return g;
}

std::set<PathId> step_score(CohortStats& cohort, int k_prime, CounterRng rng) {
  std::set<PathId> awarded;
  if (cohort.kappas.empty()) return awarded;
  const std::size_t n = cohort.kappas.size();
  const std::size_t kt = std::min<std::size_t>(static_cast<std::size_t>(std::max(k_prime, 0)), n);
  cohort.g = centrality(cohort.kappas);

  std::vector<PathId> paths;
  paths.reserve(n);
  for (const auto& [p, v] : cohort.kappas) paths.push_back(p);

  if (cohort.divergent) {
    std::stable_sort(paths.begin(), paths.end(), [&](const PathId& a, const PathId& b) {
      const double ga = cohort.g.at(a);
      const double gb = cohort.g.at(b);
      if (ga != gb) return ga < gb;
      return a < b;
    });
    awarded.insert(paths.begin(), paths.begin() + static_cast<long>(kt));
  } else {
    const auto perm = rng.permutation(n);
    for (std::size_t i = 0; i < kt; ++i) awarded.insert(paths[perm[i]]);
  }
  cohort.awarded = awarded;
  return awarded;
}

std::map<PathId, int> accumulate_lqs(std::span<const WindowStep> window, std::span<const PathId> paths,
                                     int window_length) {
  if (static_cast<int>(window.size()) < window_length + 1)
    throw StateError("scoring window incomplete: " + std::to_string(window.size()) + " of " +
                     std::to_string(window_length + 1) + " steps");
  std::map<PathId, int> lqs;
  for (const PathId& p : paths) lqs.emplace(p, 0);
  for (const WindowStep& w : window)
    for (const PathId& p : w.awarded) {
      auto it = lqs.find(p);
      if (it != lqs.end()) ++it->second;
    }
  return lqs;
}

std::set<PathId> finalize_pruning(const std::map<PathId, int>& lqs, double rho,
                                  const std::map<PathId, double>& mean_g) {
  PruningConfig sizing;
  sizing.rho = rho;
  const int keep = sizing.k_prime(static_cast<int>(lqs.size()));
  std::vector<PathId> order;
  order.reserve(lqs.size());
  for (const auto& [p, v] : lqs) order.push_back(p);
  auto g_of = [&](const PathId& p) {
    const auto it = mean_g.find(p);
    return it == mean_g.end() ? 0.0 : it->second;
  };
  std::stable_sort(order.begin(), order.end(), [&](const PathId& a, const PathId& b) {
    const int la = lqs.at(a);
    const int lb = lqs.at(b);
    if (la != lb) return la > lb;
    const double ga = g_of(a);
    const double gb = g_of(b);
    if (ga != gb) return ga < gb;
    return a < b;
  });
  return std::set<PathId>(order.begin(), order.begin() + keep);
}

}  // namespace ulx
