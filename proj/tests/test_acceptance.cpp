// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles/oracles.hpp"
#include "support.hpp"
#include "ulx/logic_space.hpp"
#include "ulx/numerics.hpp"
#include "ulx/orchestrator.hpp"
#include "ulx/pruning.hpp"
#include "ulx/selection.hpp"
#include "ulx/synthetic.hpp"
#include "ulx/trace.hpp"

using namespace ulx;
using oracle::Real;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure message; later ones are counted only.
struct Checker {
  bool ok = true;
  int failures = 0;
  std::string first;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (ok) first = what;
    ok = false;
    ++failures;
  }
  Outcome outcome(const std::string& summary) const {
    if (ok) return {true, summary};
    return {false, summary + "; " + std::to_string(failures) + " failure(s), first: " + first};
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::vector<Real> widen(std::span<const double> v) { return {v.begin(), v.end()}; }

// ---------------------------------------------------------------------------

Outcome numerics_oracle() {
  Checker ck;
  double worst_recon = 0.0, worst_vec = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const std::size_t m = 1 + rng() % 10, n = 1 + rng() % 10;
    Mat a(m, n);
    if (seed % 5 == 4 && std::min(m, n) > 1) {
      // Rank-deficient: product of thinner factors.
      const std::size_t r = 1 + rng() % (std::min(m, n) - 1);
      const auto x = testing_support::random_vector(rng, m * r), y = testing_support::random_vector(rng, r * n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t t = 0; t < r; ++t) a(i, j) += x[i * r + t] * y[t * n + j];
    } else {
      const auto x = testing_support::random_vector(rng, m * n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = x[i * n + j];
    }

    const Svd f = svd(a);
    Real fro = 0, err = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Real s = 0;
        for (std::size_t t = 0; t < f.s.size(); ++t) s += Real(f.u(i, t)) * f.s[t] * f.v(j, t);
        err += (s - a(i, j)) * (s - a(i, j));
        fro += Real(a(i, j)) * a(i, j);
      }
    const double rel = static_cast<double>(std::sqrt(err) / std::max<Real>(std::sqrt(fro), 1e-300L));
    worst_recon = std::max(worst_recon, rel);
    ck.expect(rel <= 1e-8, "seed " + std::to_string(seed) + " reconstruction " + fmt("%.3g", rel));

    oracle::Matrix aat(m, std::vector<Real>(m, 0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t j = 0; j < n; ++j) aat[i][k] += Real(a(i, j)) * a(k, j);
    const auto [vals, vecs] = oracle::symmetric_eigen(aat);
    const Real scale = std::max<Real>(vals.front(), 1e-300L);

    // Compare every left singular vector with the oracle eigenvectors. When
    // eigenvalues cluster, only the invariant subspace is determined, so the
    // vector must lie in the span of the cluster.
    for (std::size_t j = 0; j < f.s.size(); ++j) {
      const Real sigma2 = Real(f.s[j]) * f.s[j];
      std::vector<std::size_t> cluster;
      for (std::size_t t = 0; t < m; ++t)
        if (std::fabs(vals[t] - sigma2) <= 1e-4L * scale) cluster.push_back(t);
      if (cluster.empty()) {
        ck.expect(false, "seed " + std::to_string(seed) + " singular value without eigenvalue");
        continue;
      }
      // Residual of u after removing its component in the cluster span.
      std::vector<Real> resid(m);
      for (std::size_t i = 0; i < m; ++i) resid[i] = f.u(i, j);
      for (std::size_t t : cluster) {
        Real d = 0;
        for (std::size_t i = 0; i < m; ++i) d += Real(f.u(i, j)) * vecs[i][t];
        for (std::size_t i = 0; i < m; ++i) resid[i] -= d * vecs[i][t];
      }
      const double dev = static_cast<double>(oracle::norm(resid));
      worst_vec = std::max(worst_vec, dev);
      ck.expect(dev <= 1e-8, "seed " + std::to_string(seed) + " vector " + std::to_string(j) + " off by " +
                                 fmt("%.3g", dev));
    }
  }
  return ck.outcome("100 matrices, max reconstruction " + fmt("%.2g", worst_recon) + "*|A|_F, max vector deviation " +
                    fmt("%.2g", worst_vec));
}

// ---------------------------------------------------------------------------

// Orthonormal d x r basis by modified Gram-Schmidt in long double.
Mat random_basis(std::mt19937_64& rng, std::size_t d, std::size_t r) {
  std::vector<std::vector<Real>> cols;
  while (cols.size() < r) {
    const auto x = testing_support::random_vector(rng, d);
    std::vector<Real> v(x.begin(), x.end());
    for (const auto& c : cols) {
      const Real p = oracle::dot(v, c);
      for (std::size_t i = 0; i < d; ++i) v[i] -= p * c[i];
    }
    const Real nv = oracle::norm(v);
    if (nv < 1e-6L) continue;
    for (auto& e : v) e /= nv;
    cols.push_back(v);
  }
  Mat b(d, r);
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < d; ++i) b(i, j) = static_cast<double>(cols[j][i]);
  return b;
}

Outcome projection() {
  Checker ck;
  double worst_orth = 0.0, worst_lin = 0.0, worst_oracle = 0.0;
  for (int seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 5000);
    const std::size_t d = 2 + rng() % 63;
    const std::size_t r = 1 + rng() % std::min<std::size_t>(d, 8);
    const Mat b = random_basis(rng, d, r);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3, 3)(rng));
    const Vec h(testing_support::random_vector(rng, d, scale));
    const Real nh = oracle::norm(widen(h.span()));
    const std::string tag = "case " + std::to_string(seed);

    const LogicSpaceModel full(13, {}, b, 1.0);
    const Vec p1 = full.project(h);
    Real bt = 0;
    for (std::size_t j = 0; j < r; ++j) {
      Real s = 0;
      for (std::size_t i = 0; i < d; ++i) s += Real(b(i, j)) * p1[i];
      bt += s * s;
    }
    const double orth = static_cast<double>(std::sqrt(bt) / nh);
    worst_orth = std::max(worst_orth, orth);
    ck.expect(orth <= 1e-8, tag + " |B^T p(h)| = " + fmt("%.3g", orth) + "|h|");

    const LogicSpaceModel zero(13, {}, b, 0.0);
    ck.expect(zero.project(h) == h, tag + " lambda=0 changed h");

    const double lambda = std::uniform_real_distribution<double>(0, 1)(rng);
    const LogicSpaceModel mid(13, {}, b, lambda);
    const Vec h2(testing_support::random_vector(rng, d, scale));
    const double alpha = std::uniform_real_distribution<double>(-3, 3)(rng);
    const double beta = std::uniform_real_distribution<double>(-3, 3)(rng);
    Vec combo(d);
    for (std::size_t i = 0; i < d; ++i) combo[i] = alpha * h[i] + beta * h2[i];
    const Vec pc = mid.project(combo), ph = mid.project(h), ph2 = mid.project(h2);
    const Real ref = std::fabs(alpha) * nh + std::fabs(beta) * oracle::norm(widen(h2.span()));
    Real lin = 0, orc = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const Real e = Real(pc[i]) - (Real(alpha) * ph[i] + Real(beta) * ph2[i]);
      lin += e * e;
      // Explicit (I - lambda B B^T) h as an independent reference.
      Real bbh = 0;
      for (std::size_t j = 0; j < r; ++j) {
        Real bth = 0;
        for (std::size_t t = 0; t < d; ++t) bth += Real(b(t, j)) * h[t];
        bbh += Real(b(i, j)) * bth;
      }
      const Real o = Real(h[i]) - Real(lambda) * bbh - ph[i];
      orc += o * o;
    }
    const double lin_rel = static_cast<double>(std::sqrt(lin) / ref);
    const double orc_rel = static_cast<double>(std::sqrt(orc) / nh);
    worst_lin = std::max(worst_lin, lin_rel);
    worst_oracle = std::max(worst_oracle, orc_rel);
    ck.expect(lin_rel <= 1e-10, tag + " linearity " + fmt("%.3g", lin_rel));
    ck.expect(orc_rel <= 1e-10, tag + " explicit projector mismatch " + fmt("%.3g", orc_rel));
  }
  return ck.outcome("1000 cases, max |B^T p(h)|/|h| " + fmt("%.2g", worst_orth) + ", max linearity " +
                    fmt("%.2g", worst_lin) + ", max explicit-projector gap " + fmt("%.2g", worst_oracle));
}

// ---------------------------------------------------------------------------

Real dispersion_oracle(const CenterMap& centers) {
  std::vector<std::vector<double>> rows;
  for (const auto& [l, mu] : centers) rows.push_back(mu.values());
  const auto mean = oracle::mean(rows);
  Real s = 0;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size(); ++j) s += (r[j] - mean[j]) * (r[j] - mean[j]);
  return s / static_cast<Real>(rows.size());
}

Outcome planted_recovery() {
  Checker ck;
  double worst = 0.0;
  int fits = 0;
  for (std::uint64_t seed : {7ULL, 8ULL, 9ULL}) {
    auto sc = testing_support::scenario(18, seed);
    const SyntheticProvider p(sc);
    const auto [lo, hi] = middle_third(p.info().layer_count);
    std::vector<int> layers;
    for (int m = lo; m <= hi; ++m) layers.push_back(m);
    const ValidationSet val = p.validation_set(layers);
    for (int m : layers) {
      const auto model = LogicSpaceModel::fit(val, m, sc.offset_rank, 1.0);
      const CenterMap centers = compute_language_centers(val, m);
      const Real before = dispersion_oracle(centers);
      const Real after = dispersion_oracle(project_centers(model, centers));
      const double ratio = static_cast<double>(after / before);
      worst = std::max(worst, ratio);
      ++fits;
      ck.expect(ratio <= 0.01, "seed " + std::to_string(seed) + " layer " + std::to_string(m) + " ratio " +
                                   fmt("%.4g", ratio));
    }
  }
  return ck.outcome(std::to_string(fits) + " fits at rank 4, max projected/unprojected variance " +
                    fmt("%.3g", worst));
}

// ---------------------------------------------------------------------------

PathId pid(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "p%02zu", i);
  return PathId{LanguageId(buf), 0};
}

Outcome divergence_oracles() {
  Checker ck;
  const std::vector<double> grid{-1.0, -0.2, 0.0, 0.05, 0.3, 1.0};
  std::vector<PruningConfig> cfgs(3);
  cfgs[1].eps_abs = 0.2;
  cfgs[1].eps_rel = 0.1;
  cfgs[1].gamma = 1.0;
  cfgs[2].eps_abs = 0.0;
  cfgs[2].eps_rel = 1.5;
  cfgs[2].gamma = 1.5;
  cfgs[2].delta = 0.5;
  long cohorts = 0, divergent = 0;

  for (std::size_t n = 0; n <= 6; ++n) {
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      std::vector<double> k(n);
      KappaMap km;
      for (std::size_t i = 0; i < n; ++i) {
        k[i] = grid[idx[i]];
        km.emplace(pid(i), k[i]);
      }
      for (const auto& cfg : cfgs) {
        const CohortStats st = divergence_test(km, cfg);
        const auto o = oracle::divergence(k, cfg.eps_abs, cfg.eps_rel, cfg.gamma, cfg.delta);
        const bool same = st.d_max == o.d_max && st.r_max == o.r_max && st.r_mean == o.r_mean &&
                          st.divergent == o.divergent && st.n == static_cast<int>(n);
        ck.expect(same, "divergence mismatch at cohort size " + std::to_string(n));
        divergent += o.divergent;
        ++cohorts;
      }
      if (n > 0) {
        const auto g = centrality(km);
        const auto og = oracle::centrality(k);
        bool same = g.size() == n;
        for (std::size_t i = 0; i < n && same; ++i) same = g.at(pid(i)) == og[i];
        ck.expect(same, "centrality mismatch at cohort size " + std::to_string(n));
      }
      std::size_t pos = 0;
      while (pos < n && ++idx[pos] == grid.size()) idx[pos++] = 0;
      if (pos == n) break;
    }
  }

  // step_score: exactly K' points per step, and the most central paths on
  // divergent steps.
  long points = 0;
  for (int s = 0; s < 1000; ++s) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(s) + 90000);
    const std::size_t n = 1 + rng() % 16;
    PruningConfig cfg;
    cfg.rho = std::uniform_real_distribution<double>(0, 0.95)(rng);
    std::vector<double> k(n);
    KappaMap km;
    for (std::size_t i = 0; i < n; ++i) {
      k[i] = std::round(std::normal_distribution<double>(0, 1)(rng) * 8) / 8;
      km.emplace(pid(i), k[i]);
    }
    CohortStats st = divergence_test(km, cfg, s);
    if (s % 2) st.divergent = !st.divergent;
    const int kp = cfg.k_prime(static_cast<int>(n));
    const auto awarded = step_score(st, kp, CounterRng(static_cast<std::uint64_t>(s)).split("step", s));
    const std::string tag = "step " + std::to_string(s);
    ck.expect(awarded.size() == static_cast<std::size_t>(std::min<int>(kp, static_cast<int>(n))),
              tag + " awarded " + std::to_string(awarded.size()) + " of K'=" + std::to_string(kp));
    for (const auto& p : awarded) ck.expect(km.count(p) == 1, tag + " awarded a path outside the cohort");
    points += static_cast<long>(awarded.size());
    if (st.divergent) {
      const auto og = oracle::centrality(k);
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return og[a] < og[b]; });
      std::set<PathId> expect;
      for (int i = 0; i < kp; ++i) expect.insert(pid(order[static_cast<std::size_t>(i)]));
      ck.expect(awarded == expect, tag + " did not award the most central paths");
    }
  }
  return ck.outcome(std::to_string(cohorts) + " cohort/config cases (" + std::to_string(divergent) +
                    " divergent) match enumeration; 1000 scored steps, " + std::to_string(points) + " points");
}

// ---------------------------------------------------------------------------

Outcome curvature_example() {
  Checker ck;
  const double delta = 1e-8;
  auto check = [&](const std::vector<Vec>& states, double want, const std::string& name, double* kappa_out) {
    const CurvatureSample c = curvature(states, delta);
    std::vector<std::vector<Real>> h;
    for (const auto& s : states) h.push_back(widen(s.span()));
    const auto o = oracle::curvature(h, delta);
    ck.expect(std::fabs(c.r_m - static_cast<double>(o.r_m)) <= 1e-12, name + " r_M vs oracle");
    ck.expect(std::fabs(c.r_a - static_cast<double>(o.r_a)) <= 1e-12, name + " r_A vs oracle");
    ck.expect(std::fabs(c.kappa - static_cast<double>(o.kappa)) <= 1e-12, name + " kappa vs oracle");
    ck.expect(std::fabs(c.kappa - want) <= 1e-12, name + " kappa " + fmt("%.17g", c.kappa));
    if (kappa_out) *kappa_out = c.kappa;
    return c;
  };
  double k_arc = 0;
  const auto arc = check({Vec{1, 0}, Vec{0, 1}, Vec{-1, 0}}, std::sqrt(2.0) - 1, "half turn", &k_arc);
  ck.expect(std::fabs(arc.r_m - std::sqrt(2.0)) <= 1e-12, "half turn r_M");
  ck.expect(std::fabs(arc.r_a - 1.0) <= 1e-12, "half turn r_A");
  double k_col = 0, k_stat = 0;
  check({Vec{1, 0}, Vec{2, 0}, Vec{3, 0}}, 1.0, "collinear", &k_col);
  check({Vec{0.5, -2}, Vec{0.5, -2}, Vec{0.5, -2}}, 0.0, "stationary", &k_stat);
  return ck.outcome("half turn kappa " + fmt("%.15f", k_arc) + ", collinear " + fmt("%g", k_col) + ", stationary " +
                    fmt("%g", k_stat));
}

// ---------------------------------------------------------------------------

struct Bench {
  SyntheticProvider provider;
  OrchestratorConfig cfg;
  ModelMap models;

  Bench(SyntheticScenario sc, int k)
      : provider(std::move(sc)),
        cfg(testing_support::config_for(provider, k)),
        models(testing_support::models_for(provider, cfg)) {}
};

// Stop step of each path from first principles: survivors decode their full
// planted length (capped by max_length), pruned paths stop at T_E.
long expected_tokens(const Bench& b, const OrchestratorConfig& cfg, const RunReport& r) {
  long sum = 0;
  for (const auto& p : r.paths) {
    if (p.status == PathStatus::pruned) sum += *r.monitoring.pruning_step;
    else sum += std::min(b.provider.path_length(p.id.language), cfg.max_length);
  }
  return sum;
}

Outcome token_accounting() {
  Checker ck;
  int runs = 0;
  {
    Bench b(testing_support::scenario(10), 10);
    b.cfg.pruning.t_warm = 1;
    b.cfg.pruning.score_deadline = 1;
    b.cfg.pruning.tau = 12;
    b.cfg.pruning.rho = 0.5;
    const RunReport r = run(b.provider, b.models, b.cfg);
    ++runs;
    ck.expect(r.monitoring.pruning_step == 14, "T_E != 14");
    ck.expect(r.monitoring.pruned == 5, "pruned != 5");
    ck.expect(r.totals.tokens == 1070, "tokens " + std::to_string(r.totals.tokens) + " != 1070");
    ck.expect(r.baseline && r.baseline->tokens == 2000, "baseline tokens != 2000");
    ck.expect(std::fabs(r.saved_fraction() - 0.465) <= 1e-12, "saving " + fmt("%.6f", r.saved_fraction()));
    ck.expect(r.totals.tokens == expected_tokens(b, b.cfg, r), "worked example token identity");
  }

  auto sc = testing_support::scenario(12);
  sc.num_drifting = 4;
  sc.sigma_w = 0.1;
  sc.lengths = {{LanguageId("de"), 9}, {LanguageId("ja"), 40}, {LanguageId("sw"), 150}};
  Bench b(sc, 12);
  for (int i = 0; i < 24; ++i) {
    auto cfg = b.cfg;
    cfg.query = "q" + std::to_string(i % 6);
    cfg.seed = static_cast<std::uint64_t>(i);
    cfg.pruning.rho = 0.1 * (i % 9);
    cfg.mode = i % 8 == 7 ? Mode::full_baseline : (i % 8 == 6 ? Mode::mono : Mode::ul_xcot);
    cfg.selection.k = 4 + i % 9;
    cfg.max_length = i % 3 == 0 ? 120 : 200;
    const RunReport r = run(b.provider, b.models, cfg);
    ++runs;
    long sum = 0;
    for (const auto& p : r.paths) sum += p.tokens;
    const std::string tag = "run " + std::to_string(i);
    ck.expect(r.totals.tokens == sum, tag + " totals != sum of path tokens");
    ck.expect(r.totals.tokens == expected_tokens(b, cfg, r), tag + " totals != sum of stop steps");
  }
  return ck.outcome(std::to_string(runs) +
                    " runs satisfy the identity; worked example 1070 vs 2000 tokens (46.5% saved)");
}

// ---------------------------------------------------------------------------

double calibrated_sigma_w() {
  std::ifstream in(std::string(ULX_FIXTURES) + "/drift_calibration.json");
  if (!in) throw std::runtime_error("missing drift_calibration.json fixture");
  const auto j = nlohmann::json::parse(in);
  return j.at("sigma_w").get<double>();
}

SyntheticScenario drift_scenario() {
  auto sc = testing_support::scenario(18, 7);
  sc.num_drifting = 6;
  sc.sigma_w = calibrated_sigma_w();
  sc.coherent_accuracy = 0.9;
  sc.drifting_accuracy = 0.2;
  return sc;
}

Outcome pruning_efficacy() {
  Checker ck;
  Bench b(drift_scenario(), 18);
  long tokens = 0, baseline = 0;
  int drifters = 0, pruned_drifters = 0, correct = 0, correct0 = 0;
  const int queries = 50;
  for (int q = 0; q < queries; ++q) {
    auto cfg = b.cfg;
    cfg.query = "q" + std::to_string(q);
    cfg.seed = static_cast<std::uint64_t>(q);
    cfg.pruning.rho = 0.6;
    cfg.compare_baseline = true;
    const RunReport r = run(b.provider, b.models, cfg);
    cfg.pruning.rho = 0.0;
    cfg.compare_baseline = false;
    const RunReport r0 = run(b.provider, b.models, cfg);
    tokens += r.totals.tokens;
    baseline += r.baseline->tokens;
    const auto drifting = b.provider.drifting_languages(cfg.query);
    for (const auto& p : r.paths) {
      if (!drifting.count(p.id.language)) continue;
      ++drifters;
      pruned_drifters += p.status == PathStatus::pruned;
    }
    correct += r.vote == r.reference_answer;
    correct0 += r0.vote == r0.reference_answer;
  }
  const double saving = 1.0 - static_cast<double>(tokens) / static_cast<double>(baseline);
  const double recall = drifters ? static_cast<double>(pruned_drifters) / drifters : 0.0;
  const double acc = static_cast<double>(correct) / queries, acc0 = static_cast<double>(correct0) / queries;
  ck.expect(saving >= 0.40, "saving below 40%");
  ck.expect(recall >= 0.8, "recall below 0.8");
  ck.expect(std::fabs(acc - acc0) <= 0.02 + 1e-12, "accuracy gap above 2 points");
  return ck.outcome("sigma_w " + fmt("%g", b.provider.scenario().sigma_w) + ", saving " + fmt("%.1f%%", 100 * saving) +
                    ", recall " + fmt("%.3f", recall) + " (" + std::to_string(pruned_drifters) + "/" +
                    std::to_string(drifters) + "), accuracy " + fmt("%.2f", acc) + " vs " + fmt("%.2f", acc0) +
                    " at rho=0");
}

// ---------------------------------------------------------------------------

Outcome rho_sweep() {
  Checker ck;
  Bench b(drift_scenario(), 18);
  const int queries = 20;
  std::vector<double> rhos;
  for (int i = 0; i <= 18; ++i) rhos.push_back(0.05 * i);
  std::vector<long> tokens(rhos.size(), 0);
  std::vector<double> latency(rhos.size(), 0.0);
  for (int q = 0; q < queries; ++q) {
    auto cfg = b.cfg;
    cfg.query = "q" + std::to_string(q);
    cfg.seed = static_cast<std::uint64_t>(q);
    cfg.compare_baseline = false;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
      cfg.pruning.rho = rhos[i];
      const RunReport r = run(b.provider, b.models, cfg);
      tokens[i] += r.totals.tokens;
      latency[i] += r.totals.latency;
      if (i == 0) {
        auto base_cfg = cfg;
        base_cfg.mode = Mode::full_baseline;
        const RunReport base = run(b.provider, b.models, base_cfg);
        const std::string tag = "query " + cfg.query;
        ck.expect(r.totals.tokens == base.totals.tokens, tag + " rho=0 tokens differ from baseline");
        ck.expect(r.totals.latency == base.totals.latency, tag + " rho=0 latency differs from baseline");
        ck.expect(r.vote == base.vote, tag + " rho=0 vote differs from baseline");
        bool same_paths = r.paths.size() == base.paths.size();
        for (std::size_t p = 0; same_paths && p < r.paths.size(); ++p)
          same_paths = r.paths[p].id == base.paths[p].id && r.paths[p].tokens == base.paths[p].tokens &&
                       r.paths[p].answer == base.paths[p].answer;
        ck.expect(same_paths, tag + " rho=0 paths differ from baseline");
      }
    }
  }
  for (std::size_t i = 1; i < rhos.size(); ++i) {
    ck.expect(tokens[i] <= tokens[i - 1], "tokens increase at rho " + fmt("%.2f", rhos[i]));
    ck.expect(latency[i] <= latency[i - 1], "latency increases at rho " + fmt("%.2f", rhos[i]));
  }
  return ck.outcome(std::to_string(rhos.size()) + " rho values x " + std::to_string(queries) + " queries, tokens " +
                    std::to_string(tokens.front()) + " -> " + std::to_string(tokens.back()) + ", latency " +
                    fmt("%.0f", latency.front()) + " -> " + fmt("%.0f", latency.back()) +
                    ", rho=0 equals baseline");
}

// ---------------------------------------------------------------------------

bool bit_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

double random_finite(std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0: {
      double x;
      do x = std::bit_cast<double>(rng());
      while (!std::isfinite(x));
      return x;
    }
    case 1: return std::bit_cast<double>(rng() % 4096);  // subnormals and zero
    case 2: return -0.0;
    default: return std::normal_distribution<double>(0, 1)(rng);
  }
}

Outcome determinism_and_replay() {
  Checker ck;
  auto sc = testing_support::scenario(10, 7);
  sc.num_drifting = 3;
  sc.sigma_w = calibrated_sigma_w();
  Bench b(sc, 6);
  const std::vector<std::string> queries{"q0", "q1", "q2"};

  // Live: repeats and worker counts.
  std::vector<std::string> live;
  for (const auto& q : queries) {
    auto cfg = b.cfg;
    cfg.query = q;
    cfg.seed = 11;
    const std::string first = report_to_json(run(b.provider, b.models, cfg));
    ck.expect(report_to_json(run(b.provider, b.models, cfg)) == first, q + " repeat differs");
    cfg.workers = 4;
    ck.expect(report_to_json(run(b.provider, b.models, cfg)) == first, q + " differs with 4 workers");
    live.push_back(first);
  }

  // Replay: record every path and the validation corpus, then refit and rerun.
  const auto dir = testing_support::temp_dir("acceptance_replay");
  std::set<int> needed{b.cfg.selection.analysis_layer};
  for (int m = b.cfg.pruning.layer_lo; m <= b.cfg.pruning.layer_hi; ++m) needed.insert(m);
  const std::vector<int> layers(needed.begin(), needed.end());
  RecordOptions opts;
  for (int m = b.cfg.pruning.layer_lo; m <= b.cfg.pruning.layer_hi; ++m) opts.step_layers.push_back(m);
  opts.prompt_layers = {b.cfg.selection.analysis_layer};
  std::vector<PathId> paths;
  for (const auto& l : b.provider.info().languages) paths.push_back(PathId{l, 0});
  for (const auto& q : queries) record_query(b.provider, q, paths, opts, dir / "traces");
  const auto info = b.provider.info();
  record_validation(b.provider.validation_set(layers), info.dim, info.layer_count, info.tokenizer, dir / "val");

  const TraceProvider replay(dir / "traces");
  const TraceProvider corpus(dir / "val");
  const ModelMap models = fit_models(corpus.validation_set(layers), layers, 4, 0.4);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto cfg = b.cfg;
    cfg.query = queries[i];
    cfg.seed = 11;
    ck.expect(report_to_json(run(replay, models, cfg)) == live[i], queries[i] + " replay differs from live");
  }

  // Trace round trip, bit for bit.
  int traces = 0;
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(s) + 777);
    TraceFile tf;
    tf.header.query = "q" + std::to_string(s);
    tf.header.path = PathId{LanguageId("sw"), s % 3};
    tf.header.dim = 1 + rng() % 16;
    tf.header.layer_count = 28;
    tf.header.layers = {9, 12, 18};
    tf.header.tokenizer = "synthetic";
    if (s % 2) tf.header.reference_answer = "\\frac{" + std::to_string(s) + "}{7}";
    auto fill = [&] {
      Vec v(tf.header.dim);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = random_finite(rng);
      return v;
    };
    tf.header.prompt_states.emplace(13, fill());
    const int steps = static_cast<int>(rng() % 12);
    for (int t = 0; t < steps; ++t) {
      TraceRecord r;
      r.step = t;
      r.token = static_cast<std::int64_t>(rng() >> 1) * (t % 2 ? -1 : 1);
      r.piece = t % 3 ? " x\t\"" : "\\boxed{";
      r.finished = t + 1 == steps;
      for (std::size_t m = 0; m < tf.header.layers.size(); ++m) r.states.push_back(fill());
      tf.records.push_back(r);
    }
    const std::string text = serialize_trace(tf);
    const TraceFile back = parse_trace(text);
    bool same = serialize_trace(back) == text && back.records.size() == tf.records.size() &&
                back.header.reference_answer == tf.header.reference_answer && back.header.path == tf.header.path &&
                bit_equal(back.header.prompt_states.at(13), tf.header.prompt_states.at(13));
    for (std::size_t t = 0; same && t < tf.records.size(); ++t) {
      const auto &x = tf.records[t], &y = back.records[t];
      same = x.token == y.token && x.piece == y.piece && x.finished == y.finished && x.step == y.step;
      for (std::size_t m = 0; same && m < x.states.size(); ++m) same = bit_equal(x.states[m], y.states[m]);
    }
    ck.expect(same, "trace " + std::to_string(s) + " round trip is not bit-exact");
    ++traces;
  }
  std::filesystem::remove_all(dir);
  return ck.outcome(std::to_string(queries.size()) + " queries identical across repeats, workers and replay; " +
                    std::to_string(traces) + " random traces round-trip bit-exact");
}

// ---------------------------------------------------------------------------

LanguageId code(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "l%02zu", i);
  return LanguageId(buf);
}

// Long double USS with the projector written out.
Real uss_oracle(const Mat& b, double lambda, const Vec& x, const Vec& y) {
  auto project = [&](const Vec& h) {
    std::vector<Real> out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      Real s = h[i];
      for (std::size_t j = 0; j < b.cols(); ++j) {
        Real bth = 0;
        for (std::size_t t = 0; t < h.size(); ++t) bth += Real(b(t, j)) * h[t];
        s -= Real(lambda) * b(i, j) * bth;
      }
      out[i] = s;
    }
    return out;
  };
  const auto px = project(x), py = project(y);
  const Real nx = oracle::norm(px), ny = oracle::norm(py);
  if (nx < 1e-12L || ny < 1e-12L) return 0;
  return oracle::dot(px, py) / (nx * ny);
}

Outcome selection_oracle() {
  Checker ck;
  long languages = 0;
  double worst_score = 0.0;
  for (int seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 31337);
    const std::size_t n = 1 + rng() % 32, d = 2 + rng() % 15;
    const std::size_t r = 1 + rng() % std::min<std::size_t>(d - 1, 5);
    const Mat b = random_basis(rng, d, r);
    const double lambda = std::uniform_real_distribution<double>(0, 1)(rng);
    const LogicSpaceModel model(13, {}, b, lambda);
    QueryRenditions q;
    q.source = code(rng() % n);
    for (std::size_t i = 0; i < n; ++i) q.states.emplace(code(i), Vec(testing_support::random_vector(rng, d)));
    // Exact ties: a few renditions are power-of-two multiples of another.
    const bool with_ties = seed % 4 == 0 && n > 2;
    if (with_ties)
      for (int t = 0; t < 3; ++t) {
        const auto a = code(rng() % n), c = code(rng() % n);
        if (a == q.source || c == q.source || a == c) continue;
        Vec v = q.states.at(a);
        for (std::size_t i = 0; i < d; ++i) v[i] *= 2.0;
        q.states.at(c) = v;
      }
    const int k = 1 + static_cast<int>(rng() % n);
    const CandidateSet cs = select_candidates(model, q, k);
    const std::vector<ScoredLanguage> full = score_languages(model, q);
    const std::string tag = "seed " + std::to_string(seed);
    ck.expect(full.size() == n, tag + " ranked size");
    languages += static_cast<long>(n);

    // Exhaustive sort: each language's position is the number of languages
    // that outrank it under (score desc, id asc).
    std::vector<ScoredLanguage> expect(n);
    for (const auto& s : full) {
      std::size_t pos = 0;
      for (const auto& o : full)
        if (o.score > s.score || (o.score == s.score && o.language < s.language)) ++pos;
      if (pos < n) expect[pos] = s;
    }
    ck.expect(expect == full, tag + " order differs from exhaustive sort");
    const std::vector<ScoredLanguage> top(expect.begin(), expect.begin() + k);
    ck.expect(cs.k == k && cs.ranked == top, tag + " selection is not the top k of the exhaustive sort");

    for (const auto& s : full) {
      const double o = static_cast<double>(uss_oracle(b, lambda, q.states.at(q.source), q.states.at(s.language)));
      worst_score = std::max(worst_score, std::fabs(o - s.score));
      ck.expect(std::fabs(o - s.score) <= 1e-12, tag + " score differs from oracle");
      if (s.language == q.source) ck.expect(s.score == 1.0, tag + " source does not score 1");
    }

    if (!with_ties) {
      // Positive rescaling of every rendition leaves the ranking unchanged.
      QueryRenditions scaled = q;
      for (auto& [l, v] : scaled.states) {
        const double f = std::pow(10.0, std::uniform_real_distribution<double>(-2, 2)(rng));
        for (std::size_t i = 0; i < v.size(); ++i) v[i] *= f;
      }
      const auto full2 = score_languages(model, scaled);
      bool same = full2.size() == full.size();
      for (std::size_t i = 0; same && i < n; ++i) same = full2[i].language == full[i].language;
      ck.expect(same, tag + " ranking changed under rescaling");
    }
  }
  return ck.outcome("1000 seeds, " + std::to_string(languages) + " languages ranked, max score gap to oracle " +
                    fmt("%.2g", worst_score) + ", ranking scale-invariant");
}

struct Criterion {
  const char* id;
  double limit_seconds;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1", 5, numerics_oracle},     {"AC2", 2, projection},          {"AC3", 5, planted_recovery},
      {"AC4", 10, divergence_oracles}, {"AC5", 1, curvature_example},   {"AC6", 2, token_accounting},
      {"AC7", 60, pruning_efficacy},   {"AC8", 60, rho_sweep},          {"AC9", 30, determinism_and_replay},
      {"AC10", 5, selection_oracle},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.limit_seconds) {
      out.pass = false;
      out.detail += "; runtime over " + fmt("%g", c.limit_seconds) + " s";
    }
    failed += !out.pass;
    std::printf("%s %s %s (%.2fs)\n", c.id, out.pass ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
