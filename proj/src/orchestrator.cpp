// SPDX-License-Identifier: Apache-2.0
#include "ulx/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <set>
#include <thread>

#include "ulx/error.hpp"
#include "ulx/kernels.hpp"

namespace ulx {

std::string_view mode_name(Mode m) noexcept {
  switch (m) {
    case Mode::ul_xcot: return "ul-xcot";
    case Mode::full_baseline: return "full-baseline";
    case Mode::mono: return "mono";
  }
  return "unknown";
}

Mode parse_mode(std::string_view s) {
  if (s == "ul-xcot") return Mode::ul_xcot;
  if (s == "full-baseline") return Mode::full_baseline;
  if (s == "mono") return Mode::mono;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

std::string_view status_name(PathStatus s) noexcept {
  switch (s) {
    case PathStatus::active: return "active";
    case PathStatus::finished: return "finished";
    case PathStatus::max_length: return "max_length";
    case PathStatus::end_of_stream: return "end_of_stream";
    case PathStatus::pruned: return "pruned";
    case PathStatus::errored: return "errored";
  }
  return "unknown";
}

double RunReport::saved_fraction() const {
  if (!baseline || baseline->tokens <= 0) return 0.0;
  return 1.0 - static_cast<double>(totals.tokens) / static_cast<double>(baseline->tokens);
}

std::optional<std::string> extract_answer(std::string_view text) {
  static constexpr std::string_view kMarker = "\\boxed{";
  const auto start = text.rfind(kMarker);
  if (start == std::string_view::npos) return std::nullopt;
  const std::size_t body = start + kMarker.size();
  int depth = 1;
  for (std::size_t i = body; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}') {
      if (--depth == 0) return std::string(text.substr(body, i - body));
    }
  }
  return std::nullopt;
}

std::optional<std::string> vote(const std::vector<std::pair<std::string, int>>& answers) {
  if (answers.empty()) return std::nullopt;
  std::map<std::string, std::pair<int, long>> tally;  // answer -> (count, summed LQS)
  for (const auto& [a, lqs] : answers) {
    auto& t = tally[a];
    ++t.first;
    t.second += lqs;
  }
  // std::map iterates in ascending answer order, so strict comparisons keep
  // the lexicographically smallest answer among full ties.
  auto best = tally.begin();
  for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
    if (it->second.first > best->second.first ||
        (it->second.first == best->second.first && it->second.second > best->second.second))
      best = it;
  }
  return best->first;
}

double simulate_latency(const RunReport& report, double cost_per_token) {
  int horizon = 0;
  for (const auto& p : report.paths) horizon = std::max(horizon, p.tokens);
  const int release = report.monitoring.release_step.value_or(horizon);
  double lockstep = 0.0;
  for (int t = 0; t < release; ++t) {
    int active = 0;
    for (const auto& p : report.paths)
      if (p.tokens > t) ++active;
    lockstep += active;
  }
  int tail = 0;
  for (const auto& p : report.paths)
    if (p.survivor) tail = std::max(tail, p.tokens - release);
  return cost_per_token * (lockstep + static_cast<double>(std::max(tail, 0)));
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// handled by exactly one thread; callers make fn touch only item i.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      for (std::size_t i = k; i < n; i += w) fn(i);
    });
  }
}

struct Path {
  TrajectoryState state;
  std::unique_ptr<PathStream> stream;
};

class Execution {
 public:
  Execution(const Provider& provider, const ModelMap& models, const OrchestratorConfig& cfg, bool pruning)
      : provider_(provider), cfg_(cfg), pruning_(pruning), dim_(provider.info().dim) {
    for (int m = cfg.pruning.layer_lo; m <= cfg.pruning.layer_hi; ++m) layers_.push_back(m);
    if (pruning_) {
      for (int m : layers_) {
        const auto it = models.find(m);
        if (it == models.end()) throw ConfigError("no logic-space model for monitored layer " + std::to_string(m));
        if (it->second.dim() != dim_) throw DimensionError("model for layer " + std::to_string(m) + " has wrong dimension");
        layer_models_.push_back(&it->second);
      }
    }
  }

  void execute(const std::vector<PathId>& ids, RunReport& report) {
    paths_.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Path& p = paths_[i];
      p.state.id = ids[i];
      if (pruning_) p.state.projected_sums.assign(layers_.size(), Vec(dim_));
      try {
        p.stream = provider_.open(cfg_.query, ids[i], pruning_ ? std::span<const int>(layers_) : std::span<const int>());
      } catch (const Error& e) {
        p.state.status = PathStatus::errored;
        p.state.error = e.what();
      }
    }

    lockstep_phase(report);
    free_phase();

    int errored = 0;
    for (auto& p : paths_) {
      if (p.state.status == PathStatus::errored) ++errored;
      if (p.state.survivor() && p.stream) p.state.answer = extract_answer(p.stream->decode_text());
    }
    if (errored == static_cast<int>(paths_.size())) {
      std::string msg = "all paths errored";
      if (!paths_.empty()) msg += ": " + paths_.front().state.id.str() + ": " + paths_.front().state.error;
      throw RunError(msg);
    }

    std::vector<std::pair<std::string, int>> answers;
    for (const auto& p : paths_) {
      const TrajectoryState& s = p.state;
      report.paths.push_back(PathReport{s.id, s.steps(), s.status, s.answer, s.lqs, s.survivor(), s.error});
      report.totals.tokens += s.steps();
      if (s.survivor() && s.answer) answers.emplace_back(*s.answer, s.lqs);
    }
    report.vote = vote(answers);
    report.totals.latency = simulate_latency(report, cfg_.latency_cost);
  }

 private:
  bool any_active() const {
    return std::any_of(paths_.begin(), paths_.end(),
                       [](const Path& p) { return p.state.status == PathStatus::active; });
  }

  // Advances one path by a single token. Touches only `p`.
  void advance(Path& p, bool monitor) {
    TrajectoryState& s = p.state;
    const int t = s.steps();
    std::optional<StepOutput> out;
    try {
      out = p.stream->step();
      if (out && monitor) check_step_output(*out, dim_, layers_, s.id, t);
    } catch (const std::exception& e) {
      s.status = PathStatus::errored;
      s.error = e.what();
      return;
    }
    if (!out) {
      s.status = PathStatus::end_of_stream;
      return;
    }
    s.tokens.push_back(out->token);
    if (monitor) {
      for (std::size_t i = 0; i < layers_.size(); ++i)
        layer_models_[i]->project_accumulate(out->states.at(layers_[i]).span(), s.projected_sums[i].span());
    }
    if (out->finished) s.status = PathStatus::finished;
    else if (s.steps() >= cfg_.max_length) s.status = PathStatus::max_length;
  }

  std::vector<Vec> averaged_states(const TrajectoryState& s) const {
    std::vector<Vec> out;
    out.reserve(layers_.size());
    const double inv = 1.0 / static_cast<double>(s.steps());
    for (const Vec& sum : s.projected_sums) {
      Vec h = sum;
      kernels::scale(inv, h.span());
      out.push_back(std::move(h));
    }
    return out;
  }

  void lockstep_phase(RunReport& report) {
    const PruningConfig& pc = cfg_.pruning;
    MonitoringSummary& mon = report.monitoring;
    const CounterRng score_rng = CounterRng(cfg_.seed).split("step-score");
    bool monitoring_done = !pruning_;

    for (int t = 0; any_active(); ++t) {
      std::vector<Path*> live;
      for (auto& p : paths_)
        if (p.state.status == PathStatus::active) live.push_back(&p);
      const bool monitor = !monitoring_done;
      parallel_for(live.size(), cfg_.workers, [&](std::size_t i) { advance(*live[i], monitor); });
      if (monitoring_done || t < pc.t_warm) continue;

      // Cohort barrier: every still-active path has completed step t.
      std::vector<Path*> cohort;
      for (Path* p : live)
        if (p->state.status == PathStatus::active) cohort.push_back(p);
      std::vector<CurvatureSample> samples(cohort.size());
      parallel_for(cohort.size(), cfg_.workers, [&](std::size_t i) {
        const auto states = averaged_states(cohort[i]->state);
        samples[i] = curvature(states, pc.delta, t);
      });
      KappaMap kappas;
      for (std::size_t i = 0; i < cohort.size(); ++i) {
        cohort[i]->state.curvature.push_back(samples[i]);
        kappas.emplace(cohort[i]->state.id, samples[i].kappa);
      }

      CohortStats stats = divergence_test(kappas, pc, t);
      if (stats.divergent && !mon.first_divergence) mon.first_divergence = t;
      if (!mon.window_start && (stats.divergent || t >= pc.deadline())) {
        mon.window_start = t;
        mon.window_length = pc.window_length(t);
      }
      stats.c = mon.window_start;
      if (mon.window_start && t >= *mon.window_start) {
        const int kp = pc.k_prime(static_cast<int>(cohort.size()));
        step_score(stats, kp, score_rng.split("step", static_cast<std::uint64_t>(t)));
        for (Path* p : cohort) {
          if (stats.awarded.count(p->state.id)) ++p->state.lqs;
          p->state.window_g_sum += stats.g.at(p->state.id);
          ++p->state.window_g_count;
        }
      }
      report.cohort_log.push_back(stats);

      if (mon.window_start && t == *mon.window_start + mon.window_length) {
        prune(cohort, t + 1, mon);
        monitoring_done = true;
        for (auto& p : paths_)
          if (p.state.status == PathStatus::active) p.stream->drop_states();
        if (mon.release_step) return;
      }
    }
  }

  void prune(const std::vector<Path*>& cohort, int t_end, MonitoringSummary& mon) {
    std::map<PathId, int> lqs;
    std::map<PathId, double> mean_g;
    for (Path* p : cohort) {
      lqs.emplace(p->state.id, p->state.lqs);
      mean_g.emplace(p->state.id, p->state.window_g_count ? p->state.window_g_sum / p->state.window_g_count : 0.0);
    }
    const auto keep = finalize_pruning(lqs, cfg_.pruning.rho, mean_g);
    mon.pruning_step = t_end;
    mon.cohort_at_pruning = static_cast<int>(cohort.size());
    mon.k_prime = cfg_.pruning.k_prime(static_cast<int>(cohort.size()));
    for (Path* p : cohort) {
      if (!keep.count(p->state.id)) {
        p->state.status = PathStatus::pruned;
        ++mon.pruned;
      }
    }
    if (mon.pruned > 0) mon.release_step = t_end;
  }

  // Survivors decode independently to completion.
  void free_phase() {
    std::vector<Path*> live;
    for (auto& p : paths_)
      if (p.state.status == PathStatus::active) live.push_back(&p);
    parallel_for(live.size(), cfg_.workers, [&](std::size_t i) {
      while (live[i]->state.status == PathStatus::active) advance(*live[i], false);
    });
  }

  const Provider& provider_;
  const OrchestratorConfig& cfg_;
  bool pruning_;
  std::size_t dim_;
  std::vector<int> layers_;
  std::vector<const LogicSpaceModel*> layer_models_;
  std::vector<Path> paths_;
};

void validate(const OrchestratorConfig& cfg) {
  if (cfg.max_length < 1) throw ConfigError("max_length must be >= 1");
  if (cfg.selection.k < 1) throw ConfigError("k must be >= 1");
  if (cfg.replicas < 0) throw ConfigError("replicas must be >= 0");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (!(cfg.latency_cost > 0.0)) throw ConfigError("latency_cost must be > 0");
  if (cfg.query.empty()) throw ConfigError("query id must be nonempty");
  cfg.pruning.validate();
}

RunReport execute_mode(const Provider& provider, const ModelMap& models, const OrchestratorConfig& cfg) {
  const ProviderInfo info = provider.info();
  std::vector<LanguageId> languages = cfg.languages.empty() ? info.languages : cfg.languages;
  std::sort(languages.begin(), languages.end());
  if (std::adjacent_find(languages.begin(), languages.end()) != languages.end())
    throw ConfigError("duplicate language in language set");
  if (!std::binary_search(languages.begin(), languages.end(), cfg.source))
    throw ConfigError("source language " + cfg.source.code + " is not in the language set");
  if (cfg.pruning.layer_hi >= info.layer_count || cfg.pruning.layer_lo < 0)
    throw ConfigError("monitored layers outside the backend's layer range");

  RunReport report;
  report.query_id = cfg.query;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  report.source = cfg.source;
  report.k = cfg.selection.k;
  report.reference_answer = provider.reference_answer(cfg.query);
  report.config_json = config_to_json(cfg);

  std::vector<PathId> paths;
  switch (cfg.mode) {
    case Mode::ul_xcot: {
      const auto it = models.find(cfg.selection.analysis_layer);
      if (it == models.end())
        throw ConfigError("no logic-space model for analysis layer " + std::to_string(cfg.selection.analysis_layer));
      QueryRenditions q{cfg.source, {}};
      for (const auto& lang : languages)
        q.states.emplace(lang, provider.rendition_state(cfg.query, lang, cfg.selection.analysis_layer));
      report.scores = score_languages(it->second, q);
      const CandidateSet set = select_candidates(it->second, q, cfg.selection.k, cfg.selection.pin_source);
      for (const auto& s : set.ranked) report.selected.push_back(s.language);
      break;
    }
    case Mode::full_baseline:
      report.selected = languages;
      break;
    case Mode::mono:
      report.selected = {cfg.source};
      break;
  }
  if (cfg.mode == Mode::mono) {
    const int n = cfg.replicas > 0 ? cfg.replicas : cfg.selection.k;
    for (int r = 0; r < n; ++r) paths.push_back(PathId{cfg.source, r});
  } else {
    std::vector<LanguageId> sorted = report.selected;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& l : sorted) paths.push_back(PathId{l, 0});
  }

  Execution exec(provider, models, cfg, cfg.mode != Mode::full_baseline);
  exec.execute(paths, report);
  return report;
}

}  // namespace

RunReport run(const Provider& provider, const ModelMap& models, const OrchestratorConfig& requested) {
  OrchestratorConfig cfg = requested;
  if (cfg.pruning.layer_lo == 0 && cfg.pruning.layer_hi == 0) {
    const auto [lo, hi] = middle_third(provider.info().layer_count);
    cfg.pruning.layer_lo = lo;
    cfg.pruning.layer_hi = hi;
  }
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report = execute_mode(provider, models, cfg);
  if (cfg.mode == Mode::full_baseline) {
    report.baseline = report.totals;
  } else if (cfg.compare_baseline) {
    OrchestratorConfig base = cfg;
    base.compare_baseline = false;
    if (cfg.mode == Mode::ul_xcot) {
      base.mode = Mode::full_baseline;
    } else {
      base.pruning.rho = 0.0;
    }
    const RunReport b = execute_mode(provider, models, base);
    report.baseline = b.totals;
  }
  if (cfg.record_wall_clock) {
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return report;
}

}  // namespace ulx
