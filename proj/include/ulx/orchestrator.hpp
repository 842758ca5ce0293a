// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end pipeline for one query:
//
//   1. candidate selection in the logic space (top-k by USS);
//   2. lockstep decoding of the selected paths; after warm-up every step
//      computes curvature descriptors and the cohort divergence test;
//   3. points are awarded over the scoring window [c, c + tau] and, at
//      T_E = c + tau + 1 tokens, all but the top k' paths by LQS are pruned;
//   4. survivors decode to completion on their own, their boxed answers are
//      extracted and combined by plurality vote.
//
// The same machinery runs the full-enumeration baseline (every language, no
// pruning) and a mono mode (replicas of the source language).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ulx/backend.hpp"
#include "ulx/pruning.hpp"
#include "ulx/selection.hpp"

namespace ulx {

enum class Mode { ul_xcot, full_baseline, mono };

std::string_view mode_name(Mode m) noexcept;
Mode parse_mode(std::string_view s);

struct OrchestratorConfig {
  Mode mode = Mode::ul_xcot;
  std::string query = "q0";
  LanguageId source{"en"};
  std::vector<LanguageId> languages;  // empty: every provider language
  SelectionConfig selection;
  PruningConfig pruning;
  int max_length = 200;
  int replicas = 0;  // mono mode; 0 means selection.k
  double latency_cost = 1.0;
  std::uint64_t seed = 0;
  int workers = 1;
  bool compare_baseline = true;
  bool record_wall_clock = false;
};

using ModelMap = std::map<int, LogicSpaceModel>;

enum class PathStatus { active, finished, max_length, end_of_stream, pruned, errored };

std::string_view status_name(PathStatus s) noexcept;

// Live state of one decoding path.
struct TrajectoryState {
  PathId id;
  std::vector<std::int64_t> tokens;
  // Running sums of projected token states, one per monitored layer.
  std::vector<Vec> projected_sums;
  std::vector<CurvatureSample> curvature;
  int lqs = 0;
  double window_g_sum = 0.0;
  int window_g_count = 0;
  PathStatus status = PathStatus::active;
  std::optional<std::string> answer;
  std::string error;

  int steps() const noexcept { return static_cast<int>(tokens.size()); }
  bool survivor() const noexcept {
    return status != PathStatus::pruned && status != PathStatus::errored && status != PathStatus::active;
  }
};

struct PathReport {
  PathId id;
  int tokens = 0;
  PathStatus status = PathStatus::finished;
  std::optional<std::string> answer;
  int lqs = 0;
  bool survivor = false;
  std::string error;

  bool operator==(const PathReport&) const = default;
};

struct MonitoringSummary {
  std::optional<int> first_divergence;  // first divergent step >= t_warm
  std::optional<int> window_start;      // c (divergence or deadline)
  int window_length = 0;                // tau
  std::optional<int> pruning_step;      // T_E, in tokens
  int cohort_at_pruning = 0;
  int k_prime = 0;
  int pruned = 0;
  std::optional<int> release_step;  // lockstep barrier lifted (only if something was pruned)
};

struct CostTotals {
  long tokens = 0;
  double latency = 0.0;
};

struct RunReport {
  std::string query_id;
  Mode mode = Mode::ul_xcot;
  std::uint64_t seed = 0;
  LanguageId source;
  int k = 0;
  std::vector<ScoredLanguage> scores;  // every language, ranked
  std::vector<LanguageId> selected;
  std::vector<PathReport> paths;
  std::vector<CohortStats> cohort_log;
  MonitoringSummary monitoring;
  std::optional<std::string> vote;
  std::optional<std::string> reference_answer;
  CostTotals totals;
  std::optional<CostTotals> baseline;
  std::optional<double> wall_clock_seconds;
  std::string config_json;  // effective configuration echo

  double saved_fraction() const;
};

RunReport run(const Provider& provider, const ModelMap& models, const OrchestratorConfig& cfg);

// Plurality vote over (answer, LQS of the path that produced it). Ties go to
// the larger summed LQS, then to the lexicographically smallest answer.
// Returns nullopt (abstain) on empty input.
std::optional<std::string> vote(const std::vector<std::pair<std::string, int>>& answers);

// Contents of the last \boxed{...} marker with balanced braces; nullopt if
// there is none or it is unbalanced.
std::optional<std::string> extract_answer(std::string_view text);

// Cost model in units of one token-step of one path (scaled by cost):
// while the cohort is in lockstep, each step costs the number of active
// paths; after the barrier is released, survivors run concurrently and cost
// the longest remaining tail.
double simulate_latency(const RunReport& report, double cost_per_token = 1.0);

// Serialization ("ulx-report/1"). Output is a pure function of the report.
std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

std::string config_to_json(const OrchestratorConfig& cfg);

}  // namespace ulx
