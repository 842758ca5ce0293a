// SPDX-License-Identifier: Apache-2.0
#include <json.hpp>

#include "ulx/error.hpp"
#include "ulx/orchestrator.hpp"

namespace ulx {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kReportSchema = "ulx-report/1";

template <class T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <class T>
std::optional<T> optional_from(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

PathStatus parse_status(const std::string& s) {
  for (PathStatus p : {PathStatus::active, PathStatus::finished, PathStatus::max_length, PathStatus::end_of_stream,
                       PathStatus::pruned, PathStatus::errored})
    if (status_name(p) == s) return p;
  throw ParseError("unknown path status '" + s + "'");
}

ojson path_map(const std::map<PathId, double>& m) {
  ojson out = ojson::object();
  for (const auto& [p, v] : m) out[p.str()] = v;
  return out;
}

std::map<PathId, double> path_map_from(const ojson& j) {
  std::map<PathId, double> out;
  for (const auto& [k, v] : j.items()) out.emplace(PathId::parse(k), v.get<double>());
  return out;
}

ojson cost_json(const CostTotals& c) { return ojson{{"tokens", c.tokens}, {"latency", c.latency}}; }

CostTotals cost_from(const ojson& j) { return CostTotals{j.at("tokens").get<long>(), j.at("latency").get<double>()}; }

ojson language_list(const std::vector<LanguageId>& langs) {
  ojson out = ojson::array();
  for (const auto& l : langs) out.push_back(l.code);
  return out;
}

std::vector<LanguageId> language_list_from(const ojson& j) {
  std::vector<LanguageId> out;
  for (const auto& v : j) out.emplace_back(v.get<std::string>());
  return out;
}

}  // namespace

std::string config_to_json(const OrchestratorConfig& cfg) {
  const PruningConfig& p = cfg.pruning;
  ojson j;
  j["mode"] = std::string(mode_name(cfg.mode));
  j["query"] = cfg.query;
  j["source"] = cfg.source.code;
  j["languages"] = language_list(cfg.languages);
  j["k"] = cfg.selection.k;
  j["analysis_layer"] = cfg.selection.analysis_layer;
  j["pin_source"] = cfg.selection.pin_source;
  j["t_warm"] = p.t_warm;
  j["tau"] = p.tau;
  j["window_mode"] = p.window_mode == WindowMode::fixed ? "fixed" : "proportional";
  j["tau_factor"] = p.tau_factor;
  j["rho"] = p.rho;
  j["eps_abs"] = p.eps_abs;
  j["eps_rel"] = p.eps_rel;
  j["gamma"] = p.gamma;
  j["delta"] = p.delta;
  j["layer_lo"] = p.layer_lo;
  j["layer_hi"] = p.layer_hi;
  j["score_deadline"] = p.deadline();
  j["max_length"] = cfg.max_length;
  j["replicas"] = cfg.replicas;
  j["latency_cost"] = cfg.latency_cost;
  j["seed"] = cfg.seed;
  return j.dump();
}

std::string report_to_json(const RunReport& r) {
  ojson j;
  j["schema"] = kReportSchema;
  j["query"] = r.query_id;
  j["mode"] = std::string(mode_name(r.mode));
  j["seed"] = r.seed;
  j["source"] = r.source.code;
  j["k"] = r.k;

  ojson scores = ojson::array();
  for (const auto& s : r.scores) scores.push_back(ojson{{"language", s.language.code}, {"uss", s.score}});
  j["scores"] = std::move(scores);
  j["selected"] = language_list(r.selected);

  ojson paths = ojson::array();
  for (const auto& p : r.paths) {
    paths.push_back(ojson{{"path", p.id.str()},
                          {"tokens", p.tokens},
                          {"status", std::string(status_name(p.status))},
                          {"answer", optional_json(p.answer)},
                          {"lqs", p.lqs},
                          {"survivor", p.survivor},
                          {"error", p.error}});
  }
  j["paths"] = std::move(paths);

  const MonitoringSummary& m = r.monitoring;
  j["monitoring"] = ojson{{"first_divergence", optional_json(m.first_divergence)},
                          {"window_start", optional_json(m.window_start)},
                          {"window_length", m.window_length},
                          {"pruning_step", optional_json(m.pruning_step)},
                          {"cohort_at_pruning", m.cohort_at_pruning},
                          {"k_prime", m.k_prime},
                          {"pruned", m.pruned},
                          {"release_step", optional_json(m.release_step)}};

  ojson log = ojson::array();
  for (const auto& c : r.cohort_log) {
    ojson awarded = ojson::array();
    for (const auto& p : c.awarded) awarded.push_back(p.str());
    log.push_back(ojson{{"step", c.step},
                        {"n", c.n},
                        {"kappa", path_map(c.kappas)},
                        {"d_max", c.d_max},
                        {"r_max", c.r_max},
                        {"r_mean", c.r_mean},
                        {"divergent", c.divergent},
                        {"c", optional_json(c.c)},
                        {"g", path_map(c.g)},
                        {"awarded", std::move(awarded)}});
  }
  j["cohort_log"] = std::move(log);

  j["vote"] = optional_json(r.vote);
  j["reference_answer"] = optional_json(r.reference_answer);
  j["correct"] = r.vote && r.reference_answer ? ojson(*r.vote == *r.reference_answer) : ojson(nullptr);
  j["totals"] = cost_json(r.totals);
  j["baseline"] = r.baseline ? cost_json(*r.baseline) : ojson(nullptr);
  j["saved_fraction"] = r.saved_fraction();
  j["wall_clock_seconds"] = optional_json(r.wall_clock_seconds);
  j["config"] = r.config_json.empty() ? ojson(nullptr) : ojson::parse(r.config_json);
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kReportSchema)
    throw ParseError(std::string("report: expected schema ") + kReportSchema);
  try {
    RunReport r;
    r.query_id = j.at("query").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.source = LanguageId(j.at("source").get<std::string>());
    r.k = j.at("k").get<int>();
    for (const auto& s : j.at("scores"))
      r.scores.push_back(ScoredLanguage{LanguageId(s.at("language").get<std::string>()), s.at("uss").get<double>()});
    r.selected = language_list_from(j.at("selected"));
    for (const auto& p : j.at("paths")) {
      r.paths.push_back(PathReport{PathId::parse(p.at("path").get<std::string>()), p.at("tokens").get<int>(),
                                   parse_status(p.at("status").get<std::string>()),
                                   optional_from<std::string>(p.at("answer")), p.at("lqs").get<int>(),
                                   p.at("survivor").get<bool>(), p.at("error").get<std::string>()});
    }
    const ojson& m = j.at("monitoring");
    r.monitoring.first_divergence = optional_from<int>(m.at("first_divergence"));
    r.monitoring.window_start = optional_from<int>(m.at("window_start"));
    r.monitoring.window_length = m.at("window_length").get<int>();
    r.monitoring.pruning_step = optional_from<int>(m.at("pruning_step"));
    r.monitoring.cohort_at_pruning = m.at("cohort_at_pruning").get<int>();
    r.monitoring.k_prime = m.at("k_prime").get<int>();
    r.monitoring.pruned = m.at("pruned").get<int>();
    r.monitoring.release_step = optional_from<int>(m.at("release_step"));
    for (const auto& c : j.at("cohort_log")) {
      CohortStats s;
      s.step = c.at("step").get<int>();
      s.n = c.at("n").get<int>();
      s.kappas = path_map_from(c.at("kappa"));
      s.d_max = c.at("d_max").get<double>();
      s.r_max = c.at("r_max").get<double>();
      s.r_mean = c.at("r_mean").get<double>();
      s.divergent = c.at("divergent").get<bool>();
      s.c = optional_from<int>(c.at("c"));
      s.g = path_map_from(c.at("g"));
      for (const auto& a : c.at("awarded")) s.awarded.insert(PathId::parse(a.get<std::string>()));
      r.cohort_log.push_back(std::move(s));
    }
    r.vote = optional_from<std::string>(j.at("vote"));
    r.reference_answer = optional_from<std::string>(j.at("reference_answer"));
    r.totals = cost_from(j.at("totals"));
    if (!j.at("baseline").is_null()) r.baseline = cost_from(j["baseline"]);
    r.wall_clock_seconds = optional_from<double>(j.at("wall_clock_seconds"));
    if (!j.at("config").is_null()) r.config_json = j["config"].dump();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

}  // namespace ulx
