// SPDX-License-Identifier: Apache-2.0
#include "ulx/config.hpp"

#include <set>

#include <json.hpp>

#include "ulx/error.hpp"
#include "ulx/json_util.hpp"
#include "ulx/synthetic.hpp"
#include "ulx/trace.hpp"

namespace ulx {

namespace {

constexpr const char* kConfigSchema = "ulx-config/1";

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (!j.contains("schema") || j["schema"] != kConfigSchema)
    throw ConfigError(std::string("config: expected schema ") + kConfigSchema);

  static const std::set<std::string> known = {
      "schema",     "mode",         "query",      "source",         "languages",   "k",
      "pin_source", "analysis_layer", "rho",      "t_warm",         "tau",         "window_mode",
      "tau_factor", "eps_abs",      "eps_rel",    "gamma",          "delta",       "layer_lo",
      "layer_hi",   "score_deadline", "max_length", "replicas",     "latency_cost", "seed",
      "workers",    "compare_baseline", "lambda", "rank",           "backend",     "models",
      "validation", "queries",      "num_queries"};
  for (const auto& [key, v] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown field '" + key + "'");

  RunConfig c;
  OrchestratorConfig& o = c.run;
  PruningConfig& p = o.pruning;
  try {
    if (j.contains("mode")) o.mode = parse_mode(j["mode"].get<std::string>());
    read(j, "query", o.query);
    if (j.contains("source")) o.source = LanguageId(j["source"].get<std::string>());
    if (j.contains("languages"))
      for (const auto& l : j["languages"]) o.languages.emplace_back(l.get<std::string>());
    read(j, "k", o.selection.k);
    read(j, "pin_source", o.selection.pin_source);
    read(j, "analysis_layer", o.selection.analysis_layer);
    read(j, "rho", p.rho);
    read(j, "t_warm", p.t_warm);
    read(j, "tau", p.tau);
    if (j.contains("window_mode")) {
      const auto wm = j["window_mode"].get<std::string>();
      if (wm == "fixed") p.window_mode = WindowMode::fixed;
      else if (wm == "proportional") p.window_mode = WindowMode::proportional;
      else throw ConfigError("config: window_mode must be 'fixed' or 'proportional'");
    }
    read(j, "tau_factor", p.tau_factor);
    read(j, "eps_abs", p.eps_abs);
    read(j, "eps_rel", p.eps_rel);
    read(j, "gamma", p.gamma);
    read(j, "delta", p.delta);
    read(j, "layer_lo", p.layer_lo);
    read(j, "layer_hi", p.layer_hi);
    read(j, "score_deadline", p.score_deadline);
    read(j, "max_length", o.max_length);
    read(j, "replicas", o.replicas);
    read(j, "latency_cost", o.latency_cost);
    read(j, "seed", o.seed);
    read(j, "workers", o.workers);
    read(j, "compare_baseline", o.compare_baseline);
    read(j, "lambda", c.lambda);
    read(j, "rank", c.rank);
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      for (const auto& [key, v] : b.items())
        if (key != "kind" && key != "scenario" && key != "dir")
          throw ConfigError("config: unknown backend field '" + key + "'");
      const auto kind = b.at("kind").get<std::string>();
      if (kind == "synthetic") {
        c.backend.kind = BackendKind::synthetic;
        c.backend.path = resolve(base_dir, b.at("scenario").get<std::string>());
      } else if (kind == "trace") {
        c.backend.kind = BackendKind::trace;
        c.backend.path = resolve(base_dir, b.at("dir").get<std::string>());
      } else {
        throw ConfigError("config: backend kind must be 'synthetic' or 'trace'");
      }
    }
    if (j.contains("models"))
      for (const auto& [layer, file] : j["models"].items())
        c.models.emplace(std::stoi(layer), resolve(base_dir, file.get<std::string>()));
    if (j.contains("validation")) c.validation = resolve(base_dir, j["validation"].get<std::string>());
    read(j, "queries", c.queries);
    read(j, "num_queries", c.num_queries);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: model layers must be integers");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = json_util::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return from_json(text, path.parent_path());
}

void RunConfig::validate() const {
  if (rank < 1) throw ConfigError("rank must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (num_queries < 1) throw ConfigError("num_queries must be >= 1");
  if (backend.path.empty()) throw ConfigError("config: backend is required");
  if (run.workers < 1) throw ConfigError("workers must be >= 1");
  if (run.selection.k < 1) throw ConfigError("k must be >= 1");
  if (!(run.pruning.layer_lo == 0 && run.pruning.layer_hi == 0)) run.pruning.validate();
}

ModelMap fit_models(const ValidationSet& val, std::span<const int> layers, int rank, double lambda) {
  ModelMap out;
  for (int m : layers)
    if (!out.count(m)) out.emplace(m, LogicSpaceModel::fit(val, m, rank, lambda));
  return out;
}

OrchestratorConfig Session::for_query(const std::string& query) const {
  OrchestratorConfig c = base;
  c.query = query;
  return c;
}

Session open_session(const RunConfig& cfg) {
  cfg.validate();
  Session s;
  std::vector<std::string> recorded;
  if (cfg.backend.kind == BackendKind::synthetic) {
    s.provider = std::make_unique<SyntheticProvider>(SyntheticScenario::load(cfg.backend.path));
  } else {
    auto tp = std::make_unique<TraceProvider>(cfg.backend.path);
    recorded = tp->queries();
    s.provider = std::move(tp);
  }
  const ProviderInfo info = s.provider->info();

  s.base = cfg.run;
  if (s.base.pruning.layer_lo == 0 && s.base.pruning.layer_hi == 0) {
    const auto [lo, hi] = middle_third(info.layer_count);
    s.base.pruning.layer_lo = lo;
    s.base.pruning.layer_hi = hi;
  }

  if (!cfg.queries.empty()) {
    s.queries = cfg.queries;
  } else if (cfg.backend.kind == BackendKind::trace) {
    s.queries = recorded;
  } else {
    for (int i = 0; i < cfg.num_queries; ++i) s.queries.push_back("q" + std::to_string(i));
  }

  std::set<int> needed;
  if (s.base.mode == Mode::ul_xcot) needed.insert(s.base.selection.analysis_layer);
  if (s.base.mode != Mode::full_baseline)
    for (int m = s.base.pruning.layer_lo; m <= s.base.pruning.layer_hi; ++m) needed.insert(m);

  std::vector<int> to_fit;
  for (int m : needed) {
    if (s.models.count(m)) continue;
    const auto it = cfg.models.find(m);
    if (it != cfg.models.end()) {
      s.models.emplace(m, LogicSpaceModel::load(it->second));
    } else {
      to_fit.push_back(m);
    }
  }
  if (!to_fit.empty()) {
    ValidationSet val;
    if (cfg.validation) {
      val = TraceProvider(*cfg.validation).validation_set(to_fit);
    } else {
      val = s.provider->validation_set(to_fit);
    }
    for (auto& [m, model] : fit_models(val, to_fit, cfg.rank, cfg.lambda)) s.models.emplace(m, std::move(model));
  }
  return s;
}

}  // namespace ulx
