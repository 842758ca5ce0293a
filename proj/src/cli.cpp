// SPDX-License-Identifier: Apache-2.0
#include "ulx/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "ulx/error.hpp"
#include "ulx/json_util.hpp"
#include "ulx/trace.hpp"

namespace ulx::cli {

namespace {

double round12(double x) { return std::round(x * 1e12) / 1e12; }

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_languages(const std::vector<LanguageId>& langs) {
  std::string out;
  for (const auto& l : langs) {
    if (!out.empty()) out += ' ';
    out += l.code;
  }
  return out;
}

// Flag overrides shared by run, sweep and record.
struct Overrides {
  std::string config;
  std::optional<std::string> mode, query, backend_scenario, backend_dir;
  std::optional<double> rho, lambda;
  std::optional<int> k, t_warm, tau, rank, workers, max_length, num_queries;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd, bool with_rho = true) {
    cmd->add_option("--config", config, "run configuration (ulx-config/1)")->required();
    cmd->add_option("--mode", mode, "ul-xcot | full-baseline | mono");
    cmd->add_option("--query", query, "query id");
    cmd->add_option("--seed", seed);
    if (with_rho) cmd->add_option("--rho", rho);
    cmd->add_option("--k", k);
    cmd->add_option("--t-warm", t_warm);
    cmd->add_option("--tau", tau);
    cmd->add_option("--lambda", lambda);
    cmd->add_option("--rank", rank);
    cmd->add_option("--workers", workers);
    cmd->add_option("--max-length", max_length);
    cmd->add_option("--num-queries", num_queries);
  }

  RunConfig load() const {
    RunConfig c = RunConfig::load(config);
    if (mode) c.run.mode = parse_mode(*mode);
    if (query) c.queries = {*query};
    if (seed) c.run.seed = *seed;
    if (rho) c.run.pruning.rho = *rho;
    if (k) c.run.selection.k = *k;
    if (t_warm) c.run.pruning.t_warm = *t_warm;
    if (tau) c.run.pruning.tau = *tau;
    if (lambda) c.lambda = *lambda;
    if (rank) c.rank = *rank;
    if (workers) c.run.workers = *workers;
    if (max_length) c.run.max_length = *max_length;
    if (num_queries) c.num_queries = *num_queries;
    return c;
  }
};

int cmd_fit(const std::string& val_dir, int layer, int rank, double lambda, const std::string& out_file,
            std::ostream& out) {
  if (rank < 1) throw ConfigError("--rank must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("--lambda must lie in [0, 1]");
  TraceProvider corpus(val_dir);
  const int layers[] = {layer};
  const ValidationSet val = corpus.validation_set(layers);
  const LogicSpaceModel model = LogicSpaceModel::fit(val, layer, rank, lambda);
  model.save(out_file);

  out << "layer " << layer << ", rank " << rank << ", lambda " << json_util::format_double(lambda) << "\n";
  for (const auto& [lang, mu] : model.centers())
    out << "  center " << lang.code << " norm " << fixed(norm(mu), 6) << "\n";
  out << "  singular values";
  for (double s : model.singular_values()) out << ' ' << fixed(s, 6);
  out << "\n";
  const double before = center_dispersion(model.centers());
  const double after = center_dispersion(project_centers(model, model.centers()));
  out << "  dispersion ratio " << fixed(before > 0.0 ? after / before : 0.0, 6) << "\n";
  return 0;
}

int cmd_run(const Overrides& ov, const std::string& report_file, const std::string& record_dir,
            std::ostream& out) {
  const RunConfig rc = ov.load();
  const Session s = open_session(rc);
  if (s.queries.empty()) throw RunError("no queries to run");
  const RunReport r = run(*s.provider, s.models, s.for_query(s.queries.front()));
  json_util::write_file(report_file, report_to_json(r));
  if (!record_dir.empty()) {
    RecordOptions opts;
    for (int m = s.base.pruning.layer_lo; m <= s.base.pruning.layer_hi; ++m) opts.step_layers.push_back(m);
    opts.prompt_layers = opts.step_layers;
    if (!std::count(opts.prompt_layers.begin(), opts.prompt_layers.end(), s.base.selection.analysis_layer))
      opts.prompt_layers.push_back(s.base.selection.analysis_layer);
    std::vector<PathId> paths;
    for (const auto& p : r.paths) paths.push_back(p.id);
    record_query(*s.provider, r.query_id, paths, opts, record_dir);
  }
  out << summary_line(r) << "\n";
  return 0;
}

int cmd_sweep(const Overrides& ov, const std::string& range, const std::string& out_file, std::ostream& out) {
  const auto rhos = parse_rho_range(range);
  const RunConfig rc = ov.load();
  const Session s = open_session(rc);
  const auto rows = sweep(s, rhos, s.base.workers);
  json_util::write_file(out_file, sweep_csv(rows));
  out << "swept " << rows.size() << " rho values over " << s.queries.size() << " queries\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& files, const std::string& out_file, const std::string& per_path,
               std::ostream& out) {
  std::vector<RunReport> reports;
  for (const auto& f : files) {
    try {
      reports.push_back(report_from_json(json_util::read_file(f)));
    } catch (const Error& e) {
      throw ParseError(f + ": " + e.what());
    }
  }
  json_util::write_file(out_file, reports_csv(reports));
  if (!per_path.empty()) json_util::write_file(per_path, paths_csv(reports));

  std::map<Mode, std::pair<long, long>> by_mode;  // tokens, baseline tokens
  for (const auto& r : reports) {
    auto& acc = by_mode[r.mode];
    acc.first += r.totals.tokens;
    acc.second += r.baseline ? r.baseline->tokens : r.totals.tokens;
  }
  for (const auto& [mode, acc] : by_mode) {
    const double saved = acc.second > 0 ? 100.0 * (1.0 - static_cast<double>(acc.first) / acc.second) : 0.0;
    out << mode_name(mode) << ": tokens " << acc.first << ", baseline " << acc.second << ", saved "
        << fixed(saved, 1) << "%\n";
  }
  return 0;
}

int cmd_record(const Overrides& ov, const std::string& out_dir, const std::string& val_dir, std::ostream& out) {
  const RunConfig rc = ov.load();
  const Session s = open_session(rc);
  const ProviderInfo info = s.provider->info();
  RecordOptions opts;
  for (int m = s.base.pruning.layer_lo; m <= s.base.pruning.layer_hi; ++m) opts.step_layers.push_back(m);
  opts.prompt_layers = opts.step_layers;
  if (!std::count(opts.prompt_layers.begin(), opts.prompt_layers.end(), s.base.selection.analysis_layer))
    opts.prompt_layers.push_back(s.base.selection.analysis_layer);

  std::vector<PathId> paths;
  const auto languages = s.base.languages.empty() ? info.languages : s.base.languages;
  for (const auto& l : languages) paths.push_back(PathId{l, 0});
  if (s.base.mode == Mode::mono) {
    const int n = s.base.replicas > 0 ? s.base.replicas : s.base.selection.k;
    for (int r = 1; r < n; ++r) paths.push_back(PathId{s.base.source, r});
  }
  for (const auto& q : s.queries) record_query(*s.provider, q, paths, opts, out_dir);
  out << "recorded " << s.queries.size() << " queries x " << paths.size() << " paths\n";
  if (!val_dir.empty()) {
    const ValidationSet val = s.provider->validation_set(opts.prompt_layers);
    record_validation(val, info.dim, info.layer_count, info.tokenizer, val_dir);
    out << "recorded validation corpus (" << val.items.size() << " states)\n";
  }
  return 0;
}

}  // namespace

std::vector<double> parse_rho_range(std::string_view range) {
  auto number = [&](std::string_view s) {
    double v = 0.0;
    const std::string str(s);
    std::size_t used = 0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      throw ConfigError("malformed rho range '" + std::string(range) + "'");
    }
    if (used != str.size() || !std::isfinite(v)) throw ConfigError("malformed rho range '" + std::string(range) + "'");
    return v;
  };
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = range.find(':', start);
    parts.push_back(range.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  std::vector<double> out;
  if (parts.size() == 1) {
    out.push_back(round12(number(parts[0])));
  } else if (parts.size() == 3) {
    const double a = number(parts[0]);
    const double b = number(parts[1]);
    const double step = number(parts[2]);
    if (!(step > 0.0) || b < a) throw ConfigError("malformed rho range '" + std::string(range) + "'");
    const long n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    if (n > 100000) throw ConfigError("rho range has too many values");
    for (long i = 0; i <= n; ++i) out.push_back(round12(a + static_cast<double>(i) * step));
  } else {
    throw ConfigError("malformed rho range '" + std::string(range) + "' (expected a:b:step)");
  }
  for (double r : out)
    if (r < 0.0 || r > 1.0) throw ConfigError("rho values must lie in [0, 1]");
  return out;
}

std::vector<SweepRow> sweep(const Session& session, const std::vector<double>& rhos, int workers) {
  const std::size_t nq = session.queries.size();
  const std::size_t cells = rhos.size() * nq;
  std::vector<RunReport> results(cells);
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < cells; i += stride) {
      try {
        OrchestratorConfig cfg = session.for_query(session.queries[i % nq]);
        cfg.pruning.rho = rhos[i / nq];
        cfg.compare_baseline = false;
        cfg.workers = 1;
        results[i] = run(*session.provider, session.models, cfg);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(cells, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t k = 1; k < w; ++k) pool.emplace_back(work, k, w);
    work(0, w);
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<SweepRow> rows;
  for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
    SweepRow row;
    row.rho = rhos[ri];
    int correct = 0;
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const RunReport& r = results[ri * nq + qi];
      row.tokens += r.totals.tokens;
      row.latency += r.totals.latency;
      if (r.vote && r.reference_answer && *r.vote == *r.reference_answer) ++correct;
    }
    row.accuracy = nq ? static_cast<double>(correct) / static_cast<double>(nq) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "rho,accuracy,tokens,latency\n";
  for (const auto& r : rows) {
    out += json_util::format_double(r.rho) + "," + json_util::format_double(r.accuracy) + "," +
           std::to_string(r.tokens) + "," + json_util::format_double(r.latency) + "\n";
  }
  return out;
}

std::string summary_line(const RunReport& r) {
  const long base = r.baseline ? r.baseline->tokens : r.totals.tokens;
  return "mode=" + std::string(mode_name(r.mode)) + " answer=" + r.vote.value_or("-") +
         " tokens=" + std::to_string(r.totals.tokens) + " baseline_tokens=" + std::to_string(base) +
         " saved=" + fixed(100.0 * r.saved_fraction(), 1) + "%";
}

std::string reports_csv(const std::vector<RunReport>& reports) {
  std::string out =
      "query,mode,seed,k,selected,vote,reference,correct,tokens,baseline_tokens,saved_pct,latency,survivors,pruned\n";
  for (const auto& r : reports) {
    int survivors = 0;
    for (const auto& p : r.paths) survivors += p.survivor ? 1 : 0;
    const bool correct = r.vote && r.reference_answer && *r.vote == *r.reference_answer;
    out += csv_field(r.query_id) + "," + std::string(mode_name(r.mode)) + "," + std::to_string(r.seed) + "," +
           std::to_string(r.k) + "," + csv_field(join_languages(r.selected)) + "," + csv_field(r.vote.value_or("")) +
           "," + csv_field(r.reference_answer.value_or("")) + "," + (correct ? "1" : "0") + "," +
           std::to_string(r.totals.tokens) + "," +
           std::to_string(r.baseline ? r.baseline->tokens : r.totals.tokens) + "," +
           fixed(100.0 * r.saved_fraction(), 3) + "," + json_util::format_double(r.totals.latency) + "," +
           std::to_string(survivors) + "," + std::to_string(r.monitoring.pruned) + "\n";
  }
  return out;
}

std::string paths_csv(const std::vector<RunReport>& reports) {
  std::string out = "query,mode,path,language,tokens,status,answer,lqs,survivor\n";
  for (const auto& r : reports)
    for (const auto& p : r.paths)
      out += csv_field(r.query_id) + "," + std::string(mode_name(r.mode)) + "," + p.id.str() + "," +
             p.id.language.code + "," + std::to_string(p.tokens) + "," + std::string(status_name(p.status)) + "," +
             csv_field(p.answer.value_or("")) + "," + std::to_string(p.lqs) + "," + (p.survivor ? "1" : "0") + "\n";
  return out;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ulx: cross-lingual chain-of-thought with logic-space pruning"};
  app.require_subcommand(1);

  std::string val_dir, model_out;
  int fit_layer = 13, fit_rank = 4;
  double fit_lambda = 0.4;
  auto* fit = app.add_subcommand("fit", "fit a logic-space model from a validation corpus");
  fit->add_option("--val", val_dir, "validation corpus directory")->required();
  fit->add_option("--layer", fit_layer)->capture_default_str();
  fit->add_option("--rank", fit_rank)->capture_default_str();
  fit->add_option("--lambda", fit_lambda)->capture_default_str();
  fit->add_option("--out", model_out, "model file to write")->required();

  Overrides run_ov;
  std::string report_file, record_dir;
  auto* run_cmd = app.add_subcommand("run", "run one query and write its report");
  run_ov.attach(run_cmd);
  run_cmd->add_option("--report", report_file)->required();
  run_cmd->add_option("--record-traces", record_dir, "also record the run's paths as traces");

  Overrides sweep_ov;
  std::string rho_range = "0.0:0.9:0.05", sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "sweep the pruning ratio");
  sweep_ov.attach(sweep_cmd, false);
  sweep_cmd->add_option("--rho", rho_range, "a:b:step")->capture_default_str();
  sweep_cmd->add_option("--queries", sweep_ov.num_queries, "number of synthetic queries");
  sweep_cmd->add_option("--out", sweep_out)->required();

  std::vector<std::string> report_files;
  std::string report_out, per_path_out;
  auto* report_cmd = app.add_subcommand("report", "tabulate run reports");
  report_cmd->add_option("--reports", report_files)->required()->expected(1, -1);
  report_cmd->add_option("--out", report_out)->required();
  report_cmd->add_option("--per-path", per_path_out, "per-path CSV");

  Overrides record_ov;
  std::string record_out, record_val;
  auto* record_cmd = app.add_subcommand("record", "record backend traces and a validation corpus");
  record_ov.attach(record_cmd);
  record_cmd->add_option("--out", record_out)->required();
  record_cmd->add_option("--validation-out", record_val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << "\n";
      return 0;
    }
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*fit) return cmd_fit(val_dir, fit_layer, fit_rank, fit_lambda, model_out, out);
    if (*run_cmd) return cmd_run(run_ov, report_file, record_dir, out);
    if (*sweep_cmd) return cmd_sweep(sweep_ov, rho_range, sweep_out, out);
    if (*report_cmd) return cmd_report(report_files, report_out, per_path_out, out);
    if (*record_cmd) return cmd_record(record_ov, record_out, record_val, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CoverageError& e) {
    err << "coverage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ulx::cli
