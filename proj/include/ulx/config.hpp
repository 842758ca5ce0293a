// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration file ("ulx-config/1", JSON). Precedence is
// flag > file > default; unknown fields are rejected with ConfigError.
// Relative paths inside the file resolve against the file's directory.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ulx/orchestrator.hpp"

namespace ulx {

enum class BackendKind { synthetic, trace };

struct BackendSpec {
  BackendKind kind = BackendKind::synthetic;
  std::filesystem::path path;  // scenario file or trace directory
};

struct RunConfig {
  OrchestratorConfig run;
  double lambda = 0.4;
  int rank = 4;
  BackendSpec backend;
  // Pre-fitted models by layer. Layers without a file are fitted on the fly
  // from `validation` (or the backend's own validation corpus).
  std::map<int, std::filesystem::path> models;
  std::optional<std::filesystem::path> validation;
  // Queries to evaluate; empty means q0..q{num_queries-1} for synthetic
  // backends and every recorded query for trace backends.
  std::vector<std::string> queries;
  int num_queries = 1;

  static RunConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  void validate() const;
};

// Backend plus fitted models, ready to run queries.
struct Session {
  std::unique_ptr<Provider> provider;
  ModelMap models;
  std::vector<std::string> queries;
  // Effective per-query configuration (monitored range resolved).
  OrchestratorConfig base;

  OrchestratorConfig for_query(const std::string& query) const;
};

Session open_session(const RunConfig& cfg);

// Fits one model per layer from a provider's validation corpus.
ModelMap fit_models(const ValidationSet& val, std::span<const int> layers, int rank, double lambda);

}  // namespace ulx
