// SPDX-License-Identifier: Apache-2.0
#pragma once

// Line-delimited trace files ("ulx-trace/1").
//
//   line 0     header object: schema, query, language, replica, dim,
//              layer_count, layers (ids of the per-step state arrays),
//              tokenizer, steps (record count), optional reference_answer,
//              prompt_states {layer: [..]} (last-token rendition states)
//   line 1..N  one step record each: {"step", "token", "piece", "finished",
//              "states": [[..] per header layer]}
//
// Numbers are written as the shortest decimal that round-trips, so
// write -> read reproduces every state bit for bit. Step records must be
// contiguous from 0. On disk a trace lives at <dir>/<query-id>/<path>.ultrace
// where <path> is the language code, or code@replica for replicas > 0.
// Validation corpora use the same layout with sample ids in place of query
// ids and zero step records.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ulx/backend.hpp"

namespace ulx {

inline constexpr const char* kTraceSchema = "ulx-trace/1";
inline constexpr const char* kTraceExtension = ".ultrace";

struct TraceHeader {
  std::string query;
  PathId path;
  std::size_t dim = 0;
  int layer_count = 0;
  std::vector<int> layers;
  std::string tokenizer;
  std::optional<std::string> reference_answer;
  std::map<int, Vec> prompt_states;
};

struct TraceRecord {
  int step = 0;
  std::int64_t token = 0;
  std::string piece;
  bool finished = false;
  std::vector<Vec> states;  // parallel to TraceHeader::layers
};

struct TraceFile {
  TraceHeader header;
  std::vector<TraceRecord> records;
};

std::string serialize_trace(const TraceFile& trace);
// Throws ParseError carrying the index of the offending step record.
TraceFile parse_trace(const std::string& text);
// Header only (cheap for rendition lookups).
TraceHeader parse_trace_header(const std::string& first_line);

void write_trace(const std::filesystem::path& path, const TraceFile& trace);
TraceFile read_trace(const std::filesystem::path& path);

std::filesystem::path trace_path(const std::filesystem::path& dir, const std::string& query, const PathId& path);

// Replays recorded traces under <dir>.
class TraceProvider final : public Provider {
 public:
  explicit TraceProvider(std::filesystem::path dir);

  ProviderInfo info() const override;
  Vec rendition_state(const std::string& query, const LanguageId& language, int layer) const override;
  std::unique_ptr<PathStream> open(const std::string& query, const PathId& path,
                                   std::span<const int> layers) const override;
  std::optional<std::string> reference_answer(const std::string& query) const override;
  ValidationSet validation_set(std::span<const int> layers) const override;

  // Query (or sample) ids found under the directory, sorted.
  std::vector<std::string> queries() const;

 private:
  const TraceHeader& header(const std::string& query, const PathId& path) const;

  std::filesystem::path dir_;
  ProviderInfo info_;
  mutable std::mutex mu_;
  mutable std::map<std::filesystem::path, TraceHeader> headers_;
};

struct RecordOptions {
  std::vector<int> step_layers;    // stored per step
  std::vector<int> prompt_layers;  // stored once in the header
  int max_length = 0;              // 0 = until the stream ends
};

// Drives every path of `query` to completion on `provider` and writes one
// trace per path under <dir>/<query>/.
void record_query(const Provider& provider, const std::string& query, const std::vector<PathId>& paths,
                  const RecordOptions& opts, const std::filesystem::path& dir);

// Writes a validation corpus (<dir>/<sample>/<lang>.ultrace, header only).
void record_validation(const ValidationSet& val, std::size_t dim, int layer_count, const std::string& tokenizer,
                       const std::filesystem::path& dir);

}  // namespace ulx
