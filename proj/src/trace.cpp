// SPDX-License-Identifier: Apache-2.0
#include "ulx/trace.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ulx/error.hpp"
#include "ulx/json_util.hpp"

namespace ulx {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, long record) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed trace line: ") + e.what(), record);
  }
}

Vec to_vec(const json& j, std::size_t dim, const char* what, long record) {
  std::vector<double> v;
  try {
    v = json_util::to_doubles(j, what);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), record);
  }
  if (v.size() != dim)
    throw ParseError(std::string(what) + ": expected " + std::to_string(dim) + " values, got " +
                         std::to_string(v.size()),
                     record);
  return Vec(std::move(v));
}

class ReplayStream final : public PathStream {
 public:
  ReplayStream(TraceFile trace, std::vector<std::size_t> columns, std::vector<int> layers)
      : trace_(std::move(trace)), columns_(std::move(columns)), layers_(std::move(layers)) {}

  std::optional<StepOutput> step() override {
    if (next_ >= trace_.records.size()) return std::nullopt;
    const TraceRecord& r = trace_.records[next_++];
    StepOutput out;
    out.token = r.token;
    out.piece = r.piece;
    out.finished = r.finished;
    for (std::size_t i = 0; i < layers_.size(); ++i) out.states.emplace(layers_[i], r.states[columns_[i]]);
    text_ += r.piece;
    return out;
  }

  std::string decode_text() const override { return text_; }
  void drop_states() override { layers_.clear(); }
  int steps_taken() const override { return static_cast<int>(next_); }

 private:
  TraceFile trace_;
  std::vector<std::size_t> columns_;
  std::vector<int> layers_;
  std::size_t next_ = 0;
  std::string text_;
};

}  // namespace

std::filesystem::path trace_path(const std::filesystem::path& dir, const std::string& query, const PathId& path) {
  return dir / query / (path.str() + kTraceExtension);
}

std::string serialize_trace(const TraceFile& trace) {
  const TraceHeader& h = trace.header;
  std::string out = "{\"schema\":\"";
  out += kTraceSchema;
  out += "\",\"query\":" + json_util::quote(h.query);
  out += ",\"language\":" + json_util::quote(h.path.language.code);
  out += ",\"replica\":" + std::to_string(h.path.replica);
  out += ",\"dim\":" + std::to_string(h.dim);
  out += ",\"layer_count\":" + std::to_string(h.layer_count);
  out += ",\"layers\":[";
  for (std::size_t i = 0; i < h.layers.size(); ++i) out += (i ? "," : "") + std::to_string(h.layers[i]);
  out += "],\"tokenizer\":" + json_util::quote(h.tokenizer);
  out += ",\"steps\":" + std::to_string(trace.records.size());
  if (h.reference_answer) out += ",\"reference_answer\":" + json_util::quote(*h.reference_answer);
  out += ",\"prompt_states\":{";
  bool first = true;
  for (const auto& [layer, v] : h.prompt_states) {
    if (v.size() != h.dim) throw DimensionError("trace prompt state dimension mismatch");
    out += (first ? "\"" : ",\"") + std::to_string(layer) + "\":";
    json_util::append_array(out, v.span());
    first = false;
  }
  out += "}}\n";
  for (const TraceRecord& r : trace.records) {
    if (r.states.size() != h.layers.size()) throw DimensionError("trace record layer count mismatch");
    out += "{\"step\":" + std::to_string(r.step) + ",\"token\":" + std::to_string(r.token);
    out += ",\"piece\":" + json_util::quote(r.piece);
    out += r.finished ? ",\"finished\":true" : ",\"finished\":false";
    out += ",\"states\":[";
    for (std::size_t i = 0; i < r.states.size(); ++i) {
      if (r.states[i].size() != h.dim) throw DimensionError("trace state dimension mismatch");
      if (i) out += ',';
      json_util::append_array(out, r.states[i].span());
    }
    out += "]}\n";
  }
  return out;
}

TraceHeader parse_trace_header(const std::string& first_line) {
  const json j = parse_line(first_line, -1);
  if (!j.is_object()) throw ParseError("trace header is not an object");
  const std::string schema = j.value("schema", "");
  if (schema != kTraceSchema) throw ParseError("trace schema mismatch: expected " + std::string(kTraceSchema) + ", got '" + schema + "'");
  TraceHeader h;
  try {
    h.query = j.at("query").get<std::string>();
    h.path = PathId{LanguageId(j.at("language").get<std::string>()), j.value("replica", 0)};
    h.dim = j.at("dim").get<std::size_t>();
    h.layer_count = j.at("layer_count").get<int>();
    h.layers = j.at("layers").get<std::vector<int>>();
    h.tokenizer = j.value("tokenizer", "");
    if (j.contains("reference_answer") && !j["reference_answer"].is_null())
      h.reference_answer = j["reference_answer"].get<std::string>();
    if (j.contains("prompt_states")) {
      for (const auto& [key, value] : j["prompt_states"].items())
        h.prompt_states.emplace(std::stoi(key), to_vec(value, h.dim, "prompt state", -1));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("trace header: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ParseError("trace header: bad layer key");
  }
  if (h.dim == 0) throw ParseError("trace header: dim must be > 0");
  return h;
}

TraceFile parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw ParseError("empty trace file");
  TraceFile tf;
  tf.header = parse_trace_header(line);
  const json head = json::parse(line);
  const long expected = head.value("steps", -1L);
  if (expected < 0) throw ParseError("trace header: missing step count");
  const std::size_t n_layers = tf.header.layers.size();

  long index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (index >= expected) throw ParseError("more step records than the header declares", index);
    const json j = parse_line(line, index);
    TraceRecord r;
    try {
      r.step = j.at("step").get<int>();
      r.token = j.at("token").get<std::int64_t>();
      r.piece = j.value("piece", "");
      r.finished = j.value("finished", false);
      const json& states = j.at("states");
      if (!states.is_array() || states.size() != n_layers)
        throw ParseError("expected " + std::to_string(n_layers) + " layer arrays", index);
      for (const auto& s : states) r.states.push_back(to_vec(s, tf.header.dim, "step state", index));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad step record: ") + e.what(), index);
    }
    if (r.step != index)
      throw ParseError("non-contiguous step index: expected " + std::to_string(index) + ", got " +
                           std::to_string(r.step),
                       index);
    tf.records.push_back(std::move(r));
    ++index;
  }
  if (index < expected)
    throw ParseError("truncated trace: header declares " + std::to_string(expected) + " steps, found " +
                         std::to_string(index),
                     index);
  return tf;
}

void write_trace(const std::filesystem::path& path, const TraceFile& trace) {
  json_util::write_file(path, serialize_trace(trace));
}

TraceFile read_trace(const std::filesystem::path& path) { return parse_trace(json_util::read_file(path)); }

TraceProvider::TraceProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) throw BackendError("trace directory not found: " + dir_.string());
  std::set<LanguageId> langs;
  bool have = false;
  for (const auto& q : queries()) {
    for (const auto& entry : std::filesystem::directory_iterator(dir_ / q)) {
      if (entry.path().extension() != kTraceExtension) continue;
      std::ifstream in(entry.path());
      std::string line;
      std::getline(in, line);
      TraceHeader h;
      try {
        h = parse_trace_header(line);
      } catch (const ParseError& e) {
        throw BackendError(entry.path().string() + ": " + e.what());
      }
      if (!have) {
        info_.dim = h.dim;
        info_.layer_count = h.layer_count;
        info_.tokenizer = h.tokenizer;
        have = true;
      } else if (h.dim != info_.dim) {
        throw BackendError(entry.path().string() + ": dimension differs from other traces");
      }
      langs.insert(h.path.language);
      headers_.emplace(entry.path(), std::move(h));
    }
  }
  if (!have) throw BackendError("no traces under " + dir_.string());
  info_.languages.assign(langs.begin(), langs.end());
}

std::vector<std::string> TraceProvider::queries() const {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_))
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

ProviderInfo TraceProvider::info() const { return info_; }

const TraceHeader& TraceProvider::header(const std::string& query, const PathId& path) const {
  const auto file = trace_path(dir_, query, path);
  std::lock_guard lock(mu_);
  auto it = headers_.find(file);
  if (it != headers_.end()) return it->second;
  std::ifstream in(file);
  if (!in) throw BackendError("missing trace " + file.string());
  std::string line;
  std::getline(in, line);
  try {
    return headers_.emplace(file, parse_trace_header(line)).first->second;
  } catch (const ParseError& e) {
    throw BackendError(file.string() + ": " + e.what());
  }
}

Vec TraceProvider::rendition_state(const std::string& query, const LanguageId& language, int layer) const {
  const TraceHeader& h = header(query, PathId{language, 0});
  const auto it = h.prompt_states.find(layer);
  if (it == h.prompt_states.end())
    throw BackendError("trace " + query + "/" + language.code + " has no prompt state at layer " + std::to_string(layer));
  return it->second;
}

std::optional<std::string> TraceProvider::reference_answer(const std::string& query) const {
  const auto dir = dir_ / query;
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == kTraceExtension) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) return std::nullopt;
  const auto stem = files.front().stem().string();
  return header(query, PathId::parse(stem)).reference_answer;
}

std::unique_ptr<PathStream> TraceProvider::open(const std::string& query, const PathId& path,
                                                std::span<const int> layers) const {
  const auto file = trace_path(dir_, query, path);
  TraceFile tf;
  try {
    tf = read_trace(file);
  } catch (const ParseError& e) {
    throw BackendError(file.string() + ": " + e.what());
  } catch (const Error& e) {
    throw BackendError(e.what());
  }
  std::vector<std::size_t> columns;
  for (int m : layers) {
    const auto it = std::find(tf.header.layers.begin(), tf.header.layers.end(), m);
    if (it == tf.header.layers.end())
      throw BackendError(file.string() + ": layer " + std::to_string(m) + " was not recorded");
    columns.push_back(static_cast<std::size_t>(it - tf.header.layers.begin()));
  }
  return std::make_unique<ReplayStream>(std::move(tf), std::move(columns), std::vector<int>(layers.begin(), layers.end()));
}

ValidationSet TraceProvider::validation_set(std::span<const int> layers) const {
  ValidationSet val;
  for (const auto& q : queries()) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir_ / q))
      if (entry.path().extension() == kTraceExtension) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const PathId id = PathId::parse(f.stem().string());
      if (id.replica != 0) continue;
      const TraceHeader& h = header(q, id);
      for (int m : layers) {
        const auto it = h.prompt_states.find(m);
        if (it != h.prompt_states.end()) val.items.push_back({q, id.language, m, it->second});
      }
    }
  }
  return val;
}

void record_query(const Provider& provider, const std::string& query, const std::vector<PathId>& paths,
                  const RecordOptions& opts, const std::filesystem::path& dir) {
  const ProviderInfo info = provider.info();
  for (const PathId& path : paths) {
    TraceFile tf;
    tf.header.query = query;
    tf.header.path = path;
    tf.header.dim = info.dim;
    tf.header.layer_count = info.layer_count;
    tf.header.layers = opts.step_layers;
    tf.header.tokenizer = info.tokenizer;
    tf.header.reference_answer = provider.reference_answer(query);
    for (int m : opts.prompt_layers) tf.header.prompt_states.emplace(m, provider.rendition_state(query, path.language, m));
    auto stream = provider.open(query, path, opts.step_layers);
    int t = 0;
    while (opts.max_length <= 0 || t < opts.max_length) {
      auto out = stream->step();
      if (!out) break;
      check_step_output(*out, info.dim, opts.step_layers, path, t);
      TraceRecord r;
      r.step = t;
      r.token = out->token;
      r.piece = out->piece;
      r.finished = out->finished;
      for (int m : opts.step_layers) r.states.push_back(std::move(out->states.at(m)));
      tf.records.push_back(std::move(r));
      ++t;
      if (out->finished) break;
    }
    write_trace(trace_path(dir, query, path), tf);
  }
}

void record_validation(const ValidationSet& val, std::size_t dim, int layer_count, const std::string& tokenizer,
                       const std::filesystem::path& dir) {
  std::map<std::pair<std::string, LanguageId>, TraceFile> files;
  for (const auto& item : val.items) {
    auto& tf = files[{item.sample, item.language}];
    tf.header.query = item.sample;
    tf.header.path = PathId{item.language, 0};
    tf.header.dim = dim;
    tf.header.layer_count = layer_count;
    tf.header.tokenizer = tokenizer;
    tf.header.prompt_states[item.layer] = item.state;
  }
  for (const auto& [key, tf] : files) write_trace(trace_path(dir, key.first, tf.header.path), tf);
}

}  // namespace ulx
