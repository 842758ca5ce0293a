// SPDX-License-Identifier: Apache-2.0
#include "ulx/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "ulx/error.hpp"
#include "ulx/json_util.hpp"
#include "ulx/kernels.hpp"

namespace ulx {

namespace {

constexpr std::int64_t kFillerTokenBase = 1000;
constexpr const char* kTokenizer = "synthetic-v1";

std::vector<LanguageId> to_ids(const std::vector<std::string>& codes) {
  std::vector<LanguageId> out;
  for (const auto& c : codes) out.emplace_back(c);
  return out;
}

std::string answer_suffix(const std::string& answer) { return "\\boxed{" + answer + "}"; }

class SyntheticStream final : public PathStream {
 public:
  SyntheticStream(const SyntheticProvider& owner, std::string query, PathId path, std::vector<int> layers)
      : owner_(owner),
        query_(std::move(query)),
        path_(std::move(path)),
        layers_(std::move(layers)),
        params_(owner.signal_params(query_)),
        length_(owner.path_length(path_.language)),
        drifting_(owner.drifting_languages(query_).count(path_.language) > 0),
        suffix_(answer_suffix(owner.planted_answer(query_, path_))),
        stream_(CounterRng(owner.scenario().seed)
                    .split("path", hash_string(query_), hash_string(path_.str()))) {
    if (drifting_) {
      for (int m : layers_) walk_.emplace(m, Vec(owner_.scenario().dim));
    }
  }

  std::optional<StepOutput> step() override {
    if (t_ >= length_) return std::nullopt;
    const auto& sc = owner_.scenario();
    StepOutput out;
    const int suffix_start = length_ - static_cast<int>(suffix_.size());
    if (t_ >= suffix_start) {
      const char ch = suffix_[static_cast<std::size_t>(t_ - suffix_start)];
      out.token = static_cast<unsigned char>(ch);
      out.piece = std::string(1, ch);
    } else {
      CounterRng tok = stream_.split("token", static_cast<std::uint64_t>(t_));
      out.token = kFillerTokenBase + static_cast<std::int64_t>(tok.below(1000));
      out.piece = " ";
    }
    const Vec& offset = owner_.offset(path_.language);
    for (int m : layers_) {
      Vec h(sc.dim);
      SyntheticProvider::signal(params_, t_, m, h.span());
      kernels::axpy(1.0, offset.span(), h.span());
      CounterRng noise = stream_.split("noise", static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(m));
      for (std::size_t j = 0; j < sc.dim; ++j) h[j] += sc.sigma_eps * noise.normal();
      if (drifting_) {
        Vec& w = walk_.at(m);
        CounterRng drift = stream_.split("drift", static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(m));
        for (std::size_t j = 0; j < sc.dim; ++j) w[j] += sc.sigma_w * drift.normal();
        kernels::axpy(1.0, w.span(), h.span());
      }
      out.states.emplace(m, std::move(h));
    }
    text_ += out.piece;
    ++t_;
    out.finished = t_ == length_;
    return out;
  }

  std::string decode_text() const override { return text_; }
  void drop_states() override { layers_.clear(); }
  int steps_taken() const override { return t_; }

 private:
  const SyntheticProvider& owner_;
  std::string query_;
  PathId path_;
  std::vector<int> layers_;
  SyntheticProvider::SignalParams params_;
  int length_;
  bool drifting_;
  std::string suffix_;
  CounterRng stream_;
  std::map<int, Vec> walk_;
  std::string text_;
  int t_ = 0;
};

}  // namespace

SyntheticScenario SyntheticScenario::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  static const std::set<std::string> known = {
      "schema", "seed", "dim", "layers", "languages", "offset_rank", "offset_scale", "signal_scale",
      "signal_bias", "sigma_eps", "sigma_w", "drifting", "num_drifting", "source_language", "max_length",
      "coherent_accuracy", "drifting_accuracy", "rendition_noise", "drifting_rendition_noise",
      "validation_samples", "lengths"};
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("scenario: unknown field '" + key + "'");
  if (j.value("schema", "") != "ulx-scenario/1") throw ConfigError("scenario: schema must be ulx-scenario/1");
  SyntheticScenario s;
  try {
    s.seed = j.value("seed", s.seed);
    s.dim = j.value("dim", s.dim);
    s.layers = j.value("layers", s.layers);
    s.languages = to_ids(j.at("languages").get<std::vector<std::string>>());
    s.offset_rank = j.value("offset_rank", s.offset_rank);
    s.offset_scale = j.value("offset_scale", s.offset_scale);
    s.signal_scale = j.value("signal_scale", s.signal_scale);
    s.signal_bias = j.value("signal_bias", s.signal_bias);
    s.sigma_eps = j.value("sigma_eps", s.sigma_eps);
    s.sigma_w = j.value("sigma_w", s.sigma_w);
    if (j.contains("drifting")) s.drifting = to_ids(j["drifting"].get<std::vector<std::string>>());
    s.num_drifting = j.value("num_drifting", s.num_drifting);
    s.source = LanguageId(j.value("source_language", s.source.code));
    s.max_length = j.value("max_length", s.max_length);
    s.coherent_accuracy = j.value("coherent_accuracy", s.coherent_accuracy);
    s.drifting_accuracy = j.value("drifting_accuracy", s.drifting_accuracy);
    s.rendition_noise = j.value("rendition_noise", s.rendition_noise);
    s.drifting_rendition_noise = j.value("drifting_rendition_noise", s.drifting_rendition_noise);
    s.validation_samples = j.value("validation_samples", s.validation_samples);
    if (j.contains("lengths"))
      for (const auto& [k, v] : j["lengths"].items()) s.lengths[LanguageId(k)] = v.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticScenario SyntheticScenario::load(const std::filesystem::path& path) {
  return from_json(json_util::read_file(path));
}

std::string SyntheticScenario::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "ulx-scenario/1";
  j["seed"] = seed;
  j["dim"] = dim;
  j["layers"] = layers;
  std::vector<std::string> langs;
  for (const auto& l : languages) langs.push_back(l.code);
  j["languages"] = langs;
  j["offset_rank"] = offset_rank;
  j["offset_scale"] = offset_scale;
  j["signal_scale"] = signal_scale;
  j["signal_bias"] = signal_bias;
  j["sigma_eps"] = sigma_eps;
  j["sigma_w"] = sigma_w;
  std::vector<std::string> drift;
  for (const auto& l : drifting) drift.push_back(l.code);
  j["drifting"] = drift;
  j["num_drifting"] = num_drifting;
  j["source_language"] = source.code;
  j["max_length"] = max_length;
  j["coherent_accuracy"] = coherent_accuracy;
  j["drifting_accuracy"] = drifting_accuracy;
  j["rendition_noise"] = rendition_noise;
  j["drifting_rendition_noise"] = drifting_rendition_noise;
  j["validation_samples"] = validation_samples;
  nlohmann::ordered_json lens = nlohmann::ordered_json::object();
  for (const auto& [l, n] : lengths) lens[l.code] = n;
  j["lengths"] = lens;
  return j.dump(2) + "\n";
}

void SyntheticScenario::validate() const {
  if (dim == 0) throw ConfigError("scenario: dim must be > 0");
  if (layers < 2) throw ConfigError("scenario: need at least two layers");
  if (languages.empty()) throw ConfigError("scenario: no languages");
  std::set<LanguageId> uniq(languages.begin(), languages.end());
  if (uniq.size() != languages.size()) throw ConfigError("scenario: duplicate language");
  if (!uniq.count(source)) throw ConfigError("scenario: source language not in language set");
  if (offset_rank < 0 || static_cast<std::size_t>(offset_rank) > dim)
    throw ConfigError("scenario: offset_rank must lie in [0, dim]");
  if (sigma_eps < 0 || sigma_w < 0) throw ConfigError("scenario: noise scales must be >= 0");
  for (const auto& l : drifting)
    if (!uniq.count(l)) throw ConfigError("scenario: drifting language " + l.code + " not in language set");
  if (num_drifting < 0 || static_cast<std::size_t>(num_drifting) >= languages.size())
    throw ConfigError("scenario: num_drifting must leave at least one coherent language");
  if (drifting.size() >= languages.size()) throw ConfigError("scenario: coherent set must be nonempty");
  if (max_length < 1) throw ConfigError("scenario: max_length must be >= 1");
  if (validation_samples < 2 || validation_samples % 2)
    throw ConfigError("scenario: validation_samples must be even and >= 2");
  for (const auto& [l, n] : lengths)
    if (n < 1) throw ConfigError("scenario: path length for " + l.code + " must be >= 1");
}

SyntheticProvider::SyntheticProvider(SyntheticScenario scenario)
    : scenario_(std::move(scenario)), root_(scenario_.seed) {
  scenario_.validate();
  const std::size_t d = scenario_.dim;
  const auto r = static_cast<std::size_t>(scenario_.offset_rank);
  // Planted subspace: Gram-Schmidt on Gaussian columns.
  offset_basis_ = Mat(d, r);
  CounterRng basis_rng = root_.split("offset-basis");
  for (std::size_t k = 0; k < r; ++k) {
    auto col = offset_basis_.col(k);
    for (;;) {
      for (auto& x : col) x = basis_rng.normal();
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t q = 0; q < k; ++q) kernels::axpy(-kernels::dot(offset_basis_.col(q), col), offset_basis_.col(q), col);
      const double n = norm(col);
      if (n > 1e-6) {
        kernels::scale(1.0 / n, col);
        break;
      }
    }
  }
  for (const auto& lang : scenario_.languages) {
    Vec o(d);
    CounterRng orng = root_.split("offset", hash_string(lang.code));
    for (std::size_t k = 0; k < r; ++k) kernels::axpy(scenario_.offset_scale * orng.normal(), offset_basis_.col(k), o.span());
    offsets_.emplace(lang, std::move(o));
  }
}

ProviderInfo SyntheticProvider::info() const {
  return ProviderInfo{scenario_.layers, scenario_.dim, scenario_.languages, kTokenizer};
}

const Vec& SyntheticProvider::offset(const LanguageId& language) const {
  const auto it = offsets_.find(language);
  if (it == offsets_.end()) throw BackendError("unknown language " + language.code);
  return it->second;
}

int SyntheticProvider::path_length(const LanguageId& language) const {
  const auto it = scenario_.lengths.find(language);
  return it == scenario_.lengths.end() ? scenario_.max_length : it->second;
}

std::set<LanguageId> SyntheticProvider::drifting_languages(const std::string& query) const {
  if (!scenario_.drifting.empty()) return {scenario_.drifting.begin(), scenario_.drifting.end()};
  std::vector<LanguageId> pool;
  for (const auto& l : scenario_.languages)
    if (!(l == scenario_.source)) pool.push_back(l);
  std::sort(pool.begin(), pool.end());
  CounterRng rng = root_.split("drifting", hash_string(query));
  const auto perm = rng.permutation(pool.size());
  std::set<LanguageId> out;
  for (int i = 0; i < scenario_.num_drifting; ++i) out.insert(pool[perm[static_cast<std::size_t>(i)]]);
  return out;
}

std::optional<std::string> SyntheticProvider::reference_answer(const std::string& query) const {
  CounterRng rng = root_.split("answer", hash_string(query));
  return std::to_string(10 + rng.below(90));
}

std::string SyntheticProvider::planted_answer(const std::string& query, const PathId& path) const {
  const std::string correct = *reference_answer(query);
  const bool drifting = drifting_languages(query).count(path.language) > 0;
  CounterRng rng = root_.split("path-answer", hash_string(query), hash_string(path.str()));
  const double p = drifting ? scenario_.drifting_accuracy : scenario_.coherent_accuracy;
  if (rng.uniform() < p) return correct;
  // Distractors are other two-digit numbers.
  const int c = std::stoi(correct);
  const int off = 1 + static_cast<int>(rng.below(89));
  return std::to_string(10 + (c - 10 + off) % 90);
}

SyntheticProvider::SignalParams SyntheticProvider::signal_params(const std::string& query) const {
  const std::size_t d = scenario_.dim;
  CounterRng rng = root_.split("signal", hash_string(query));
  SignalParams p;
  p.bias.resize(d);
  p.layer_amp.resize(d);
  p.layer_freq.resize(d);
  p.layer_phase.resize(d);
  p.pos_amp.resize(d);
  p.pos_freq.resize(d);
  p.pos_phase.resize(d);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t j = 0; j < d; ++j) {
    p.bias[j] = scenario_.signal_bias * rng.normal();
    p.layer_amp[j] = scenario_.signal_scale * rng.normal();
    p.layer_freq[j] = 0.05 + 0.20 * rng.uniform();
    p.layer_phase[j] = two_pi * rng.uniform();
    p.pos_amp[j] = 0.3 * scenario_.signal_scale * rng.normal();
    p.pos_freq[j] = 0.01 + 0.04 * rng.uniform();
    p.pos_phase[j] = two_pi * rng.uniform();
  }
  return p;
}

void SyntheticProvider::signal(const SignalParams& p, int t, int layer, std::span<double> out) {
  const double m = static_cast<double>(layer);
  const double tt = static_cast<double>(t);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = p.bias[j] + p.layer_amp[j] * std::sin(p.layer_freq[j] * m + p.layer_phase[j]) +
             p.pos_amp[j] * std::sin(p.pos_freq[j] * tt + p.pos_phase[j]);
  }
}

Vec SyntheticProvider::rendition_state(const std::string& query, const LanguageId& language, int layer) const {
  if (layer < 0 || layer >= scenario_.layers) throw BackendError("layer " + std::to_string(layer) + " out of range");
  Vec h(scenario_.dim);
  signal(signal_params(query), 0, layer, h.span());
  kernels::axpy(1.0, offset(language).span(), h.span());
  const bool drifting = drifting_languages(query).count(language) > 0;
  const double noise = drifting ? scenario_.drifting_rendition_noise : scenario_.rendition_noise;
  CounterRng rng = root_.split("rendition", hash_string(query), hash_string(language.code) ^ static_cast<std::uint64_t>(layer));
  for (std::size_t j = 0; j < scenario_.dim; ++j) h[j] += noise * rng.normal();
  return h;
}

std::unique_ptr<PathStream> SyntheticProvider::open(const std::string& query, const PathId& path,
                                                    std::span<const int> layers) const {
  if (!offsets_.count(path.language)) throw BackendError("unknown language " + path.language.code);
  for (int m : layers)
    if (m < 0 || m >= scenario_.layers) throw BackendError("layer " + std::to_string(m) + " out of range");
  return std::make_unique<SyntheticStream>(*this, query, path, std::vector<int>(layers.begin(), layers.end()));
}

ValidationSet SyntheticProvider::validation_set(std::span<const int> layers) const {
  ValidationSet val;
  const std::size_t d = scenario_.dim;
  const int n = scenario_.validation_samples;
  for (int m : layers) {
    if (m < 0 || m >= scenario_.layers) throw BackendError("layer " + std::to_string(m) + " out of range");
    for (int pair = 0; pair < n / 2; ++pair) {
      // Antithetic content pairs: the shared content averages to exactly zero,
      // so language centers carry only the planted offsets plus noise.
      Vec content(d);
      CounterRng crng = root_.split("val-content", static_cast<std::uint64_t>(pair), static_cast<std::uint64_t>(m));
      for (std::size_t j = 0; j < d; ++j) content[j] = scenario_.signal_scale * crng.normal();
      for (int sign = 0; sign < 2; ++sign) {
        const int sample = 2 * pair + sign;
        char name[16];
        std::snprintf(name, sizeof(name), "v%03d", sample);
        for (const auto& lang : scenario_.languages) {
          Vec h(d);
          kernels::axpy(sign == 0 ? 1.0 : -1.0, content.span(), h.span());
          kernels::axpy(1.0, offset(lang).span(), h.span());
          CounterRng nrng = root_.split("val-noise", static_cast<std::uint64_t>(sample) * 4096 + static_cast<std::uint64_t>(m),
                                        hash_string(lang.code));
          for (std::size_t j = 0; j < d; ++j) h[j] += scenario_.sigma_eps * nrng.normal();
          val.items.push_back({name, lang, m, std::move(h)});
        }
      }
    }
  }
  return val;
}

}  // namespace ulx
