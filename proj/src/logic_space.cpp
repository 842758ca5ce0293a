// SPDX-License-Identifier: Apache-2.0
#include "ulx/logic_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ulx/error.hpp"
#include "ulx/json_util.hpp"
#include "ulx/kernels.hpp"

namespace ulx {

CenterMap compute_language_centers(const ValidationSet& val, int layer) {
  std::set<LanguageId> languages;
  std::set<std::string> samples;
  for (const auto& it : val.items) {
    languages.insert(it.language);
    if (it.layer == layer) samples.insert(it.sample);
  }
  if (languages.empty()) throw CoverageError("validation set is empty");

  std::map<LanguageId, std::set<std::string>> seen;
  CenterMap sums;
  std::map<LanguageId, std::size_t> counts;
  std::size_t dim = 0;
  for (const auto& it : val.items) {
    if (it.layer != layer) continue;
    if (dim == 0) dim = it.state.size();
    if (it.state.size() != dim || dim == 0)
      throw DimensionError("validation state for " + it.sample + "/" + it.language.code +
                           " has dimension " + std::to_string(it.state.size()) + ", expected " +
                           std::to_string(dim));
    auto [pos, fresh] = sums.try_emplace(it.language, Vec(dim));
    kernels::axpy(1.0, it.state.span(), pos->second.span());
    ++counts[it.language];
    seen[it.language].insert(it.sample);
  }

  std::string missing;
  for (const auto& lang : languages) {
    for (const auto& s : samples) {
      if (!seen[lang].count(s)) missing += " (" + s + ", " + lang.code + ")";
    }
    if (samples.empty() || !counts.count(lang)) missing += " (*, " + lang.code + ")";
  }
  if (!missing.empty())
    throw CoverageError("missing validation states at layer " + std::to_string(layer) + ":" + missing);

  for (auto& [lang, sum] : sums) kernels::scale(1.0 / static_cast<double>(counts[lang]), sum.span());
  return sums;
}

ShiftMatrix build_shift_matrix(const CenterMap& centers) {
  if (centers.empty()) throw CoverageError("no language centers");
  const std::size_t d = centers.begin()->second.size();
  ShiftMatrix out{Mat(d, centers.size()), {}};
  std::size_t j = 0;
  for (const auto& [lang, mu] : centers) {
    if (mu.size() != d)
      throw DimensionError("center for " + lang.code + " has dimension " + std::to_string(mu.size()) +
                           ", expected " + std::to_string(d));
    std::copy(mu.values().begin(), mu.values().end(), out.matrix.col(j).begin());
    out.languages.push_back(lang);
    ++j;
  }
  return out;
}

LogicSpaceModel::LogicSpaceModel(int layer, CenterMap centers, Mat basis, double lambda,
                                 std::vector<double> singular_values)
    : layer_(layer),
      centers_(std::move(centers)),
      basis_(std::move(basis)),
      lambda_(lambda),
      singular_values_(std::move(singular_values)) {
  if (!(lambda_ >= 0.0 && lambda_ <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (basis_.rows() == 0 || basis_.cols() == 0) throw ConfigError("basis must have rank >= 1");
  if (!centers_.empty() && basis_.cols() > centers_.size())
    throw ConfigError("rank exceeds the number of languages");
  for (const auto& [lang, mu] : centers_)
    if (mu.size() != basis_.rows()) throw DimensionError("center dimension differs from basis");
}

LogicSpaceModel LogicSpaceModel::fit(const ValidationSet& val, int layer, int rank, double lambda) {
  if (rank < 1) throw ConfigError("rank must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  CenterMap centers = compute_language_centers(val, layer);
  if (centers.size() < 2)
    throw ConfigError("logic space needs at least two languages (got " + std::to_string(centers.size()) + ")");
  if (static_cast<std::size_t>(rank) > centers.size())
    throw ConfigError("rank " + std::to_string(rank) + " exceeds language count " +
                      std::to_string(centers.size()));
  ShiftMatrix shift = build_shift_matrix(centers);
  if (static_cast<std::size_t>(rank) > shift.matrix.rows())
    throw ConfigError("rank exceeds hidden dimension");
  Svd f = svd(shift.matrix);
  Mat basis(shift.matrix.rows(), static_cast<std::size_t>(rank));
  for (int k = 0; k < rank; ++k) std::copy(f.u.col(k).begin(), f.u.col(k).end(), basis.col(k).begin());
  return LogicSpaceModel(layer, std::move(centers), std::move(basis), lambda, std::move(f.s));
}

void LogicSpaceModel::project_into(std::span<const double> h, std::span<double> out) const {
  if (h.size() != dim() || out.size() != dim())
    throw DimensionError("project: state has dimension " + std::to_string(h.size()) + ", model expects " +
                         std::to_string(dim()));
  if (out.data() == h.data()) {
    const std::vector<double> copy(h.begin(), h.end());
    project_into(copy, out);
    return;
  }
  std::copy(h.begin(), h.end(), out.begin());
  if (lambda_ == 0.0) return;
  for (std::size_t k = 0; k < basis_.cols(); ++k) {
    const double c = kernels::dot(basis_.col(k), h);
    kernels::axpy(-lambda_ * c, basis_.col(k), out);
  }
}

Vec LogicSpaceModel::project(const Vec& h) const {
  Vec out(h.size());
  project_into(h.span(), out.span());
  return out;
}

void LogicSpaceModel::project_accumulate(std::span<const double> h, std::span<double> out) const {
  if (h.size() != dim() || out.size() != dim())
    throw DimensionError("project: state has dimension " + std::to_string(h.size()) + ", model expects " +
                         std::to_string(dim()));
  kernels::axpy(1.0, h, out);
  if (lambda_ == 0.0) return;
  for (std::size_t k = 0; k < basis_.cols(); ++k) {
    const double c = kernels::dot(basis_.col(k), h);
    kernels::axpy(-lambda_ * c, basis_.col(k), out);
  }
}

std::string LogicSpaceModel::to_json() const {
  using json_util::append_array;
  using json_util::format_double;
  std::string out = "{\n  \"schema\": \"ulx-logic-space/1\",\n";
  out += "  \"dim\": " + std::to_string(dim()) + ",\n";
  out += "  \"layer\": " + std::to_string(layer_) + ",\n";
  out += "  \"rank\": " + std::to_string(rank()) + ",\n";
  out += "  \"lambda\": " + format_double(lambda_) + ",\n";
  out += "  \"languages\": [";
  bool first = true;
  for (const auto& [lang, mu] : centers_) {
    if (!first) out += ", ";
    out += json_util::quote(lang.code);
    first = false;
  }
  out += "],\n  \"centers\": [";
  first = true;
  for (const auto& [lang, mu] : centers_) {
    out += first ? "\n    " : ",\n    ";
    append_array(out, mu.span());
    first = false;
  }
  out += "\n  ],\n  \"basis\": ";
  append_array(out, basis_.data());
  out += ",\n  \"singular_values\": ";
  append_array(out, singular_values_);
  out += "\n}\n";
  return out;
}

LogicSpaceModel LogicSpaceModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("logic-space model: ") + e.what());
  }
  try {
    if (j.value("schema", "") != "ulx-logic-space/1") throw ParseError("logic-space model: bad schema");
    const auto dim = j.at("dim").get<std::size_t>();
    const auto rank = j.at("rank").get<std::size_t>();
    const auto langs = j.at("languages").get<std::vector<std::string>>();
    const auto& centers_json = j.at("centers");
    if (!centers_json.is_array() || centers_json.size() != langs.size())
      throw ParseError("logic-space model: centers/languages length mismatch");
    CenterMap centers;
    for (std::size_t i = 0; i < langs.size(); ++i) {
      auto values = json_util::to_doubles(centers_json[i], "center");
      if (values.size() != dim) throw ParseError("logic-space model: center dimension mismatch");
      if (!centers.emplace(LanguageId(langs[i]), Vec(std::move(values))).second)
        throw ParseError("logic-space model: duplicate language " + langs[i]);
    }
    auto basis_values = json_util::to_doubles(j.at("basis"), "basis");
    if (basis_values.size() != dim * rank) throw ParseError("logic-space model: basis size mismatch");
    Mat basis(dim, rank);
    basis.data() = std::move(basis_values);
    std::vector<double> sv;
    if (j.contains("singular_values")) sv = json_util::to_doubles(j["singular_values"], "singular_values");
    for (std::size_t a = 0; a < rank; ++a)
      for (std::size_t b = 0; b <= a; ++b) {
        const double g = kernels::dot(basis.col(a), basis.col(b));
        if (std::abs(g - (a == b ? 1.0 : 0.0)) > 1e-8)
          throw ParseError("logic-space model: basis columns are not orthonormal");
      }
    return LogicSpaceModel(j.at("layer").get<int>(), std::move(centers), std::move(basis),
                           j.at("lambda").get<double>(), std::move(sv));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("logic-space model: ") + e.what());
  }
}

void LogicSpaceModel::save(const std::filesystem::path& path) const { json_util::write_file(path, to_json()); }

LogicSpaceModel LogicSpaceModel::load(const std::filesystem::path& path) {
  return from_json(json_util::read_file(path));
}

double center_dispersion(const CenterMap& centers) {
  if (centers.empty()) return 0.0;
  const std::size_t d = centers.begin()->second.size();
  Vec mean(d);
  for (const auto& [lang, mu] : centers) kernels::axpy(1.0, mu.span(), mean.span());
  kernels::scale(1.0 / static_cast<double>(centers.size()), mean.span());
  double total = 0.0;
  for (const auto& [lang, mu] : centers) total += kernels::squared_distance(mu.span(), mean.span());
  return total / static_cast<double>(centers.size());
}

CenterMap project_centers(const LogicSpaceModel& model, const CenterMap& centers) {
  CenterMap out;
  for (const auto& [lang, mu] : centers) out.emplace(lang, model.project(mu));
  return out;
}

}  // namespace ulx
