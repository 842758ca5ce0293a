// SPDX-License-Identifier: Apache-2.0
#include "ulx/selection.hpp"

#include <algorithm>

#include "ulx/error.hpp"

namespace ulx {

double uss(const LogicSpaceModel& model, const Vec& h_src, const Vec& h_tgt) {
  const Vec a = model.project(h_src);
  const Vec b = model.project(h_tgt);
  return std::clamp(cosine(a, b), -1.0, 1.0);
}

bool ranks_before(const ScoredLanguage& a, const ScoredLanguage& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.language < b.language;
}

std::vector<ScoredLanguage> score_languages(const LogicSpaceModel& model, const QueryRenditions& q) {
  if (q.states.empty()) throw CoverageError("query has no renditions");
  const auto src = q.states.find(q.source);
  if (src == q.states.end()) throw CoverageError("source language " + q.source.code + " has no rendition");
  const Vec src_proj = model.project(src->second);
  std::vector<ScoredLanguage> out;
  out.reserve(q.states.size());
  for (const auto& [lang, h] : q.states) {
    const double s = lang == q.source ? 1.0 : std::clamp(cosine(src_proj, model.project(h)), -1.0, 1.0);
    out.push_back({lang, s});
  }
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

CandidateSet select_candidates(const LogicSpaceModel& model, const QueryRenditions& q, int k, bool pin_source) {
  if (k < 1) throw ConfigError("k must be >= 1");
  auto ranked = score_languages(model, q);
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  if (pin_source) {
    const auto it = std::find_if(ranked.begin(), ranked.end(),
                                 [&](const ScoredLanguage& s) { return s.language == q.source; });
    const auto pos = static_cast<std::size_t>(it - ranked.begin());
    if (pos >= keep) {
      std::rotate(ranked.begin() + static_cast<long>(keep) - 1, it, it + 1);
    }
  }
  ranked.resize(keep);
  return CandidateSet{std::move(ranked), k};
}

}  // namespace ulx
