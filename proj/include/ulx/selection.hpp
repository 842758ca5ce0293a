// SPDX-License-Identifier: Apache-2.0
#pragma once

// Candidate language selection: rank each language's rendition of a query by
// its Understanding Similarity Score (cosine in the logic space) against the
// source rendition and keep the top k.

#include <map>
#include <vector>

#include "ulx/logic_space.hpp"

namespace ulx {

struct QueryRenditions {
  LanguageId source;
  // Last-token hidden state at the analysis layer, per rendition language.
  std::map<LanguageId, Vec> states;
};

struct ScoredLanguage {
  LanguageId language;
  double score = 0.0;

  bool operator==(const ScoredLanguage&) const = default;
};

struct CandidateSet {
  std::vector<ScoredLanguage> ranked;  // descending score, ties by ascending id
  int k = 0;
};

struct SelectionConfig {
  int k = 9;
  int analysis_layer = 13;
  // Force the source language into the set, displacing the lowest-ranked
  // entry when it did not make the cut on its own.
  bool pin_source = false;
};

double uss(const LogicSpaceModel& model, const Vec& h_src, const Vec& h_tgt);

// Every language scored and sorted (no truncation).
std::vector<ScoredLanguage> score_languages(const LogicSpaceModel& model, const QueryRenditions& q);

CandidateSet select_candidates(const LogicSpaceModel& model, const QueryRenditions& q, int k,
                               bool pin_source = false);

// Orders by descending score then ascending language id.
bool ranks_before(const ScoredLanguage& a, const ScoredLanguage& b) noexcept;

}  // namespace ulx
