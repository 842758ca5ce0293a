// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace ulx {

// Short language code such as "en" or "sw". Orders lexicographically; that
// order is used for every deterministic tie-break in the pipeline.
struct LanguageId {
  std::string code;

  LanguageId() = default;
  explicit LanguageId(std::string c) : code(std::move(c)) {}

  auto operator<=>(const LanguageId&) const = default;
  bool operator==(const LanguageId&) const = default;
};

// One decoding trajectory: a language plus a replica index (replicas > 0
// only occur in mono mode).
struct PathId {
  LanguageId language;
  int replica = 0;

  auto operator<=>(const PathId&) const = default;
  bool operator==(const PathId&) const = default;

  // "de" for replica 0, "de@2" otherwise.
  std::string str() const;
  static PathId parse(std::string_view s);
};

}  // namespace ulx
