// SPDX-License-Identifier: Apache-2.0
#include "ulx/types.hpp"

#include <charconv>

#include "ulx/error.hpp"

namespace ulx {

std::string PathId::str() const {
  if (replica == 0) return language.code;
  return language.code + "@" + std::to_string(replica);
}

PathId PathId::parse(std::string_view s) {
  const auto at = s.find('@');
  if (at == std::string_view::npos) return PathId{LanguageId(std::string(s)), 0};
  int r = 0;
  const auto tail = s.substr(at + 1);
  const auto res = std::from_chars(tail.data(), tail.data() + tail.size(), r);
  if (res.ec != std::errc{} || res.ptr != tail.data() + tail.size() || r < 0)
    throw ParseError("bad path id '" + std::string(s) + "'");
  return PathId{LanguageId(std::string(s.substr(0, at))), r};
}

}  // namespace ulx
