// SPDX-License-Identifier: Apache-2.0
#include "ulx/json_util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ulx/error.hpp"

namespace ulx::json_util {

namespace {

char* write_double(char* first, char* last, double x) {
  if (!std::isfinite(x)) throw NumericError("cannot serialize non-finite number");
  // JSON readers take a bare "-0" for the integer zero; keep the sign.
  if (x == 0.0 && std::signbit(x)) {
    static constexpr char kNegZero[] = "-0.0";
    return std::copy(kNegZero, kNegZero + 4, first);
  }
  return std::to_chars(first, last, x).ptr;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  return std::string(buf, write_double(buf, buf + sizeof(buf), x));
}

void append_array(std::string& out, std::span<const double> values) {
  out.push_back('[');
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(',');
    out.append(buf, write_double(buf, buf + sizeof(buf), values[i]));
  }
  out.push_back(']');
}

std::vector<double> to_doubles(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected number array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ParseError(std::string(what) + ": expected number array");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace ulx::json_util
