// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ulx::json_util {

// Shortest decimal that parses back to the same binary64. Throws
// NumericError on NaN/Inf (JSON has no spelling for them).
std::string format_double(double x);

// "[a,b,c]" using format_double.
void append_array(std::string& out, std::span<const double> values);

std::vector<double> to_doubles(const nlohmann::json& j, const char* what);

std::string read_file(const std::filesystem::path& path);
// Writes atomically enough for our purposes: temp file then rename.
void write_file(const std::filesystem::path& path, const std::string& content);

// Escaped JSON string literal including quotes.
std::string quote(const std::string& s);

}  // namespace ulx::json_util
