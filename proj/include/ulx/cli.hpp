// SPDX-License-Identifier: Apache-2.0
#pragma once

// `ulx` command-line front end: fit, run, sweep, report, record.
// Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ulx/config.hpp"

namespace ulx::cli {

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// "a:b:step" (or a single value) into rho values rounded to 12 decimals.
// Throws ConfigError on a malformed or out-of-range specification.
std::vector<double> parse_rho_range(std::string_view range);

struct SweepRow {
  double rho = 0.0;
  double accuracy = 0.0;  // fraction of queries whose vote equals the planted answer
  long tokens = 0;
  double latency = 0.0;
};

// Runs every (rho, query) cell without the paired baseline.
std::vector<SweepRow> sweep(const Session& session, const std::vector<double>& rhos, int workers = 1);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// "mode=..., answer=..., tokens=..., baseline_tokens=..., saved=...%"
std::string summary_line(const RunReport& report);

// One row per report; `per_path` lists every path of every report instead.
std::string reports_csv(const std::vector<RunReport>& reports);
std::string paths_csv(const std::vector<RunReport>& reports);

}  // namespace ulx::cli
