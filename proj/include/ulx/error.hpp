// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ulx {

// Base of every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Missing language / sample / layer coverage in an input set.
class CoverageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong lifecycle state (e.g. a scoring window that
// has not elapsed yet).
class StateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long record = -1)
      : Error(record >= 0 ? what + " (record " + std::to_string(record) + ")" : what),
        record_(record) {}

  // Index of the offending step record, or -1 for header-level problems.
  long record() const noexcept { return record_; }

 private:
  long record_;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class RunError : public Error {
 public:
  using Error::Error;
};

}  // namespace ulx
