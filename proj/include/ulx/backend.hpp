// SPDX-License-Identifier: Apache-2.0
#pragma once

// Hidden-state provider contract. A provider stands in for a white-box
// language model: it exposes the last-token state of each query rendition
// and steps decoding paths one token at a time, reporting per-layer states.
//
// Requirements on implementations:
//   - step() output is a deterministic function of the provider seed, the
//     path and the step index;
//   - every returned vector has dimension info().dim and finite entries;
//   - a PathStream is single-consumer; distinct streams may be advanced from
//     different threads concurrently.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ulx/logic_space.hpp"
#include "ulx/types.hpp"

namespace ulx {

struct ProviderInfo {
  int layer_count = 0;
  std::size_t dim = 0;
  std::vector<LanguageId> languages;
  std::string tokenizer;
};

struct StepOutput {
  std::int64_t token = 0;
  std::string piece;            // decoded text of this token
  std::map<int, Vec> states;    // requested layers only
  bool finished = false;        // the path emitted its final token
};

class PathStream {
 public:
  virtual ~PathStream() = default;

  // Next token, or nullopt at end of stream. Throws BackendError on failure.
  virtual std::optional<StepOutput> step() = 0;
  virtual std::string decode_text() const = 0;
  virtual int steps_taken() const = 0;
  // The caller no longer reads hidden states; later steps may omit them.
  virtual void drop_states() {}
};

class Provider {
 public:
  virtual ~Provider() = default;

  virtual ProviderInfo info() const = 0;
  virtual Vec rendition_state(const std::string& query, const LanguageId& language, int layer) const = 0;
  virtual std::unique_ptr<PathStream> open(const std::string& query, const PathId& path,
                                           std::span<const int> layers) const = 0;
  // Planted answer, when the provider knows one.
  virtual std::optional<std::string> reference_answer(const std::string& /*query*/) const {
    return std::nullopt;
  }
  // Parallel validation states at `layers`; throws BackendError when the
  // provider has none.
  virtual ValidationSet validation_set(std::span<const int> layers) const;
};

// Validates the contract on one step output (dimension, finiteness, layers).
void check_step_output(const StepOutput& out, std::size_t dim, std::span<const int> layers,
                       const PathId& path, int step);

}  // namespace ulx
