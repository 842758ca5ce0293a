// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ulx {

// Counter-based generator: output i of a stream is a pure function of
// (key, i), so substreams can be derived for any (seed, purpose, index)
// tuple without sharing state between workers. All derived quantities
// (bounded integers, normals, shuffles) are computed here rather than via
// <random> distributions so the streams are identical across standard
// library implementations.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  // Independent child stream keyed by (this key, purpose, a, b).
  CounterRng split(std::string_view purpose, std::uint64_t a = 0, std::uint64_t b = 0) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform integer in [0, bound), bound > 0, unbiased.
  std::uint64_t below(std::uint64_t bound) noexcept;
  // Standard normal (Box-Muller, one value per pair of uniforms).
  double normal() noexcept;

  // Uniformly random permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t hash_string(std::string_view s) noexcept;

}  // namespace ulx
