// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace gamma_rnn {

/// Seeded generator with distribution mappings written out by hand, so the
/// same seed yields the same stream on every standard library (the
/// std::*_distribution algorithms are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform index in [0, n). Modulo bias is below 2^-40 for the sizes used here.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  double sign() { return (engine_() >> 63) != 0U ? 1.0 : -1.0; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gamma_rnn
