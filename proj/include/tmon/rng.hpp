#pragma once

#include <cstdint>
#include <span>

namespace tmon {

/// Counter-based generator built on the SplitMix64 finalizer.
///
/// Output i of a stream keyed by `key` is mix(key + (i + 1) * golden), so the
/// sequence depends only on the key and position and is identical on every
/// platform. `split` derives an independent child stream, which lets
/// parallel work draw numbers without sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;
  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  bool bernoulli(double p) noexcept;
  /// Standard normal deviate (Box-Muller, no cached spare).
  double normal() noexcept;
  std::uint8_t byte() noexcept;

  [[nodiscard]] Rng split(std::uint64_t stream) const noexcept;
  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace tmon
