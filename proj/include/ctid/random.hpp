#pragma once

#include <cstdint>

namespace ctid {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, index), so records do not depend on call order or thread
/// scheduling.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  [[nodiscard]] std::uint64_t bits(std::uint64_t index) const;
  /// Uniform in the open interval (0, 1).
  [[nodiscard]] double uniform(std::uint64_t index) const;
  [[nodiscard]] double uniform(std::uint64_t index, double lo, double hi) const {
    return lo + (hi - lo) * uniform(index);
  }
  /// Standard normal by Box-Muller on two derived uniforms.
  [[nodiscard]] double normal(std::uint64_t index) const;

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

namespace streams {
inline constexpr std::uint64_t noise = 1;
inline constexpr std::uint64_t excitation = 2;
inline constexpr std::uint64_t initialization = 3;
}  // namespace streams

}  // namespace ctid
