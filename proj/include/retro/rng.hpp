#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace retro {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based 64-bit generator.
///
/// The n-th draw of stream `s` under seed `k` is
///   mix64(key + n * 0x9E3779B97F4A7C15),  key = mix64(k) ^ mix64(s + 0x632BE59BD9B4E019)
/// so any (seed, stream, n) triple can be evaluated without replaying earlier
/// draws. Streams are used as per-trial substreams by the sampler.
class CounterRng {
public:
  static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kStreamSalt = 0x632BE59BD9B4E019ULL;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix64(seed) ^ mix64(stream + kStreamSalt)) {}

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kIncrement);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; both halves of the pair are used.
  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t counter() const noexcept { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace retro
