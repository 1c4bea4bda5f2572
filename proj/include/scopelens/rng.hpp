#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace scopelens {

/// splitmix64 (Steele, Lea, Flood 2014). The state advances by the golden
/// gamma 0x9e3779b97f4a7c15 and each output passes through the variant-13
/// finalizer (shifts 30/27/31, multipliers 0xbf58476d1ce4e5b9 and
/// 0x94d049bb133111eb). Output depends only on the seed, on every platform.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  constexpr explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += kGamma);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  std::uint8_t byte() noexcept { return static_cast<std::uint8_t>(next() >> 56); }

  /// Standard normal via Box-Muller (one value per call).
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by Rng::below, so orderings are portable.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace scopelens
