#pragma once

#include <string_view>

#include "scopelens/network.hpp"

namespace scopelens {

/// Inclusive pixel interval [lo, hi] along one axis.
struct Interval {
  int lo = 0;
  int hi = 0;
  int length() const noexcept { return hi - lo + 1; }
  bool operator==(const Interval&) const = default;
};

/// Maps an output index i to the input interval
/// [i * stride + offset, i * stride + offset + size - 1]. Unclamped.
struct RFGeometry {
  int size = 1;
  int stride = 1;
  int offset = 0;

  Interval interval(int i) const noexcept { return {i * stride + offset, i * stride + offset + size - 1}; }
  /// Integer center of interval(i), rounding down for even sizes.
  int center(int i) const noexcept { return i * stride + offset + (size - 1) / 2; }
  bool operator==(const RFGeometry&) const = default;
};

/// Composes kernel/stride/padding of every layer up to and including `layer`.
/// Throws UnsupportedLayerError when an fc or softmax layer precedes it.
RFGeometry theoretical_rf(const NetworkSpec& spec, std::string_view layer);
RFGeometry theoretical_rf(const NetworkSpec& spec, std::size_t index);

}  // namespace scopelens
