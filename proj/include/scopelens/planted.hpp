#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scopelens/forward.hpp"
#include "scopelens/image.hpp"
#include "scopelens/rng.hpp"
#include "scopelens/segmenter.hpp"

namespace scopelens {

/// Hand-built three-layer detector whose conv3 channel 0 responds to one
/// known 16x16 binary pattern of 2x2 cells, followed by a two-class
/// ("pattern", "background") classifier.
///
///   conv1 8x8/2, 25 ch: zero-mean matched filters for the 8x8 sub-windows
///                       of the pattern at offsets (2i, 2j), 0 <= i, j < 5,
///                       scaled to respond 1 on a clean match, bias -1/2
///   conv2 5x5/1, 2 ch:  ch0 sums the 25 sub-matches at their offsets
///   conv3 3x3/1 pad 1:  center tap, theoretical RF 20 px
struct PlantedDetector {
  Model model;
  int side = 48;
  int pattern_side = 16;
  std::vector<std::int8_t> cells;  // 8 x 8 signs, row-major
  float amplitude = 90.0f;         // pattern pixels are 128 +- amplitude
  float planted_response = 0.0f;   // conv3:0 on a clean pattern
  Unit unit{"conv3", 0};

  /// Pixel value of the pattern at (x, y) inside it.
  std::uint8_t pattern_pixel(int x, int y) const;
};

PlantedDetector make_planted_detector(std::uint64_t seed = 1, int side = 48);

struct PlantedImage {
  Image image;
  std::optional<Box> truth;  // pattern box, inclusive
};

/// Background of per-pixel noise around 128, optionally with the pattern
/// pasted at a random even offset.
PlantedImage planted_image(const PlantedDetector& detector, Rng& rng, bool with_pattern);

}  // namespace scopelens
