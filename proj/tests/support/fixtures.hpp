#pragma once

// Small hand-built models and synthetic inputs shared by unit and acceptance tests.

#include <map>
#include <utility>
#include <vector>

#include "scopelens/forward.hpp"
#include "scopelens/image.hpp"
#include "scopelens/rng.hpp"
#include "scopelens/segments.hpp"

namespace fixture {

using namespace scopelens;

/// Two-class classifier on side x side RGB input: class 0 ("red") scores the
/// total red excess r - g, class 1 ("green") the total green excess.
inline Model color_classifier(int side) {
  NetworkSpec spec("color", {3, side, side},
                   {LayerSpec{.name = "c", .kind = LayerKind::Conv, .channels_out = 2},
                    LayerSpec{.name = "r", .kind = LayerKind::Relu},
                    LayerSpec{.name = "fc", .kind = LayerKind::Fc, .channels_out = 2},
                    LayerSpec{.name = "prob", .kind = LayerKind::Softmax}},
                   {"red", "green"});
  WeightStore w;
  Tensor k({2, 3, 1, 1});
  k.at(0, 0, 0, 0) = 1.0f;
  k.at(0, 1, 0, 0) = -1.0f;
  k.at(1, 0, 0, 0) = -1.0f;
  k.at(1, 1, 0, 0) = 1.0f;
  w.emplace("c.w", k);
  w.emplace("c.b", Tensor({2}));
  const int plane = side * side;
  const float alpha = 4.0f / (static_cast<float>(plane) * 100.0f);
  Tensor fc({2, 2 * plane});
  for (int i = 0; i < plane; ++i) {
    fc[i] = alpha;
    fc[2 * plane + plane + i] = alpha;
  }
  w.emplace("fc.w", fc);
  w.emplace("fc.b", Tensor({2}));
  return Model(std::move(spec), std::move(w));
}

/// Two-class texture classifier: class 0 ("textured") scores alpha times the
/// total absolute red-channel Laplacian; class 1 ("smooth") is the constant
/// alpha * threshold.
inline Model texture_classifier(int side, float threshold, float alpha) {
  NetworkSpec spec("texture", {3, side, side},
                   {LayerSpec{.name = "c", .kind = LayerKind::Conv, .kernel = 3, .channels_out = 2},
                    LayerSpec{.name = "r", .kind = LayerKind::Relu},
                    LayerSpec{.name = "fc", .kind = LayerKind::Fc, .channels_out = 2},
                    LayerSpec{.name = "prob", .kind = LayerKind::Softmax}},
                   {"textured", "smooth"});
  WeightStore w;
  Tensor k({2, 3, 3, 3});
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx) {
      const float v = ky == 1 && kx == 1 ? 8.0f : -1.0f;
      k.at(0, 0, ky, kx) = v;
      k.at(1, 0, ky, kx) = -v;
    }
  w.emplace("c.w", k);
  w.emplace("c.b", Tensor({2}));
  const int plane = (side - 2) * (side - 2);
  Tensor fc({2, 2 * plane});
  for (int i = 0; i < 2 * plane; ++i) fc[i] = alpha;
  w.emplace("fc.w", fc);
  w.emplace("fc.b", Tensor({2}, std::vector<float>{0.0f, alpha * threshold}));
  return Model(std::move(spec), std::move(w));
}

struct Scene {
  Image image;
  SegmentMap segments;
};

/// Grid-segmented image with one random color per segment, plus a little
/// per-pixel noise. Segments are named by their dominant hue.
inline Scene color_scene(Rng& rng, int side, int cells) {
  SegmentMap grid = grid_segments(side, side, cells);
  std::vector<Rgb> colors;
  std::map<int, std::string> names;
  for (int l = 0; l < grid.label_count(); ++l) {
    const auto pick = rng.below(3);
    const int base = 60 + static_cast<int>(rng.below(120));
    const int delta = 10 + static_cast<int>(rng.below(60));
    Rgb c{static_cast<std::uint8_t>(base), static_cast<std::uint8_t>(base), static_cast<std::uint8_t>(base)};
    if (pick == 0) c.r = static_cast<std::uint8_t>(base + delta);
    if (pick == 1) c.g = static_cast<std::uint8_t>(base + delta);
    colors.push_back(c);
    names[l] = pick == 0 ? "red" : pick == 1 ? "green" : "gray";
  }
  Image img(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      Rgb c = colors[grid.at(x, y)];
      c.b = static_cast<std::uint8_t>(c.b + rng.below(5));
      img.at(x, y) = c;
    }
  return {std::move(img), SegmentMap(side, side, grid.labels(), std::move(names))};
}

}  // namespace fixture
