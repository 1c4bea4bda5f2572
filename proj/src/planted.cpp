#include "scopelens/planted.hpp"

#include <algorithm>
#include <cmath>

#include "scopelens/error.hpp"

namespace scopelens {

namespace {

constexpr int kCells = 8;
constexpr int kWindow = 8;
constexpr int kOffsets = 5;
constexpr float kMean = 128.0f;
constexpr float kAmplitude = 90.0f;

std::uint8_t pattern_value(const std::vector<std::int8_t>& cells, float amplitude, int x, int y) {
  const int s = cells[static_cast<std::size_t>(y / 2) * kCells + x / 2];
  return static_cast<std::uint8_t>(std::lround(kMean + s * amplitude));
}

}  // namespace

std::uint8_t PlantedDetector::pattern_pixel(int x, int y) const { return pattern_value(cells, amplitude, x, y); }

PlantedDetector make_planted_detector(std::uint64_t seed, int side) {
  if (side < 24 || side % 2 != 0) throw PreconditionError("planted detector side must be even and >= 24");
  Rng rng(seed);
  std::vector<std::int8_t> cells(kCells * kCells);
  for (auto& c : cells) c = rng.below(2) ? 1 : -1;

  std::vector<LayerSpec> layers{
      {.name = "conv1", .kind = LayerKind::Conv, .kernel = kWindow, .stride = 2, .channels_out = kOffsets * kOffsets},
      {.name = "relu1", .kind = LayerKind::Relu},
      {.name = "conv2", .kind = LayerKind::Conv, .kernel = kOffsets, .channels_out = 2},
      {.name = "relu2", .kind = LayerKind::Relu},
      {.name = "conv3", .kind = LayerKind::Conv, .kernel = 3, .padding = 1, .channels_out = 2},
      {.name = "relu3", .kind = LayerKind::Relu},
      {.name = "fc", .kind = LayerKind::Fc, .channels_out = 2},
      {.name = "prob", .kind = LayerKind::Softmax},
  };
  NetworkSpec spec("planted-detector", {3, side, side}, layers, {"pattern", "background"}, {kMean, kMean, kMean});

  WeightStore w;
  Tensor k1({kOffsets * kOffsets, 3, kWindow, kWindow});
  Tensor b1({kOffsets * kOffsets}, -0.5f);
  for (int j = 0; j < kOffsets; ++j) {
    for (int i = 0; i < kOffsets; ++i) {
      const int ch = j * kOffsets + i;
      std::vector<double> t(kWindow * kWindow);
      double mean = 0;
      for (int y = 0; y < kWindow; ++y) {
        for (int x = 0; x < kWindow; ++x) {
          t[y * kWindow + x] = pattern_value(cells, kAmplitude, 2 * i + x, 2 * j + y) - kMean;
          mean += t[y * kWindow + x];
        }
      }
      mean /= kWindow * kWindow;
      double norm2 = 0;
      for (double& v : t) {
        v -= mean;
        norm2 += v * v;
      }
      // Three identical channels: a clean match gives 3 * |t|^2 * scale = 1.
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < kWindow; ++y) {
          for (int x = 0; x < kWindow; ++x) k1.at(ch, c, y, x) = static_cast<float>(t[y * kWindow + x] / (3 * norm2));
        }
      }
    }
  }
  w.emplace("conv1.w", k1);
  w.emplace("conv1.b", b1);

  const float full = 0.5f * kOffsets * kOffsets;
  Tensor k2({2, kOffsets * kOffsets, kOffsets, kOffsets});
  for (int j = 0; j < kOffsets; ++j) {
    for (int i = 0; i < kOffsets; ++i) {
      k2.at(0, j * kOffsets + i, j, i) = 1.0f;
      for (int y = 0; y < kOffsets; ++y) {
        for (int x = 0; x < kOffsets; ++x) k2.at(1, j * kOffsets + i, y, x) = 1.0f / (kOffsets * kOffsets);
      }
    }
  }
  w.emplace("conv2.w", k2);
  w.emplace("conv2.b", Tensor({2}, std::vector<float>{-0.5f * full, 0.0f}));

  Tensor k3({2, 2, 3, 3});
  k3.at(0, 0, 1, 1) = 1.0f;
  k3.at(1, 1, 1, 1) = 1.0f;
  w.emplace("conv3.w", k3);
  w.emplace("conv3.b", Tensor({2}));

  const FeatureShape f3 = spec.output_shape(spec.index_of("relu3"));
  Tensor fc({2, static_cast<int>(f3.size())});
  for (int i = 0; i < f3.height * f3.width; ++i) fc[i] = 1.0f;
  w.emplace("fc.w", fc);
  w.emplace("fc.b", Tensor({2}, std::vector<float>{0.0f, 0.25f * full}));

  PlantedDetector d{Model(std::move(spec), std::move(w))};
  d.side = side;
  d.cells = std::move(cells);
  d.amplitude = kAmplitude;
  d.planted_response = 0.5f * full;
  return d;
}

PlantedImage planted_image(const PlantedDetector& d, Rng& rng, bool with_pattern) {
  PlantedImage out;
  out.image = Image(d.side, d.side);
  for (int y = 0; y < d.side; ++y) {
    for (int x = 0; x < d.side; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.image.set_channel(x, y, c, static_cast<std::uint8_t>(kMean - 24 + static_cast<int>(rng.below(49))));
      }
    }
  }
  if (!with_pattern) return out;
  const int slots = (d.side - d.pattern_side) / 2 + 1;
  const int px = 2 * static_cast<int>(rng.below(slots));
  const int py = 2 * static_cast<int>(rng.below(slots));
  for (int y = 0; y < d.pattern_side; ++y) {
    for (int x = 0; x < d.pattern_side; ++x) {
      const int noise = static_cast<int>(rng.below(17)) - 8;
      const int v = std::clamp(d.pattern_pixel(x, y) + noise, 0, 255);
      out.image.at(px + x, py + y) = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v),
                                      static_cast<std::uint8_t>(v)};
    }
  }
  out.truth = Box{px, py, px + d.pattern_side - 1, py + d.pattern_side - 1};
  return out;
}

}  // namespace scopelens
