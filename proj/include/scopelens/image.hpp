#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scopelens/tensor.hpp"

namespace scopelens {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// 8-bit RGB image, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});
  Image(int width, int height, std::vector<Rgb> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Rgb& at(int x, int y) noexcept { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const Rgb& at(int x, int y) const noexcept { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t channel(int x, int y, int c) const noexcept;
  void set_channel(int x, int y, int c, std::uint8_t v) noexcept;
  const std::vector<Rgb>& pixels() const noexcept { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

/// Binary pixel mask with the same geometry conventions as Image.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool at(int x, int y) const noexcept { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) noexcept { bits_[static_cast<std::size_t>(y) * width_ + x] = v; }
  std::size_t count() const noexcept;
  bool none() const noexcept { return count() == 0; }
  void fill_rect(int x0, int y0, int x1, int y1);  // inclusive corners, clipped
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  bool operator==(const Mask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Single-channel image with up to 16 bits per sample (PGM payloads).
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> samples;
};

// Netpbm codecs. Decoders throw FormatError with the failing byte offset.
Image decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Image& img);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);

/// Scales nonnegative floats to 8-bit gray (max -> 255) for inspection dumps.
GrayImage to_gray8(std::span<const float> values, int width, int height);
GrayImage to_gray8(const Mask& mask);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Image load_ppm(const std::filesystem::path& path);
void save_ppm(const Image& img, const std::filesystem::path& path);

/// Default network input side; (227 - 11) / 4 + 1 = 55 matches the conv1 map.
inline constexpr int kDefaultInputSide = 227;

using ChannelMean = std::array<float, 3>;

/// Bilinear resize (half-pixel centers, edge clamp) to side x side, then
/// channel-major 3 x side x side output of pixel - mean[c]. No scaling.
Tensor preprocess(const Image& img, int side = kDefaultInputSide, const ChannelMean& mean = {0, 0, 0});

/// Inverse of preprocess at native size: clamps and rounds back to 8-bit.
Image tensor_to_image(const Tensor& chw, const ChannelMean& mean = {0, 0, 0});

}  // namespace scopelens
