#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scopelens/image.hpp"

namespace scopelens {

/// 8-bit RGB PNG whose zlib stream uses only stored (uncompressed) deflate
/// blocks and filter type 0 on every row. Output is a pure function of the pixels.
std::vector<std::uint8_t> encode_png(const Image& img);

/// Non-interlaced grayscale PNG, 8 or 16 bits per sample.
GrayImage decode_png_gray(std::span<const std::uint8_t> bytes);
/// Non-interlaced 8-bit grayscale, RGB or RGBA PNG; alpha is dropped.
Image decode_png_rgb(std::span<const std::uint8_t> bytes);

/// RGB image from a .png or netpbm .ppm file, sniffed by signature.
Image load_image(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

/// Label image from a .png (grayscale) or netpbm .pgm file.
GrayImage load_label_image(const std::filesystem::path& path);

}  // namespace scopelens
