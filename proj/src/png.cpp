#include "scopelens/png.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <string>

#include <zlib.h>

#include "scopelens/error.hpp"

namespace scopelens {

namespace {

constexpr std::array<std::uint8_t, 8> kSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

void chunk(std::vector<std::uint8_t>& out, const char* type, std::span<const std::uint8_t> data) {
  put32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put32(out, static_cast<std::uint32_t>(crc));
}

struct Decoded {
  int width = 0;
  int height = 0;
  int depth = 0;
  int color = 0;
  int channels = 0;
  std::vector<std::uint8_t> raw;  // unfiltered scanlines, no filter bytes
};

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

Decoded decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kSignature.begin(), kSignature.end(), bytes.begin())) {
    throw FormatError("not a PNG file");
  }
  Decoded d;
  std::vector<std::uint8_t> idat;
  bool seen_header = false, seen_end = false;
  std::size_t at = 8;
  while (!seen_end) {
    if (at + 12 > bytes.size()) throw FormatError("truncated PNG chunk at offset " + std::to_string(at));
    const std::uint32_t len = get32(bytes, at);
    if (len > bytes.size() - at - 12) throw FormatError("PNG chunk overruns file at offset " + std::to_string(at));
    const std::string type(bytes.begin() + static_cast<std::ptrdiff_t>(at + 4),
                           bytes.begin() + static_cast<std::ptrdiff_t>(at + 8));
    const auto data = bytes.subspan(at + 8, len);
    const uLong crc = crc32(0L, bytes.data() + at + 4, static_cast<uInt>(len + 4));
    if (crc != get32(bytes, at + 8 + len)) throw FormatError("PNG CRC mismatch in " + type + " chunk");
    if (type == "IHDR") {
      if (len != 13) throw FormatError("bad IHDR length");
      d.width = static_cast<int>(get32(data, 0));
      d.height = static_cast<int>(get32(data, 4));
      d.depth = data[8];
      d.color = data[9];
      if (data[10] != 0 || data[11] != 0) throw FormatError("unsupported PNG compression or filter method");
      if (data[12] != 0) throw FormatError("interlaced PNG is not supported");
      seen_header = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (type == "IEND") {
      seen_end = true;
    } else if (type == "PLTE") {
      throw FormatError("palette PNG is not supported");
    }
    at += 12 + len;
  }
  if (!seen_header) throw FormatError("PNG without IHDR");
  if (d.width < 1 || d.height < 1 || d.width > (1 << 20) || d.height > (1 << 20)) {
    throw FormatError("PNG dimensions out of range");
  }
  switch (d.color) {
    case 0: d.channels = 1; break;
    case 2: d.channels = 3; break;
    case 4: d.channels = 2; break;
    case 6: d.channels = 4; break;
    default: throw FormatError("unsupported PNG colour type " + std::to_string(d.color));
  }
  if (d.depth != 8 && d.depth != 16) throw FormatError("unsupported PNG bit depth " + std::to_string(d.depth));

  const std::size_t bpp = static_cast<std::size_t>(d.channels) * (d.depth / 8);
  const std::size_t stride = bpp * static_cast<std::size_t>(d.width);
  std::vector<std::uint8_t> filtered((stride + 1) * static_cast<std::size_t>(d.height));
  uLongf size = static_cast<uLongf>(filtered.size());
  const int rc = uncompress(filtered.data(), &size, idat.data(), static_cast<uLong>(idat.size()));
  if (rc != Z_OK || size != filtered.size()) throw FormatError("corrupt PNG image data");

  d.raw.resize(stride * static_cast<std::size_t>(d.height));
  for (std::size_t y = 0; y < static_cast<std::size_t>(d.height); ++y) {
    const std::uint8_t filter = filtered[y * (stride + 1)];
    const std::uint8_t* in = &filtered[y * (stride + 1) + 1];
    std::uint8_t* row = &d.raw[y * stride];
    const std::uint8_t* up = y ? &d.raw[(y - 1) * stride] : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= bpp ? row[i - bpp] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= bpp) ? up[i - bpp] : 0;
      int pred = 0;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = paeth(a, b, c); break;
        default: throw FormatError("bad PNG filter type " + std::to_string(filter));
      }
      row[i] = static_cast<std::uint8_t>(in[i] + pred);
    }
  }
  return d;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.width() < 1 || img.height() < 1) throw PreconditionError("cannot encode an empty image");
  const std::size_t stride = 3 * static_cast<std::size_t>(img.width());
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<std::size_t>(img.height()));
  for (int y = 0; y < img.height(); ++y) {
    raw.push_back(0);
    for (int x = 0; x < img.width(); ++x) {
      const Rgb p = img.at(x, y);
      raw.insert(raw.end(), {p.r, p.g, p.b});
    }
  }

  std::vector<std::uint8_t> z{0x78, 0x01};
  constexpr std::size_t kBlock = 65535;
  for (std::size_t off = 0; off < raw.size() || off == 0; off += kBlock) {
    const std::size_t n = std::min(kBlock, raw.size() - off);
    const bool last = off + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<std::uint8_t>(n & 0xff));
    z.push_back(static_cast<std::uint8_t>(n >> 8));
    z.push_back(static_cast<std::uint8_t>(~n & 0xff));
    z.push_back(static_cast<std::uint8_t>((~n >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(off), raw.begin() + static_cast<std::ptrdiff_t>(off + n));
    if (last) break;
  }
  put32(z, static_cast<std::uint32_t>(adler32(1L, raw.data(), static_cast<uInt>(raw.size()))));

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put32(ihdr, static_cast<std::uint32_t>(img.width()));
  put32(ihdr, static_cast<std::uint32_t>(img.height()));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", z);
  chunk(out, "IEND", {});
  return out;
}

GrayImage decode_png_gray(std::span<const std::uint8_t> bytes) {
  Decoded d = decode(bytes);
  if (d.color != 0) throw FormatError("expected a grayscale PNG");
  GrayImage g{d.width, d.height, d.depth == 16 ? 65535 : 255, {}};
  g.samples.resize(static_cast<std::size_t>(d.width) * d.height);
  for (std::size_t i = 0; i < g.samples.size(); ++i) {
    g.samples[i] = d.depth == 16 ? static_cast<std::uint16_t>((d.raw[2 * i] << 8) | d.raw[2 * i + 1]) : d.raw[i];
  }
  return g;
}

Image decode_png_rgb(std::span<const std::uint8_t> bytes) {
  Decoded d = decode(bytes);
  if (d.depth != 8) throw FormatError("expected an 8-bit PNG");
  Image img(d.width, d.height);
  const std::size_t ch = static_cast<std::size_t>(d.channels);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::uint8_t* p = &d.raw[(static_cast<std::size_t>(y) * d.width + x) * ch];
      img.at(x, y) = ch >= 3 ? Rgb{p[0], p[1], p[2]} : Rgb{p[0], p[0], p[0]};
    }
  }
  return img;
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    if (bytes.size() >= 8 && std::equal(kSignature.begin(), kSignature.end(), bytes.begin())) {
      return decode_png_rgb(bytes);
    }
    return decode_ppm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_png(const Image& img, const std::filesystem::path& path) { write_file(path, encode_png(img)); }

GrayImage load_label_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    if (bytes.size() >= 8 && std::equal(kSignature.begin(), kSignature.end(), bytes.begin())) {
      return decode_png_gray(bytes);
    }
    return decode_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace scopelens
