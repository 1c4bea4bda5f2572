#include "scopelens/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "scopelens/error.hpp"

namespace scopelens {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw PreconditionError("image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) throw PreconditionError("image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw PreconditionError("pixel count does not match image dimensions");
  }
}

std::uint8_t Image::channel(int x, int y, int c) const noexcept {
  const Rgb& p = at(x, y);
  return c == 0 ? p.r : (c == 1 ? p.g : p.b);
}

void Image::set_channel(int x, int y, int c, std::uint8_t v) noexcept {
  Rgb& p = at(x, y);
  (c == 0 ? p.r : (c == 1 ? p.g : p.b)) = v;
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw PreconditionError("mask dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void Mask::fill_rect(int x0, int y0, int x1, int y1) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width_ - 1);
  y1 = std::min(y1, height_ - 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) set(x, y);
  }
}

namespace {

// Cursor over a netpbm header: whitespace-separated ASCII tokens with
// '#' comments running to end of line.
class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000) throw FormatError(std::string(what) + " too large at offset " + std::to_string(start));
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("expected ") + what + " at offset " + std::to_string(start));
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void expect_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("expected whitespace before raster at offset " + std::to_string(pos_));
    }
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_magic(std::span<const std::uint8_t> bytes, char kind) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != static_cast<std::uint8_t>(kind)) {
    throw FormatError(std::string("bad magic at offset 0: expected P") + kind);
  }
}

std::string header(char kind, int w, int h, int maxval) {
  return std::string("P") + kind + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n" +
         std::to_string(maxval) + "\n";
}

}  // namespace

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, '6');
  HeaderReader rd(bytes.subspan(2));
  const int w = rd.read_int("width");
  const int h = rd.read_int("height");
  const std::size_t maxval_at = rd.pos() + 2;
  const int maxval = rd.read_int("maxval");
  if (maxval != 255) {
    throw FormatError("unsupported maxval " + std::to_string(maxval) + " at offset " + std::to_string(maxval_at));
  }
  rd.expect_single_space();
  if (w < 1 || h < 1) throw FormatError("zero image dimension in header");
  const std::size_t start = rd.pos() + 2;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - start < need) {
    throw FormatError("truncated PPM payload at offset " + std::to_string(bytes.size()) + ": expected " +
                      std::to_string(need) + " bytes from offset " + std::to_string(start));
  }
  std::vector<Rgb> px(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = {bytes[start + 3 * i], bytes[start + 3 * i + 1], bytes[start + 3 * i + 2]};
  }
  return Image(w, h, std::move(px));
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string hdr = header('6', img.width(), img.height(), 255);
  std::vector<std::uint8_t> out(hdr.begin(), hdr.end());
  out.reserve(out.size() + img.pixels().size() * 3);
  for (const Rgb& p : img.pixels()) {
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, '5');
  HeaderReader rd(bytes.subspan(2));
  GrayImage g;
  g.width = rd.read_int("width");
  g.height = rd.read_int("height");
  const std::size_t maxval_at = rd.pos() + 2;
  g.maxval = rd.read_int("maxval");
  if (g.maxval < 1 || g.maxval > 65535) {
    throw FormatError("unsupported maxval " + std::to_string(g.maxval) + " at offset " + std::to_string(maxval_at));
  }
  rd.expect_single_space();
  if (g.width < 1 || g.height < 1) throw FormatError("zero image dimension in header");
  const std::size_t start = rd.pos() + 2;
  const std::size_t bps = g.maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(g.width) * g.height;
  if (bytes.size() - start < count * bps) {
    throw FormatError("truncated PGM payload at offset " + std::to_string(bytes.size()));
  }
  g.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    g.samples[i] = bps == 1 ? bytes[start + i]
                            : static_cast<std::uint16_t>((bytes[start + 2 * i] << 8) | bytes[start + 2 * i + 1]);
  }
  return g;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string hdr = header('5', img.width, img.height, img.maxval);
  std::vector<std::uint8_t> out(hdr.begin(), hdr.end());
  const bool wide = img.maxval > 255;
  for (std::uint16_t s : img.samples) {
    if (wide) out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  return out;
}

GrayImage to_gray8(std::span<const float> values, int width, int height) {
  GrayImage g{width, height, 255, {}};
  float peak = 0.0f;
  for (float v : values) peak = std::max(peak, v);
  g.samples.reserve(values.size());
  for (float v : values) {
    const float s = peak > 0 ? std::clamp(v / peak, 0.0f, 1.0f) * 255.0f : 0.0f;
    g.samples.push_back(static_cast<std::uint16_t>(std::lround(s)));
  }
  return g;
}

GrayImage to_gray8(const Mask& mask) {
  GrayImage g{mask.width(), mask.height(), 255, {}};
  g.samples.reserve(mask.bits().size());
  for (auto b : mask.bits()) g.samples.push_back(b ? 255 : 0);
  return g;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image load_ppm(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_ppm(const Image& img, const std::filesystem::path& path) { write_file(path, encode_ppm(img)); }

Tensor preprocess(const Image& img, int side, const ChannelMean& mean) {
  if (side < 1) throw PreconditionError("preprocess: side must be >= 1");
  Tensor out({3, side, side});
  const double sx = static_cast<double>(img.width()) / side;
  const double sy = static_cast<double>(img.height()) / side;

  // Source coordinate and blend weight per output row/column, shared by channels.
  struct Tap {
    int lo, hi;
    double t;
  };
  auto taps = [](int n, double scale, int limit) {
    std::vector<Tap> v(n);
    for (int i = 0; i < n; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(limit - 1));
      const int lo = static_cast<int>(std::floor(s));
      const int hi = std::min(lo + 1, limit - 1);
      v[i] = {lo, hi, s - lo};
    }
    return v;
  };
  const auto xs = taps(side, sx, img.width());
  const auto ys = taps(side, sy, img.height());

  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < side; ++y) {
      const Tap& ty = ys[y];
      for (int x = 0; x < side; ++x) {
        const Tap& tx = xs[x];
        // lerp as a + t * (b - a) so flat regions reproduce their value exactly
        const double p00 = img.channel(tx.lo, ty.lo, c), p10 = img.channel(tx.hi, ty.lo, c);
        const double p01 = img.channel(tx.lo, ty.hi, c), p11 = img.channel(tx.hi, ty.hi, c);
        const double top = p00 + tx.t * (p10 - p00);
        const double bot = p01 + tx.t * (p11 - p01);
        const double v = top + ty.t * (bot - top);
        out[(static_cast<std::size_t>(c) * side + y) * side + x] = static_cast<float>(v - mean[c]);
      }
    }
  }
  return out;
}

Image tensor_to_image(const Tensor& chw, const ChannelMean& mean) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("tensor_to_image expects 3 x H x W");
  const int h = chw.dim(1), w = chw.dim(2);
  Image img(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float v = chw[(static_cast<std::size_t>(c) * h + y) * w + x] + mean[c];
        img.set_channel(x, y, c, static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
      }
    }
  }
  return img;
}

}  // namespace scopelens
