#include "scopelens/weights.hpp"

#include <bit>
#include <cmath>

#include "scopelens/error.hpp"
#include "scopelens/image.hpp"
#include "scopelens/rng.hpp"

namespace scopelens {

std::string weight_blob(const LayerSpec& layer) { return layer.name + ".w"; }
std::string bias_blob(const LayerSpec& layer) { return layer.name + ".b"; }

std::vector<int> expected_weight_shape(const NetworkSpec& spec, std::size_t index) {
  const LayerSpec& l = spec.layer(index);
  const FeatureShape& in = spec.layer_input_shape(index);
  if (l.kind == LayerKind::Conv) return {l.channels_out, in.channels / l.groups, l.kernel, l.kernel};
  if (l.kind == LayerKind::Fc) return {l.channels_out, static_cast<int>(in.size())};
  throw UnsupportedLayerError("layer '" + l.name + "' has no weights");
}

void validate_weights(const NetworkSpec& spec, const WeightStore& store) {
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const LayerSpec& l = spec.layer(i);
    if (!l.has_weights()) continue;
    const std::vector<int> want_w = expected_weight_shape(spec, i);
    const std::vector<int> want_b = {l.channels_out};
    for (const auto& [name, want] : {std::pair{weight_blob(l), want_w}, std::pair{bias_blob(l), want_b}}) {
      auto it = store.find(name);
      if (it == store.end()) throw ValidationError("missing weight blob '" + name + "'");
      if (it->second.shape() != want) {
        throw ShapeError("weight blob '" + name + "' has shape " + shape_string(it->second.shape()) + ", expected " +
                         shape_string(want));
      }
    }
  }
}

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void context(std::string blob) { blob_ = std::move(blob); }

  std::uint32_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint32_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw FormatError("weight file truncated at offset " + std::to_string(pos_) +
                        (blob_.empty() ? std::string() : " while reading blob '" + blob_ + "'"));
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::string blob_;
};

constexpr std::string_view kMagic = "NNW1";

}  // namespace

std::vector<std::uint8_t> encode_blobs(const WeightStore& store) {
  Writer w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store) {
    if (name.size() > 0xffff) throw ValidationError("blob name too long: " + name.substr(0, 32));
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values()) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return w.take();
}

WeightStore decode_blobs(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || r.str(4) != kMagic) throw FormatError("bad weight file magic (expected NNW1)");
  const std::uint32_t count = r.uint(4);
  WeightStore store;
  for (std::uint32_t b = 0; b < count; ++b) {
    r.context("#" + std::to_string(b));
    const std::size_t len = r.uint(2);
    std::string name = r.str(len);
    r.context(name);
    const int rank = static_cast<int>(r.uint(1));
    std::vector<int> shape(rank);
    std::size_t n = 1;
    for (int& d : shape) {
      const std::uint32_t v = r.uint(4);
      if (v == 0 || v > 0x7fffffffu) throw FormatError("blob '" + name + "' has invalid dimension");
      d = static_cast<int>(v);
      n *= v;
    }
    if (n > (bytes.size() / 4)) throw FormatError("weight file truncated while reading blob '" + name + "'");
    std::vector<float> data(n);
    for (float& v : data) v = std::bit_cast<float>(r.uint(4));
    if (!store.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw FormatError("duplicate blob '" + name + "'");
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after last blob");
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  write_file(path, encode_blobs(store));
}

WeightStore load_blobs(const std::filesystem::path& path) { return decode_blobs(read_file(path)); }

WeightStore load_weights(const std::filesystem::path& path, const NetworkSpec& spec) {
  WeightStore store = load_blobs(path);
  validate_weights(spec, store);
  return store;
}

WeightStore random_weights(const NetworkSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore store;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const LayerSpec& l = spec.layer(i);
    if (!l.has_weights()) continue;
    Tensor w(expected_weight_shape(spec, i));
    const double fan_in = static_cast<double>(w.item_size());
    const double sd = std::sqrt(2.0 / fan_in);
    for (float& v : w.values()) v = static_cast<float>(rng.normal() * sd);
    store.emplace(weight_blob(l), std::move(w));
    store.emplace(bias_blob(l), Tensor({l.channels_out}));
  }
  return store;
}

}  // namespace scopelens
