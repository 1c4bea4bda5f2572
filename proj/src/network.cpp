#include "scopelens/network.hpp"

#include <charconv>
#include <set>

#include <json.hpp>

#include "scopelens/error.hpp"

namespace scopelens {

using nlohmann::json;

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Relu: return "relu";
    case LayerKind::Lrn: return "lrn";
    case LayerKind::Fc: return "fc";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

std::optional<LayerKind> layer_kind_from_string(std::string_view name) {
  for (LayerKind k : {LayerKind::Conv, LayerKind::MaxPool, LayerKind::Relu, LayerKind::Lrn, LayerKind::Fc,
                      LayerKind::Softmax}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void fail(const LayerSpec& l, const std::string& what) {
  throw ValidationError("layer '" + l.name + "': " + what);
}

int spatial_out(const LayerSpec& l, int in) {
  const int span = in + 2 * l.padding - l.kernel;
  if (span < 0) fail(l, "kernel " + std::to_string(l.kernel) + " larger than padded input " + std::to_string(in));
  if (span % l.stride != 0) {
    fail(l, "non-integer output size (" + std::to_string(in) + " + 2*" + std::to_string(l.padding) + " - " +
                std::to_string(l.kernel) + ") / " + std::to_string(l.stride));
  }
  return span / l.stride + 1;
}

FeatureShape infer_shape(const LayerSpec& l, const FeatureShape& in) {
  switch (l.kind) {
    case LayerKind::Conv: {
      if (l.kernel < 1) fail(l, "kernel must be >= 1");
      if (l.stride < 1) fail(l, "stride must be >= 1");
      if (l.padding < 0) fail(l, "padding must be >= 0");
      if (l.channels_out < 1) fail(l, "out channels must be >= 1");
      if (l.groups < 1 || in.channels % l.groups != 0 || l.channels_out % l.groups != 0) {
        fail(l, "groups " + std::to_string(l.groups) + " must divide input " + std::to_string(in.channels) +
                    " and output " + std::to_string(l.channels_out) + " channels");
      }
      if (in.height != in.width) fail(l, "spatial layers require square inputs");
      const int s = spatial_out(l, in.height);
      return {l.channels_out, s, s};
    }
    case LayerKind::MaxPool: {
      if (l.kernel < 1) fail(l, "kernel must be >= 1");
      if (l.stride < 1) fail(l, "stride must be >= 1");
      if (l.padding < 0 || l.padding >= l.kernel) fail(l, "padding must be in [0, kernel)");
      if (in.height != in.width) fail(l, "spatial layers require square inputs");
      const int s = spatial_out(l, in.height);
      return {in.channels, s, s};
    }
    case LayerKind::Relu:
    case LayerKind::Softmax:
      return in;
    case LayerKind::Lrn:
      if (l.lrn.size < 1 || l.lrn.size % 2 == 0) fail(l, "lrn size must be a positive odd number");
      if (!(l.lrn.k > 0)) fail(l, "lrn k must be positive");
      return in;
    case LayerKind::Fc:
      if (l.channels_out < 1) fail(l, "out channels must be >= 1");
      return {l.channels_out, 1, 1};
  }
  fail(l, "unknown kind");
}

}  // namespace

NetworkSpec::NetworkSpec(std::string name, FeatureShape input, std::vector<LayerSpec> layers,
                         std::vector<std::string> class_labels, ChannelMean mean)
    : name_(std::move(name)),
      input_(input),
      layers_(std::move(layers)),
      class_labels_(std::move(class_labels)),
      mean_(mean) {
  if (layers_.empty()) throw ValidationError("network has no layers");
  if (input_.channels < 1 || input_.height < 1 || input_.width < 1) {
    throw ValidationError("input shape must be positive");
  }
  std::set<std::string> seen;
  FeatureShape cur = input_;
  shapes_.reserve(layers_.size());
  for (const LayerSpec& l : layers_) {
    if (l.name.empty()) throw ValidationError("layer with empty name");
    if (!seen.insert(l.name).second) fail(l, "duplicate layer name");
    cur = infer_shape(l, cur);
    shapes_.push_back(cur);
  }
  if (!class_labels_.empty() && static_cast<int>(class_labels_.size()) != shapes_.back().channels) {
    throw ValidationError("class label count " + std::to_string(class_labels_.size()) +
                          " does not match output channels " + std::to_string(shapes_.back().channels));
  }
}

std::optional<std::size_t> NetworkSpec::find(std::string_view name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t NetworkSpec::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ValidationError("unknown layer '" + std::string(name) + "'");
}

std::size_t NetworkSpec::feature_index(std::size_t i) const {
  if (!layers_.at(i).has_weights()) return i;
  while (i + 1 < layers_.size() && layers_[i + 1].kind == LayerKind::Relu) ++i;
  return i;
}

std::string NetworkSpec::class_label(int index) const {
  if (index >= 0 && index < static_cast<int>(class_labels_.size())) return class_labels_[index];
  return "class" + std::to_string(index);
}

namespace {

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw FormatError(std::string("'") + key + "' must be an integer");
  return j[key].get<int>();
}

float get_float(const json& j, const char* key, float fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw FormatError(std::string("'") + key + "' must be a number");
  return j[key].get<float>();
}

}  // namespace

NetworkSpec parse_netspec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("netspec: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("netspec: top level must be an object");
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw FormatError("netspec: missing 'layers' array");

  FeatureShape input{3, kDefaultInputSide, kDefaultInputSide};
  if (doc.contains("input")) {
    const json& in = doc["input"];
    const int side = get_int(in, "side", kDefaultInputSide);
    input = {get_int(in, "channels", 3), side, side};
  }

  std::vector<LayerSpec> layers;
  for (const json& jl : doc["layers"]) {
    if (!jl.is_object()) throw FormatError("netspec: layer entries must be objects");
    LayerSpec l;
    l.name = jl.value("name", std::string());
    const std::string kind = jl.value("kind", std::string());
    auto k = layer_kind_from_string(kind);
    if (!k) throw ValidationError("layer '" + l.name + "': unknown kind '" + kind + "'");
    l.kind = *k;
    l.kernel = get_int(jl, "kernel", 1);
    l.stride = get_int(jl, "stride", 1);
    l.padding = get_int(jl, "pad", 0);
    l.channels_out = get_int(jl, "out", 0);
    l.groups = get_int(jl, "groups", 1);
    l.lrn.size = get_int(jl, "size", 5);
    l.lrn.alpha = get_float(jl, "alpha", 1e-4f);
    l.lrn.beta = get_float(jl, "beta", 0.75f);
    l.lrn.k = get_float(jl, "k", 2.0f);
    layers.push_back(std::move(l));
  }

  std::vector<std::string> classes;
  if (doc.contains("classes")) classes = doc["classes"].get<std::vector<std::string>>();
  ChannelMean mean{0, 0, 0};
  if (doc.contains("mean")) {
    const auto m = doc["mean"].get<std::vector<float>>();
    if (m.size() != 3) throw FormatError("netspec: 'mean' must have 3 entries");
    mean = {m[0], m[1], m[2]};
  }
  return NetworkSpec(doc.value("name", std::string("network")), input, std::move(layers), std::move(classes), mean);
}

NetworkSpec load_netspec(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_netspec(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string netspec_to_json(const NetworkSpec& spec) {
  json doc;
  doc["name"] = spec.name();
  doc["input"] = {{"side", spec.input_side()}, {"channels", spec.input_shape().channels}};
  const auto& m = spec.mean();
  if (m != ChannelMean{0, 0, 0}) doc["mean"] = {m[0], m[1], m[2]};
  if (!spec.class_labels().empty()) doc["classes"] = spec.class_labels();
  json layers = json::array();
  for (const LayerSpec& l : spec.layers()) {
    json jl = {{"name", l.name}, {"kind", std::string(to_string(l.kind))}};
    switch (l.kind) {
      case LayerKind::Conv:
        jl["kernel"] = l.kernel;
        jl["stride"] = l.stride;
        jl["pad"] = l.padding;
        jl["out"] = l.channels_out;
        if (l.groups != 1) jl["groups"] = l.groups;
        break;
      case LayerKind::MaxPool:
        jl["kernel"] = l.kernel;
        jl["stride"] = l.stride;
        if (l.padding) jl["pad"] = l.padding;
        break;
      case LayerKind::Lrn:
        jl["size"] = l.lrn.size;
        jl["alpha"] = l.lrn.alpha;
        jl["beta"] = l.lrn.beta;
        jl["k"] = l.lrn.k;
        break;
      case LayerKind::Fc:
        jl["out"] = l.channels_out;
        break;
      default:
        break;
    }
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2);
}

std::string to_string(const Unit& unit) { return unit.layer + ":" + std::to_string(unit.channel); }

Unit parse_unit(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw ValidationError("unit must look like layer:channel, got '" + std::string(text) + "'");
  }
  Unit u{std::string(text.substr(0, colon)), 0};
  const auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), u.channel);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || u.channel < 0) {
    throw ValidationError("bad channel in unit '" + std::string(text) + "'");
  }
  return u;
}

void check_unit(const NetworkSpec& spec, const Unit& unit) {
  const std::size_t i = spec.index_of(unit.layer);
  if (unit.channel < 0 || unit.channel >= spec.output_shape(i).channels) {
    throw ValidationError("unit " + to_string(unit) + " out of range: layer has " +
                          std::to_string(spec.output_shape(i).channels) + " channels");
  }
}

}  // namespace scopelens
