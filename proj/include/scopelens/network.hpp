#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scopelens/image.hpp"

namespace scopelens {

enum class LayerKind { Conv, MaxPool, Relu, Lrn, Fc, Softmax };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> layer_kind_from_string(std::string_view name);

/// Cross-channel local response normalization, Caffe convention:
/// b = a / (k + alpha / size * sum(a^2 over the channel window))^beta.
struct LrnParams {
  int size = 5;
  float alpha = 1e-4f;
  float beta = 0.75f;
  float k = 2.0f;
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Relu;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int channels_out = 0;  // conv and fc only
  int groups = 1;        // conv only
  LrnParams lrn;

  bool is_spatial() const noexcept { return kind != LayerKind::Fc && kind != LayerKind::Softmax; }
  bool has_weights() const noexcept { return kind == LayerKind::Conv || kind == LayerKind::Fc; }
};

/// C x H x W of one item. fc and softmax outputs are C x 1 x 1.
struct FeatureShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(channels) * height * width; }
  bool operator==(const FeatureShape&) const = default;
};

/// Validated feedforward chain. Immutable once built.
class NetworkSpec {
 public:
  /// Validates the chain and computes per-layer output shapes. Throws
  /// ValidationError naming the offending layer.
  NetworkSpec(std::string name, FeatureShape input, std::vector<LayerSpec> layers,
              std::vector<std::string> class_labels = {}, ChannelMean mean = {0, 0, 0});

  const std::string& name() const noexcept { return name_; }
  const FeatureShape& input_shape() const noexcept { return input_; }
  int input_side() const noexcept { return input_.height; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t size() const noexcept { return layers_.size(); }

  const FeatureShape& output_shape(std::size_t i) const { return shapes_.at(i); }
  const FeatureShape& layer_input_shape(std::size_t i) const { return i == 0 ? input_ : shapes_.at(i - 1); }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws ValidationError for unknown names.
  std::size_t index_of(std::string_view name) const;

  /// Index whose output holds the layer's "features": for conv/fc layers
  /// followed by relu, the last relu of that run (Caffe in-place semantics);
  /// otherwise the layer itself.
  std::size_t feature_index(std::size_t i) const;

  const std::vector<std::string>& class_labels() const noexcept { return class_labels_; }
  std::string class_label(int index) const;
  const ChannelMean& mean() const noexcept { return mean_; }

 private:
  std::string name_;
  FeatureShape input_;
  std::vector<LayerSpec> layers_;
  std::vector<FeatureShape> shapes_;
  std::vector<std::string> class_labels_;
  ChannelMean mean_;
};

/// Parses the JSON network document:
///   {"name": ..., "input": {"side": 227, "channels": 3}, "mean": [r, g, b],
///    "classes": [...], "layers": [{"name", "kind", "kernel", "stride", "pad",
///    "out", "groups", "size", "alpha", "beta", "k"}, ...]}
NetworkSpec parse_netspec(std::string_view json_text);
NetworkSpec load_netspec(const std::filesystem::path& path);
std::string netspec_to_json(const NetworkSpec& spec);

/// One channel of one layer.
struct Unit {
  std::string layer;
  int channel = 0;

  bool operator==(const Unit&) const = default;
  auto operator<=>(const Unit&) const = default;
};

/// "layer:channel"
std::string to_string(const Unit& unit);
/// Parses "layer:channel"; throws ValidationError on malformed text.
Unit parse_unit(std::string_view text);
/// Throws ValidationError if the layer is missing or the channel out of range.
void check_unit(const NetworkSpec& spec, const Unit& unit);

}  // namespace scopelens
