#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "scopelens/network.hpp"
#include "scopelens/tensor.hpp"
#include "scopelens/weights.hpp"

namespace scopelens {

struct ForwardOptions {
  /// Last layer index to compute; the whole network when empty.
  std::optional<std::size_t> stop_after;
  /// Keep every layer's output. When false only the last computed layer is kept.
  bool keep_all = true;
  /// Workers for the batch dimension; 0 means default_threads().
  int threads = 1;
};

/// Per-layer outputs for one batch, indexed like NetworkSpec::layers().
/// Conv/fc entries hold pre-activation values; the following relu entries
/// hold the rectified features.
class ActivationTrace {
 public:
  ActivationTrace() = default;
  explicit ActivationTrace(std::vector<Tensor> outputs) : outputs_(std::move(outputs)) {}

  int batch_size() const;
  std::size_t layer_count() const noexcept { return outputs_.size(); }
  bool has(std::size_t index) const noexcept { return index < outputs_.size() && !outputs_[index].empty(); }
  /// Throws PreconditionError when the layer was not computed or not kept.
  const Tensor& output(std::size_t index) const;

  /// Features of a named layer (see NetworkSpec::feature_index).
  const Tensor& features(const NetworkSpec& spec, std::string_view layer) const;
  /// Raw conv/fc output before any relu.
  const Tensor& pre_activation(const NetworkSpec& spec, std::string_view layer) const;

  /// H x W feature map of one unit for batch item n.
  std::span<const float> unit_map(const NetworkSpec& spec, const Unit& unit, int n) const;
  std::span<const float> unit_pre_activation_map(const NetworkSpec& spec, const Unit& unit, int n) const;

  /// Output of the last layer (softmax probabilities for classifier specs).
  const Tensor& final_output() const;

 private:
  std::vector<Tensor> outputs_;
};

/// Pure batched forward pass. `batch` must be N x C x H x W matching the
/// spec input; weights are validated first. Conv and fc accumulate in double.
ActivationTrace forward(const NetworkSpec& spec, const WeightStore& weights, const Tensor& batch,
                        const ForwardOptions& options = {});

/// Network plus weights, validated once, with a counter of images pushed
/// through forward(). Copies share the counter.
class Model {
 public:
  Model(NetworkSpec spec, WeightStore weights);

  const NetworkSpec& spec() const noexcept { return *spec_; }
  const WeightStore& weights() const noexcept { return *weights_; }

  ActivationTrace forward(const Tensor& batch, const ForwardOptions& options = {}) const;
  /// Convenience for one 3D (C x H x W) input.
  ActivationTrace forward_one(const Tensor& chw, const ForwardOptions& options = {}) const;

  std::uint64_t images_forwarded() const noexcept { return counter_->load(); }
  void reset_counter() const noexcept { counter_->store(0); }

 private:
  std::shared_ptr<const NetworkSpec> spec_;
  std::shared_ptr<const WeightStore> weights_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

/// Top-k (class, probability) pairs of item n, probability descending, ties
/// to the lower class index.
std::vector<std::pair<int, float>> top_k(const Tensor& probabilities, int n, int k);
/// Index of the largest value (first on ties).
int argmax(std::span<const float> values);

}  // namespace scopelens
