#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scopelens/network.hpp"
#include "scopelens/tensor.hpp"

namespace scopelens {

/// Named parameter blobs. Conv kernels are out x in/groups x k x k, fc
/// matrices out x in (input flattened channel-major), biases are vectors.
/// Blob names are "<layer>.w" and "<layer>.b".
using WeightStore = std::map<std::string, Tensor, std::less<>>;

std::string weight_blob(const LayerSpec& layer);
std::string bias_blob(const LayerSpec& layer);

/// Expected weight shape for a conv/fc layer at position `index` in `spec`.
std::vector<int> expected_weight_shape(const NetworkSpec& spec, std::size_t index);

/// Throws ShapeError (mis-shaped) or ValidationError (missing), naming the blob.
void validate_weights(const NetworkSpec& spec, const WeightStore& store);

// NNW1 container, little-endian:
//   "NNW1" | u32 blob count | per blob: u16 name length, UTF-8 name,
//   u8 rank, u32 dims[rank], f32 values[prod(dims)]
std::vector<std::uint8_t> encode_blobs(const WeightStore& store);
/// Throws FormatError on bad magic or truncation (naming the blob being read).
WeightStore decode_blobs(std::span<const std::uint8_t> bytes);

void save_weights(const WeightStore& store, const std::filesystem::path& path);
/// Reads and validates against the spec.
WeightStore load_weights(const std::filesystem::path& path, const NetworkSpec& spec);
/// Reads without validation (e.g. receptive-field archives).
WeightStore load_blobs(const std::filesystem::path& path);

/// He-normal kernels and zero biases, deterministic in the seed.
WeightStore random_weights(const NetworkSpec& spec, std::uint64_t seed);

}  // namespace scopelens
