#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "scopelens/forward.hpp"

namespace scopelens {

enum class RankMode { Max, Sum };

RankMode rank_mode_from_string(std::string_view s);

struct RankedImage {
  std::size_t image_id = 0;  // index into the dataset
  float score = 0.0f;
  bool operator==(const RankedImage&) const = default;
};

/// Summary of one unit's response to one image.
struct UnitResponse {
  float max = 0.0f;           // max over positions of the unit's features
  float sum = 0.0f;           // sum over positions of the unit's features
  float min_pre = 0.0f;       // most negative pre-activation over positions
};

/// Responses[u][i] for each unit u and dataset image i (3D C x H x W tensors).
/// One forward per image, batched; deterministic for any thread count.
std::vector<std::vector<UnitResponse>> scan_responses(const Model& model, std::span<const Unit> units,
                                                      std::span<const Tensor> dataset, int threads = 1,
                                                      int batch_size = 16);

/// Top-k images for the unit by max or sum over spatial positions; scores
/// descending, ties to the lower image id. k larger than the dataset returns all.
std::vector<RankedImage> rank_images(const Model& model, const Unit& unit, std::span<const Tensor> dataset,
                                     RankMode mode, std::size_t k, int threads = 1);

/// Orders precomputed scores the same way rank_images does.
std::vector<RankedImage> rank_scores(std::span<const float> scores, std::size_t k);

}  // namespace scopelens
