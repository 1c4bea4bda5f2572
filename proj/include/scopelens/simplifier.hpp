#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "scopelens/forward.hpp"
#include "scopelens/poisson.hpp"
#include "scopelens/segments.hpp"

namespace scopelens {

struct ClassScore {
  float score = 0.0f;  // softmax probability of the target class
  int top1 = 0;
};

/// Preprocesses each image to the model input and scores it in one batch.
std::vector<ClassScore> score_images(const Model& model, std::span<const Image> images, int target, int threads = 1);

struct SimplifyOptions {
  PoissonOptions poisson;
  int threads = 1;
};

struct SimplificationStep {
  int label = 0;
  float score = 0.0f;  // target probability after the removal
  bool operator==(const SimplificationStep&) const = default;
};

struct SimplificationTrace {
  int target = 0;
  float initial_score = 0.0f;
  std::vector<SimplificationStep> steps;        // committed removals, in order
  std::optional<SimplificationStep> stopped_by;  // best candidate that flipped the class
  Image final_image;
  float final_score = 0.0f;
  std::vector<int> removed;
  std::vector<int> retained;
};

/// Removal of one segment from the current image: zero-gradient fill of its
/// pixels (border pixels use the zero-normal-derivative condition).
Image remove_segment(const Image& current, const SegmentMap& segments, int label, const PoissonOptions& options = {});

/// Greedy minimal-image search. Each step fills every remaining segment in
/// the current image, keeps the one with the highest target probability
/// (ties to the lower label) and stops before a removal that changes the
/// top-1 class. The last segment is never removed. Throws PreconditionError
/// when the original is not classified as `target`.
SimplificationTrace greedy_simplify(const Model& model, const Image& image, const SegmentMap& segments, int target,
                                    const SimplifyOptions& options = {});

std::string trace_to_json(const SimplificationTrace& trace, const SegmentMap& segments);

/// Object classes present in and retained by one simplified image.
struct RetentionRecord {
  std::string scene;
  std::set<std::string> present;
  std::set<std::string> retained;
};

RetentionRecord retention_record(const SimplificationTrace& trace, const SegmentMap& segments, std::string scene);

/// scene -> class -> percentage of that scene's traces retaining at least
/// one segment of the class. Classes never present in a scene are absent.
std::map<std::string, std::map<std::string, double>> retained_stats(std::span<const RetentionRecord> records);

}  // namespace scopelens
