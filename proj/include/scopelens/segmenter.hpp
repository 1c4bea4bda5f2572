#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scopelens/forward.hpp"
#include "scopelens/image.hpp"
#include "scopelens/semantics.hpp"

namespace scopelens {

struct UnitTag {
  Unit unit;
  std::string concept_label;
  Category category = Category::Objects;
  double precision = 1.0;
};

/// Inclusive pixel box.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  long area() const noexcept { return static_cast<long>(width()) * height(); }
  bool contains(const Box& o) const noexcept { return x0 <= o.x0 && y0 <= o.y0 && o.x1 <= x1 && o.y1 <= y1; }
  bool operator==(const Box&) const = default;
};

/// Theoretical RF of feature position (x, y) of `layer`, clamped to the input.
/// Throws PreconditionError outside the feature map, UnsupportedLayerError past fc.
Box project(const NetworkSpec& spec, std::string_view layer, int x, int y);

struct Detection {
  Unit unit;
  Box box;
  float score = 0.0f;  // max activation in the cluster
  std::optional<UnitTag> tag;
};

struct UnitSegmentation {
  Unit unit;
  float threshold = 0.0f;
  Mask mask;
  std::vector<Detection> detections;
};

struct Segmentation {
  std::vector<UnitSegmentation> units;
  std::vector<Detection> detections;  // all units, score descending
};

/// A position is active when its activation is positive and >= the unit's
/// threshold. Active positions are grouped into 8-connected clusters; each
/// cluster becomes one detection whose box bounds its members' projections.
Segmentation segment_from_trace(const NetworkSpec& spec, const ActivationTrace& trace, int n,
                                std::span<const Unit> units, std::span<const float> thresholds);
/// One forward pass of a C x H x W input.
Segmentation segment(const Model& model, const Tensor& image, std::span<const Unit> units,
                     std::span<const float> thresholds);

/// Linear-interpolation quantile (R type 7) of unsorted values, q in [0, 1].
double quantile(std::vector<float> values, double q);

/// Per-unit q-quantile of per-position activations over the calibration set.
std::vector<float> calibrate_thresholds(const Model& model, std::span<const Unit> units,
                                        std::span<const Tensor> calibration, double q = 0.995, int threads = 1);

/// |a & b| / |a | b|, 1 when both are empty.
double jaccard(const Mask& a, const Mask& b);

struct PRPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per distinct score, descending
  double ap = 0;
};

/// Descending-score sweep with tied scores forming one operating point;
/// AP = sum of precision * recall increase. Throws PreconditionError
/// without positives or on length mismatch.
PRCurve pr_ap(std::span<const float> scores, const std::vector<bool>& positives);

struct SceneScore {
  std::string label;
  float prob = 0.0f;
};

struct SceneReport {
  std::vector<SceneScore> scenes;  // probability descending
  std::vector<Detection> detections;
};

/// Scene top-k and detections of the requested units from one forward pass.
/// Every requested unit needs a tag and a threshold.
SceneReport report(const Model& model, const Tensor& image, std::span<const Unit> units,
                   const std::map<Unit, UnitTag>& tags, const std::map<Unit, float>& thresholds, int top = 5);

std::string report_to_json(const SceneReport& report);

/// One image of a segmentation benchmark for a single concept.
struct SegmentationSample {
  Mask predicted;
  Mask truth;
  float score = 0.0f;     // detection confidence, 0 when nothing fired
  bool positive = false;  // concept present in the image
};

struct SegmentationScore {
  double mean_jaccard = 0;  // over positive samples
  double ap = 0;            // image-level retrieval by score
  std::size_t samples = 0;
  std::size_t positives = 0;
};

SegmentationScore evaluate_segmentation(std::span<const SegmentationSample> samples);

}  // namespace scopelens
