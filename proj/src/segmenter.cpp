#include "scopelens/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "scopelens/error.hpp"
#include "scopelens/receptive_field.hpp"

namespace scopelens {

Box project(const NetworkSpec& spec, std::string_view layer, int x, int y) {
  const std::size_t index = spec.index_of(layer);
  const RFGeometry rf = theoretical_rf(spec, index);
  const FeatureShape fs = spec.output_shape(index);
  if (x < 0 || y < 0 || x >= fs.width || y >= fs.height) {
    throw PreconditionError("position (" + std::to_string(x) + ", " + std::to_string(y) + ") outside the " +
                            std::to_string(fs.width) + "x" + std::to_string(fs.height) + " map of " +
                            std::string(layer));
  }
  const int last = spec.input_side() - 1;
  const Interval ix = rf.interval(x), iy = rf.interval(y);
  return {std::clamp(ix.lo, 0, last), std::clamp(iy.lo, 0, last), std::clamp(ix.hi, 0, last),
          std::clamp(iy.hi, 0, last)};
}

namespace {

void sort_detections(std::vector<Detection>& d) {
  std::stable_sort(d.begin(), d.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
}

std::size_t deepest_feature(const NetworkSpec& spec, std::span<const Unit> units) {
  std::size_t deepest = 0;
  for (const Unit& u : units) {
    check_unit(spec, u);
    deepest = std::max(deepest, spec.feature_index(spec.index_of(u.layer)));
  }
  return deepest;
}

}  // namespace

Segmentation segment_from_trace(const NetworkSpec& spec, const ActivationTrace& trace, int n,
                                std::span<const Unit> units, std::span<const float> thresholds) {
  if (units.size() != thresholds.size()) throw PreconditionError("one threshold per unit required");
  Segmentation out;
  const int side = spec.input_side();
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Unit& unit = units[u];
    const FeatureShape fs = spec.output_shape(spec.feature_index(spec.index_of(unit.layer)));
    const auto map = trace.unit_map(spec, unit, n);
    UnitSegmentation seg{unit, thresholds[u], Mask(side, side), {}};
    auto active = [&](int x, int y) {
      const float a = map[static_cast<std::size_t>(y) * fs.width + x];
      return a > 0.0f && a >= thresholds[u];
    };
    std::vector<int> cluster(map.size(), -1);
    for (int y = 0; y < fs.height; ++y) {
      for (int x = 0; x < fs.width; ++x) {
        if (!active(x, y) || cluster[static_cast<std::size_t>(y) * fs.width + x] >= 0) continue;
        // Flood fill one 8-connected cluster.
        const int id = static_cast<int>(seg.detections.size());
        Detection det{unit, project(spec, unit.layer, x, y), 0.0f, std::nullopt};
        std::vector<std::pair<int, int>> stack{{x, y}};
        cluster[static_cast<std::size_t>(y) * fs.width + x] = id;
        while (!stack.empty()) {
          const auto [cx, cy] = stack.back();
          stack.pop_back();
          det.score = std::max(det.score, map[static_cast<std::size_t>(cy) * fs.width + cx]);
          const Box b = project(spec, unit.layer, cx, cy);
          seg.mask.fill_rect(b.x0, b.y0, b.x1, b.y1);
          det.box = {std::min(det.box.x0, b.x0), std::min(det.box.y0, b.y0), std::max(det.box.x1, b.x1),
                     std::max(det.box.y1, b.y1)};
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = cx + dx, ny = cy + dy;
              if (nx < 0 || ny < 0 || nx >= fs.width || ny >= fs.height) continue;
              auto& slot = cluster[static_cast<std::size_t>(ny) * fs.width + nx];
              if (slot >= 0 || !active(nx, ny)) continue;
              slot = id;
              stack.emplace_back(nx, ny);
            }
          }
        }
        seg.detections.push_back(det);
      }
    }
    sort_detections(seg.detections);
    out.detections.insert(out.detections.end(), seg.detections.begin(), seg.detections.end());
    out.units.push_back(std::move(seg));
  }
  sort_detections(out.detections);
  return out;
}

Segmentation segment(const Model& model, const Tensor& image, std::span<const Unit> units,
                     std::span<const float> thresholds) {
  if (units.empty()) return {};
  const std::size_t stop = deepest_feature(model.spec(), units);
  const ActivationTrace trace = model.forward_one(image, {.stop_after = stop, .keep_all = true});
  return segment_from_trace(model.spec(), trace, 0, units, thresholds);
}

double quantile(std::vector<float> values, double q) {
  if (values.empty()) throw PreconditionError("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw PreconditionError("quantile q must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (static_cast<double>(values[hi]) - values[lo]);
}

std::vector<float> calibrate_thresholds(const Model& model, std::span<const Unit> units,
                                        std::span<const Tensor> calibration, double q, int threads) {
  if (calibration.empty()) throw PreconditionError("calibration set is empty");
  if (units.empty()) return {};
  const NetworkSpec& spec = model.spec();
  const std::size_t stop = deepest_feature(spec, units);
  std::vector<std::vector<float>> values(units.size());
  constexpr std::size_t kBatch = 16;
  for (std::size_t start = 0; start < calibration.size(); start += kBatch) {
    const std::size_t n = std::min(kBatch, calibration.size() - start);
    const ActivationTrace trace =
        model.forward(stack(calibration.subspan(start, n)), {.stop_after = stop, .keep_all = true, .threads = threads});
    for (std::size_t u = 0; u < units.size(); ++u) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto map = trace.unit_map(spec, units[u], static_cast<int>(i));
        values[u].insert(values[u].end(), map.begin(), map.end());
      }
    }
  }
  std::vector<float> out;
  for (auto& v : values) out.push_back(static_cast<float>(quantile(std::move(v), q)));
  return out;
}

double jaccard(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw ShapeError("jaccard: mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits().size(); ++i) {
    inter += a.bits()[i] & b.bits()[i];
    uni += a.bits()[i] | b.bits()[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

PRCurve pr_ap(std::span<const float> scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size()) throw PreconditionError("pr_ap: scores and labels differ in length");
  const auto total = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
  if (total == 0) throw PreconditionError("pr_ap needs at least one positive");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PRCurve curve;
  std::size_t tp = 0, seen = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < order.size();) {
    const float s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      ++seen;
      tp += positives[order[i]];
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    const double recall = static_cast<double>(tp) / static_cast<double>(total);
    curve.ap += precision * (recall - prev_recall);
    prev_recall = recall;
    curve.points.push_back({s, precision, recall});
  }
  return curve;
}

SceneReport report(const Model& model, const Tensor& image, std::span<const Unit> units,
                   const std::map<Unit, UnitTag>& tags, const std::map<Unit, float>& thresholds, int top) {
  const NetworkSpec& spec = model.spec();
  std::vector<float> th;
  for (const Unit& u : units) {
    check_unit(spec, u);
    if (!tags.contains(u)) throw PreconditionError("unit " + to_string(u) + " has no tag");
    auto it = thresholds.find(u);
    if (it == thresholds.end()) throw PreconditionError("unit " + to_string(u) + " has no threshold");
    th.push_back(it->second);
  }
  const ActivationTrace trace = model.forward_one(image, {.stop_after = std::nullopt, .keep_all = true});
  SceneReport rep;
  for (const auto& [cls, p] : top_k(trace.final_output(), 0, top)) rep.scenes.push_back({spec.class_label(cls), p});
  if (!units.empty()) {
    Segmentation seg = segment_from_trace(spec, trace, 0, units, th);
    for (Detection& d : seg.detections) d.tag = tags.at(d.unit);
    rep.detections = std::move(seg.detections);
  }
  return rep;
}

std::string report_to_json(const SceneReport& report) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const SceneScore& s : report.scenes) scenes.push_back({{"label", s.label}, {"prob", s.prob}});
  nlohmann::json dets = nlohmann::json::array();
  for (const Detection& d : report.detections) {
    dets.push_back({{"layer", d.unit.layer},
                    {"channel", d.unit.channel},
                    {"tag", d.tag ? d.tag->concept_label : ""},
                    {"category", d.tag ? std::string(to_string(d.tag->category)) : ""},
                    {"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}},
                    {"score", d.score}});
  }
  return nlohmann::json{{"scenes", scenes}, {"detections", dets}}.dump(2);
}

SegmentationScore evaluate_segmentation(std::span<const SegmentationSample> samples) {
  SegmentationScore s;
  s.samples = samples.size();
  std::vector<float> scores;
  std::vector<bool> labels;
  for (const SegmentationSample& x : samples) {
    scores.push_back(x.score);
    labels.push_back(x.positive);
    if (!x.positive) continue;
    ++s.positives;
    s.mean_jaccard += jaccard(x.predicted, x.truth);
  }
  if (s.positives == 0) throw PreconditionError("segmentation benchmark has no positive samples");
  s.mean_jaccard /= static_cast<double>(s.positives);
  s.ap = pr_ap(scores, labels).ap;
  return s;
}

}  // namespace scopelens
