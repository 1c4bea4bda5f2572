#include "scopelens/simplifier.hpp"

#include <algorithm>

#include <json.hpp>

#include "scopelens/error.hpp"
#include "scopelens/parallel.hpp"

namespace scopelens {

std::vector<ClassScore> score_images(const Model& model, std::span<const Image> images, int target, int threads) {
  const NetworkSpec& spec = model.spec();
  if (target < 0 || static_cast<std::size_t>(target) >= spec.output_shape(spec.size() - 1).size()) {
    throw PreconditionError("target class " + std::to_string(target) + " out of range");
  }
  if (images.empty()) return {};
  std::vector<Tensor> inputs(images.size());
  parallel_for(images.size(), threads,
               [&](std::size_t i) { inputs[i] = preprocess(images[i], spec.input_side(), spec.mean()); });
  const ActivationTrace trace =
      model.forward(stack(inputs), {.stop_after = std::nullopt, .keep_all = false, .threads = threads});
  const Tensor& probs = trace.final_output();
  std::vector<ClassScore> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto p = probs.item(static_cast<int>(i));
    out[i] = {p[target], argmax(p)};
  }
  return out;
}

Image remove_segment(const Image& current, const SegmentMap& segments, int label, const PoissonOptions& options) {
  return poisson_remove(current, segments.mask(label), options);
}

SimplificationTrace greedy_simplify(const Model& model, const Image& image, const SegmentMap& segments, int target,
                                    const SimplifyOptions& options) {
  if (segments.width() != image.width() || segments.height() != image.height()) {
    throw ShapeError("segment map does not match image dimensions");
  }
  const Image originals[] = {image};
  const ClassScore start = score_images(model, originals, target, options.threads).front();
  if (start.top1 != target) {
    throw PreconditionError("original image is classified as " + std::to_string(start.top1) + ", not " +
                            std::to_string(target));
  }

  SimplificationTrace trace;
  trace.target = target;
  trace.initial_score = start.score;
  trace.final_image = image;
  trace.final_score = start.score;
  std::vector<int> remaining(static_cast<std::size_t>(segments.label_count()));
  for (int l = 0; l < segments.label_count(); ++l) remaining[l] = l;

  while (remaining.size() > 1) {
    std::vector<Image> candidates(remaining.size());
    parallel_for(remaining.size(), options.threads, [&](std::size_t i) {
      candidates[i] = remove_segment(trace.final_image, segments, remaining[i], options.poisson);
    });
    const std::vector<ClassScore> scores = score_images(model, candidates, target, options.threads);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i].score > scores[best].score) best = i;
    }
    const SimplificationStep step{remaining[best], scores[best].score};
    if (scores[best].top1 != target) {
      trace.stopped_by = step;
      break;
    }
    trace.steps.push_back(step);
    trace.removed.push_back(step.label);
    trace.final_image = std::move(candidates[best]);
    trace.final_score = step.score;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  trace.retained = remaining;
  return trace;
}

std::string trace_to_json(const SimplificationTrace& trace, const SegmentMap& segments) {
  nlohmann::json steps = nlohmann::json::array();
  for (const SimplificationStep& s : trace.steps) {
    steps.push_back({{"label", s.label}, {"name", segments.name(s.label)}, {"score", s.score}});
  }
  nlohmann::json j{{"target", trace.target},
                   {"initial_score", trace.initial_score},
                   {"final_score", trace.final_score},
                   {"steps", steps},
                   {"removed", trace.removed},
                   {"retained", trace.retained}};
  if (trace.stopped_by) {
    j["stopped_by"] = {{"label", trace.stopped_by->label}, {"score", trace.stopped_by->score}};
  } else {
    j["stopped_by"] = nullptr;
  }
  nlohmann::json names = nlohmann::json::array();
  for (int l : trace.retained) names.push_back(segments.name(l));
  j["retained_names"] = names;
  return j.dump(2);
}

RetentionRecord retention_record(const SimplificationTrace& trace, const SegmentMap& segments, std::string scene) {
  RetentionRecord r;
  r.scene = std::move(scene);
  for (int l = 0; l < segments.label_count(); ++l) {
    if (auto n = segments.name(l); !n.empty()) r.present.insert(n);
  }
  for (int l : trace.retained) {
    if (auto n = segments.name(l); !n.empty()) r.retained.insert(n);
  }
  return r;
}

std::map<std::string, std::map<std::string, double>> retained_stats(std::span<const RetentionRecord> records) {
  if (records.empty()) throw PreconditionError("retained_stats needs at least one trace");
  std::map<std::string, std::size_t> per_scene;
  std::map<std::string, std::map<std::string, std::size_t>> kept;
  for (const RetentionRecord& r : records) {
    ++per_scene[r.scene];
    auto& scene = kept[r.scene];
    for (const auto& c : r.present) scene.try_emplace(c, 0);
    for (const auto& c : r.retained) ++scene[c];
  }
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [scene, classes] : kept) {
    for (const auto& [cls, n] : classes) {
      out[scene][cls] = 100.0 * static_cast<double>(n) / static_cast<double>(per_scene[scene]);
    }
  }
  return out;
}

}  // namespace scopelens
