#include "scopelens/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>
#include <set>

#include "scopelens/error.hpp"
#include "scopelens/png.hpp"
#include "scopelens/ranking.hpp"
#include "scopelens/rng.hpp"
#include "scopelens/segmenter.hpp"

namespace scopelens {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::vector<int> UnitTask::planted_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].planted) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::string task_id(const Unit& unit, std::uint64_t seed) { return to_string(unit) + ":" + std::to_string(seed); }

std::pair<Unit, std::uint64_t> parse_task_id(std::string_view id) {
  const auto colon = id.rfind(':');
  if (colon == std::string_view::npos) throw ValidationError("task id must look like layer:channel:seed");
  std::uint64_t seed = 0;
  const auto digits = id.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw ValidationError("bad seed in task id '" + std::string(id) + "'");
  }
  return {parse_unit(id.substr(0, colon)), seed};
}

UnitTask build_task(const Unit& unit, std::span<const Candidate> candidates, std::uint64_t seed) {
  if (candidates.size() < static_cast<std::size_t>(kTaskSize)) {
    throw PreconditionError("a task needs at least " + std::to_string(kTaskSize) + " images, got " +
                            std::to_string(candidates.size()));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return candidates[a].response > candidates[b].response; });
  std::vector<std::size_t> rest(order.begin() + kTaskPositives, order.end());
  std::sort(rest.begin(), rest.end());
  std::stable_sort(rest.begin(), rest.end(),
                   [&](std::size_t a, std::size_t b) { return candidates[a].min_pre < candidates[b].min_pre; });

  UnitTask task{task_id(unit, seed), unit, seed, {}};
  for (int i = 0; i < kTaskPositives; ++i) task.entries.push_back({candidates[order[i]].image_id, false});
  for (int i = 0; i < kTaskPlanted; ++i) task.entries.push_back({candidates[rest[i]].image_id, true});
  // Mixing in the unit keeps planted positions from repeating across units.
  Rng rng(seed ^ fnv1a(to_string(unit)));
  shuffle(std::span<TaskEntry>(task.entries), rng);
  return task;
}

double unit_precision(const AnnotationRecord& record) {
  return static_cast<double>(kTaskPositives - static_cast<int>(record.rejected_positives.size())) / kTaskPositives;
}

std::string_view to_string(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::Accepted: return "accepted";
    case SubmitStatus::QualityControl: return "quality_control";
    case SubmitStatus::Invalid: return "validation";
    case SubmitStatus::Conflict: return "conflict";
    case SubmitStatus::UnknownTask: return "unknown_task";
  }
  return "?";
}

SubmitResult check_submission(const UnitTask& task, const Submission& s, std::string timestamp) {
  if (s.task_id != task.id) return {SubmitStatus::Invalid, "submission is for task " + s.task_id, {}};
  const std::string concept_label = trim(s.concept_label);
  if (concept_label.empty()) return {SubmitStatus::Invalid, "concept text is empty", {}};
  Category category;
  try {
    category = category_from_string(lower(trim(s.category)));
  } catch (const ValidationError& e) {
    return {SubmitStatus::Invalid, e.what(), {}};
  }
  std::set<int> rejected;
  for (int i : s.rejected) {
    if (i < 0 || i >= static_cast<int>(task.entries.size())) {
      return {SubmitStatus::Invalid, "image index " + std::to_string(i) + " out of range", {}};
    }
    rejected.insert(i);
  }
  AnnotationRecord r{task.id, task.unit, concept_label, category, {}, {}, 0.0, std::move(timestamp), s.annotator};
  for (int i : rejected) (task.entries[i].planted ? r.rejected_planted : r.rejected_positives).push_back(i);
  if (static_cast<int>(r.rejected_planted.size()) != kTaskPlanted) {
    return {SubmitStatus::QualityControl,
            "only " + std::to_string(r.rejected_planted.size()) + " of the " + std::to_string(kTaskPlanted) +
                " control images were marked as not fitting the concept",
            {}};
  }
  r.precision = unit_precision(r);
  return {SubmitStatus::Accepted, {}, std::move(r)};
}

nlohmann::json to_json(const AnnotationRecord& r) {
  return {{"task_id", r.task_id},
          {"unit", to_string(r.unit)},
          {"layer", r.unit.layer},
          {"channel", r.unit.channel},
          {"concept", r.concept_label},
          {"category", to_string(r.category)},
          {"rejected_positives", r.rejected_positives},
          {"rejected_planted", r.rejected_planted},
          {"precision", r.precision},
          {"timestamp", r.timestamp},
          {"annotator", r.annotator}};
}

AnnotationRecord record_from_json(const nlohmann::json& j) {
  try {
    AnnotationRecord r;
    r.task_id = j.at("task_id").get<std::string>();
    r.unit = {j.at("layer").get<std::string>(), j.at("channel").get<int>()};
    r.concept_label = j.at("concept").get<std::string>();
    r.category = category_from_string(j.at("category").get<std::string>());
    r.rejected_positives = j.at("rejected_positives").get<std::vector<int>>();
    r.rejected_planted = j.at("rejected_planted").get<std::vector<int>>();
    r.precision = j.at("precision").get<double>();
    r.timestamp = j.value("timestamp", "");
    r.annotator = j.value("annotator", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("annotation record: ") + e.what());
  }
}

Submission submission_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("submission must be a JSON object");
  try {
    Submission s;
    s.task_id = j.at("task_id").get<std::string>();
    s.concept_label = j.at("concept").get<std::string>();
    s.category = j.at("category").get<std::string>();
    s.rejected = j.at("rejected").get<std::vector<int>>();
    s.annotator = j.value("annotator", "");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("submission: ") + e.what());
  }
}

SemanticsDistribution semantics_distribution(std::span<const AnnotationRecord> records, std::string_view layer,
                                             double min_precision) {
  // The latest record of each unit counts.
  std::map<int, const AnnotationRecord*> latest;
  for (const AnnotationRecord& r : records) {
    if (r.unit.layer == layer) latest[r.unit.channel] = &r;
  }
  SemanticsDistribution d;
  d.layer = std::string(layer);
  d.min_precision = min_precision;
  d.units = latest.size();
  std::array<std::size_t, 6> counts{};
  for (const auto& [channel, r] : latest) {
    d.mean_precision += r->precision;
    if (r->precision < min_precision) continue;
    ++d.kept;
    ++counts[static_cast<std::size_t>(r->category)];
  }
  if (d.units) d.mean_precision /= static_cast<double>(d.units);
  d.empty = d.kept == 0;
  if (!d.empty) {
    for (std::size_t i = 0; i < counts.size(); ++i) d.percent[i] = 100.0 * counts[i] / static_cast<double>(d.kept);
  }
  return d;
}

nlohmann::json to_json(const SemanticsDistribution& d) {
  nlohmann::json cats = nlohmann::json::array();
  for (std::size_t i = 0; i < kCategories.size(); ++i) {
    cats.push_back({{"category", to_string(kCategories[i])}, {"percent", d.percent[i]}});
  }
  return {{"layer", d.layer},         {"min_precision", d.min_precision}, {"units", d.units},
          {"kept", d.kept},           {"empty", d.empty},                 {"mean_precision", d.mean_precision},
          {"distribution", cats}};
}

AnnotationStore::AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) throw Error("cannot open " + path_.string());
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path_.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    AnnotationRecord r = record_from_json(j);
    if (by_task_.contains(r.task_id)) continue;
    by_task_[r.task_id] = records_.size();
    records_.push_back(std::move(r));
  }
}

bool AnnotationStore::append(const AnnotationRecord& record) {
  std::lock_guard lock(mutex_);
  if (by_task_.contains(record.task_id)) return false;
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << to_json(record).dump() << '\n';
    out.flush();
    if (!out) throw Error("cannot append to " + path_.string());
  }
  by_task_[record.task_id] = records_.size();
  records_.push_back(record);
  return true;
}

bool AnnotationStore::contains(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  return by_task_.contains(task_id);
}

std::vector<AnnotationRecord> AnnotationStore::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

AnnotationService::AnnotationService(std::map<Unit, std::vector<Candidate>> candidates, Renderer renderer,
                                     AnnotationStore& store, Clock clock)
    : candidates_(std::move(candidates)),
      renderer_(std::move(renderer)),
      store_(store),
      clock_(clock ? std::move(clock) : Clock(utc_timestamp)) {}

nlohmann::json AnnotationService::units() const {
  std::set<Unit> annotated;
  for (const AnnotationRecord& r : store_.records()) annotated.insert(r.unit);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [unit, c] : candidates_) {
    out.push_back({{"unit", to_string(unit)},
                   {"layer", unit.layer},
                   {"channel", unit.channel},
                   {"annotated", annotated.contains(unit)}});
  }
  return out;
}

const UnitTask& AnnotationService::task(const Unit& unit, std::uint64_t seed) {
  auto it = candidates_.find(unit);
  if (it == candidates_.end()) throw ValidationError("unit " + to_string(unit) + " is not served");
  std::lock_guard lock(mutex_);
  const std::string id = task_id(unit, seed);
  auto t = tasks_.find(id);
  if (t == tasks_.end()) t = tasks_.emplace(id, build_task(unit, it->second, seed)).first;
  return t->second;
}

nlohmann::json AnnotationService::task_payload(const UnitTask& task) const {
  nlohmann::json images = nlohmann::json::array();
  for (std::size_t i = 0; i < task.entries.size(); ++i) {
    images.push_back({{"index", i}, {"url", "/img/" + task.id + ":" + std::to_string(i)}});
  }
  nlohmann::json cats = nlohmann::json::array();
  for (Category c : kCategories) cats.push_back(to_string(c));
  return {{"task_id", task.id},
          {"unit", to_string(task.unit)},
          {"layer", task.unit.layer},
          {"channel", task.unit.channel},
          {"seed", task.seed},
          {"images", images},
          {"categories", cats}};
}

std::vector<std::uint8_t> AnnotationService::image_png(std::string_view ref) {
  const auto colon = ref.rfind(':');
  if (colon == std::string_view::npos) return {};
  int index = -1;
  const auto digits = ref.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) return {};
  std::pair<Unit, std::uint64_t> id;
  try {
    id = parse_task_id(ref.substr(0, colon));
  } catch (const ValidationError&) {
    return {};
  }
  if (!candidates_.contains(id.first)) return {};
  const UnitTask& t = task(id.first, id.second);
  if (index < 0 || index >= static_cast<int>(t.entries.size())) return {};
  return encode_png(renderer_(t.unit, t.entries[index].image_id));
}

SubmitResult AnnotationService::submit(const Submission& submission) {
  std::pair<Unit, std::uint64_t> id;
  try {
    id = parse_task_id(submission.task_id);
  } catch (const ValidationError& e) {
    return {SubmitStatus::UnknownTask, e.what(), {}};
  }
  if (!candidates_.contains(id.first)) return {SubmitStatus::UnknownTask, "unit is not served", {}};
  const UnitTask& t = task(id.first, id.second);
  if (store_.contains(t.id)) return {SubmitStatus::Conflict, "task " + t.id + " already has an annotation", {}};
  SubmitResult result = check_submission(t, submission, clock_());
  if (result.status == SubmitStatus::Accepted && !store_.append(*result.record)) {
    return {SubmitStatus::Conflict, "task " + t.id + " already has an annotation", {}};
  }
  return result;
}

SemanticsDistribution AnnotationService::stats(std::string_view layer, double min_precision) const {
  const auto records = store_.records();
  return semantics_distribution(records, layer, min_precision);
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Image segmented_crop(const Image& image, const Mask& mask) {
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw ShapeError("segmentation mask and image differ in size");
  }
  int x0 = image.width(), y0 = image.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return image;
  Image out(x1 - x0 + 1, y1 - y0 + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      Rgb p = image.at(x, y);
      if (!mask.at(x, y)) p = {static_cast<std::uint8_t>(p.r / 4), static_cast<std::uint8_t>(p.g / 4),
                               static_cast<std::uint8_t>(p.b / 4)};
      out.at(x - x0, y - y0) = p;
    }
  }
  return out;
}

std::map<Unit, std::vector<Candidate>> collect_candidates(const Model& model, std::span<const Unit> units,
                                                          std::span<const Tensor> images,
                                                          std::span<const std::string> image_ids, int threads) {
  if (images.size() != image_ids.size()) throw PreconditionError("one id per image required");
  const auto responses = scan_responses(model, units, images, threads);
  std::map<Unit, std::vector<Candidate>> out;
  for (std::size_t u = 0; u < units.size(); ++u) {
    auto& list = out[units[u]];
    for (std::size_t i = 0; i < images.size(); ++i) {
      list.push_back({image_ids[i], responses[u][i].max, responses[u][i].min_pre});
    }
  }
  return out;
}

Image unit_view(const Model& model, const Image& image, const Unit& unit, float threshold) {
  const NetworkSpec& spec = model.spec();
  check_unit(spec, unit);
  const ChannelMean mean = spec.mean();
  const Tensor input = preprocess(image, spec.input_side(), mean);
  const ActivationTrace trace = model.forward_one(
      input, {.stop_after = spec.feature_index(spec.index_of(unit.layer)), .keep_all = true});
  const std::array<Unit, 1> units = {unit};
  const std::array<float, 1> thresholds = {threshold};
  Mask mask = segment_from_trace(spec, trace, 0, units, thresholds).units[0].mask;
  if (mask.none()) {
    const auto pre = trace.unit_pre_activation_map(spec, unit, 0);
    const int width = spec.output_shape(spec.index_of(unit.layer)).width;
    const int best = argmax(pre);
    const Box b = project(spec, unit.layer, best % width, best / width);
    mask.fill_rect(b.x0, b.y0, b.x1, b.y1);
  }
  return segmented_crop(tensor_to_image(input, mean), mask);
}

}  // namespace scopelens
