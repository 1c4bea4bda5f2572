#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopelens/forward.hpp"
#include "scopelens/image.hpp"
#include "scopelens/network.hpp"
#include "scopelens/semantics.hpp"

namespace scopelens {

inline constexpr int kTaskPositives = 60;
inline constexpr int kTaskPlanted = 3;
inline constexpr int kTaskSize = kTaskPositives + kTaskPlanted;

/// One dataset image scored for a unit.
struct Candidate {
  std::string image_id;
  float response = 0.0f;  // max post-relu activation
  float min_pre = 0.0f;   // most negative pre-activation
};

struct TaskEntry {
  std::string image_id;
  bool planted = false;
};

struct UnitTask {
  std::string id;  // "layer:channel:seed"
  Unit unit;
  std::uint64_t seed = 0;
  std::vector<TaskEntry> entries;  // shuffled, kTaskSize long

  std::vector<int> planted_indices() const;
};

std::string task_id(const Unit& unit, std::uint64_t seed);
/// Inverse of task_id; throws ValidationError.
std::pair<Unit, std::uint64_t> parse_task_id(std::string_view id);

/// Top 60 candidates by response (ties to the earlier candidate) plus the 3
/// with the most negative pre-activation among the rest, shuffled by seed.
/// Throws PreconditionError below 63 candidates.
UnitTask build_task(const Unit& unit, std::span<const Candidate> candidates, std::uint64_t seed);

struct Submission {
  std::string task_id;
  std::string concept_label;
  std::string category;
  std::vector<int> rejected;  // entry indices the worker marked as not fitting
  std::string annotator;
};

struct AnnotationRecord {
  std::string task_id;
  Unit unit;
  std::string concept_label;
  Category category = Category::Objects;
  std::vector<int> rejected_positives;  // sorted entry indices
  std::vector<int> rejected_planted;
  double precision = 0;
  std::string timestamp;
  std::string annotator;
};

/// (60 - rejected positives) / 60.
double unit_precision(const AnnotationRecord& record);

enum class SubmitStatus { Accepted, QualityControl, Invalid, Conflict, UnknownTask };
std::string_view to_string(SubmitStatus s);

struct SubmitResult {
  SubmitStatus status = SubmitStatus::Invalid;
  std::string reason;
  std::optional<AnnotationRecord> record;
};

/// Validates a submission against its task. Accepted only when the concept is
/// nonempty, the category is one of the six groups, every index is in range
/// and all planted entries are rejected.
SubmitResult check_submission(const UnitTask& task, const Submission& submission, std::string timestamp);

nlohmann::json to_json(const AnnotationRecord& record);
AnnotationRecord record_from_json(const nlohmann::json& j);
Submission submission_from_json(const nlohmann::json& j);

struct SemanticsDistribution {
  std::string layer;
  double min_precision = 0.75;
  std::array<double, 6> percent{};  // indexed like kCategories
  std::size_t units = 0;            // records of the layer
  std::size_t kept = 0;             // records with precision >= min_precision
  double mean_precision = 0;        // over all records of the layer
  bool empty = true;                // no record passed the filter
};

SemanticsDistribution semantics_distribution(std::span<const AnnotationRecord> records, std::string_view layer,
                                             double min_precision = 0.75);
nlohmann::json to_json(const SemanticsDistribution& d);

/// Append-only newline-delimited JSON store. One record per task id.
class AnnotationStore {
 public:
  /// Loads existing records; an empty path keeps everything in memory.
  explicit AnnotationStore(std::filesystem::path path = {});

  /// False, without writing, when the task already has a record.
  bool append(const AnnotationRecord& record);
  bool contains(const std::string& task_id) const;
  std::vector<AnnotationRecord> records() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<AnnotationRecord> records_;
  std::map<std::string, std::size_t> by_task_;
};

/// HTTP-independent core of the annotation service. Every method is safe to
/// call concurrently.
class AnnotationService {
 public:
  /// Renders the segmented view of one dataset image for a unit.
  using Renderer = std::function<Image(const Unit&, const std::string& image_id)>;
  using Clock = std::function<std::string()>;

  AnnotationService(std::map<Unit, std::vector<Candidate>> candidates, Renderer renderer, AnnotationStore& store,
                    Clock clock = {});

  /// [{"unit", "layer", "channel", "annotated"}]
  nlohmann::json units() const;
  /// Task for a unit and seed, built once and cached. Throws ValidationError
  /// for an unknown unit.
  const UnitTask& task(const Unit& unit, std::uint64_t seed);
  /// Client payload; contains no planted information.
  nlohmann::json task_payload(const UnitTask& task) const;
  /// PNG bytes of the entry named "<task id>:<index>", empty when unknown.
  std::vector<std::uint8_t> image_png(std::string_view image_ref);
  SubmitResult submit(const Submission& submission);
  SemanticsDistribution stats(std::string_view layer, double min_precision = 0.75) const;

 private:
  std::map<Unit, std::vector<Candidate>> candidates_;
  Renderer renderer_;
  AnnotationStore& store_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, UnitTask> tasks_;
};

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

/// Bounding-box crop of a mask's pixels with everything outside the mask
/// darkened; the whole image when the mask is empty.
Image segmented_crop(const Image& image, const Mask& mask);

/// Candidates for each unit from one scan of the dataset (3D inputs).
std::map<Unit, std::vector<Candidate>> collect_candidates(const Model& model, std::span<const Unit> units,
                                                          std::span<const Tensor> images,
                                                          std::span<const std::string> image_ids, int threads = 1);

/// View served to annotators: the image at network resolution cropped to the
/// unit's segmentation at `threshold`, or to the RF of the strongest
/// pre-activation position when nothing passes.
Image unit_view(const Model& model, const Image& image, const Unit& unit, float threshold);

}  // namespace scopelens
