#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scopelens/annotation.hpp"
#include "scopelens/semantics.hpp"

namespace scopelens {

/// One object instance: the pixels of `label` in the image's label mask.
struct ObjectInstance {
  int label = 0;
  std::string object_class;
};

/// Densely annotated scene image.
struct AnnotatedImage {
  std::string id;
  std::string scene;
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> labels;  // row-major label mask
  std::vector<ObjectInstance> objects;

  /// Fraction of pixels covered by instances of the class.
  double coverage(std::string_view object_class) const;
};

/// Throws ValidationError on an empty scene or a mask of the wrong size.
void validate(const AnnotatedImage& image);

/// Index JSON [{"image", "scene", "mask", "classes": {"<label id>": "<class>"}}]
/// with mask paths (16-bit PGM or grayscale PNG) relative to the index.
std::vector<AnnotatedImage> load_dataset(const std::filesystem::path& index);
void save_dataset(std::span<const AnnotatedImage> dataset, const std::filesystem::path& dir);

using Tally = std::vector<std::pair<std::string, std::size_t>>;

/// Instances per class, count descending, ties alphabetical.
Tally object_frequency(std::span<const AnnotatedImage> dataset);

/// Free-text annotation label -> canonical class. Keys are matched after
/// trimming and lowercasing.
class TagMapping {
 public:
  TagMapping() = default;
  explicit TagMapping(const std::map<std::string, std::string>& entries);
  static TagMapping load(const std::filesystem::path& json);

  std::optional<std::string> map(std::string_view tag) const;

 private:
  std::map<std::string, std::string> entries_;
};

struct UnitObjectCounts {
  Tally counts;                                            // units per class, descending, ties alphabetical
  std::vector<std::pair<Unit, std::string>> unmapped;      // unit and its raw tag
};

/// Units whose category is in `categories` and precision >= min_precision,
/// one vote per unit for its mapped class. The latest record of a unit counts.
UnitObjectCounts unit_object_counts(std::span<const AnnotationRecord> records, const TagMapping& mapping,
                                    double min_precision = 0.75,
                                    std::span<const Category> categories = std::span<const Category>());

struct SceneObjectAP {
  std::string scene;
  std::string object_class;
  double ap = 0;
};

struct InformativeObjects {
  Tally counts;                               // scenes where the class is most informative, nonzero only
  std::map<std::string, std::string> best;    // scene -> most informative class
  std::vector<SceneObjectAP> table;           // scene-major, both alphabetical
};

/// For every scene and class, the AP of ranking all images by the class's
/// pixel coverage to retrieve that scene. Requires >= 2 scenes; every scene in
/// `scenes` (default: those present) must have at least one image.
InformativeObjects informative_objects(std::span<const AnnotatedImage> dataset,
                                       std::span<const std::string> scenes = {});

/// Pearson product-moment correlation. Throws PreconditionError on length
/// mismatch, fewer than 2 values or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct EmergenceCorrelations {
  std::vector<std::string> classes;
  std::vector<double> frequency;
  std::vector<double> informative;
  std::vector<double> discovered;
  std::optional<double> frequency_vs_discovered;      // empty when undefined
  std::optional<double> informative_vs_discovered;
};

/// Correlations over every class seen in any of the three tallies; missing
/// classes count 0.
EmergenceCorrelations emergence_correlations(const Tally& frequency, const Tally& informative,
                                             const Tally& discovered);

nlohmann::json analysis_to_json(const Tally& frequency, const UnitObjectCounts& units,
                                const InformativeObjects& informative, const EmergenceCorrelations& correlations);

/// CSV with a header row; class names are quoted when needed.
std::string tally_csv(const Tally& tally, std::string_view value_column);
std::string scene_ap_csv(const InformativeObjects& informative);

struct SyntheticDatasetOptions {
  int scenes = 3;
  int classes = 4;
  int images_per_scene = 10;
  int side = 32;
  int max_objects = 4;
};

/// Images of `scenes` categories built from axis-aligned rectangles of
/// `classes` object classes; each scene prefers a different class, and
/// class frequencies fall off like 1/rank.
std::vector<AnnotatedImage> synthetic_dataset(std::uint64_t seed, const SyntheticDatasetOptions& options = {});

}  // namespace scopelens
