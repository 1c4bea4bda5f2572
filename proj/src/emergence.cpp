#include "scopelens/emergence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "scopelens/error.hpp"
#include "scopelens/png.hpp"
#include "scopelens/rng.hpp"
#include "scopelens/segmenter.hpp"

namespace scopelens {

namespace {

std::string normalize_tag(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Tally sorted_tally(const std::map<std::string, std::size_t>& counts) {
  Tally out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

nlohmann::json tally_json(const Tally& t, const char* value) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [name, n] : t) out.push_back({{"class", name}, {value, n}});
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

constexpr std::array<std::string_view, 12> kClassNames = {"wall",  "floor", "bed",   "sky",  "tree",   "window",
                                                          "table", "chair", "grass", "road", "building", "lamp"};
constexpr std::array<std::string_view, 8> kSceneNames = {"bedroom", "street",   "forest", "kitchen",
                                                         "office",  "beach", "library", "garage"};

std::string pick_name(std::span<const std::string_view> names, int i) {
  if (i < static_cast<int>(names.size())) return std::string(names[i]);
  return std::string(names[i % names.size()]) + std::to_string(i / names.size());
}

}  // namespace

double AnnotatedImage::coverage(std::string_view object_class) const {
  std::set<int> ids;
  for (const ObjectInstance& o : objects) {
    if (o.object_class == object_class) ids.insert(o.label);
  }
  if (ids.empty() || labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (auto l : labels) hit += ids.contains(l);
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

void validate(const AnnotatedImage& image) {
  if (image.scene.empty()) throw ValidationError("image '" + image.id + "' has an empty scene label");
  if (image.width < 1 || image.height < 1 ||
      image.labels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw ValidationError("image '" + image.id + "' has a label mask of the wrong size");
  }
  for (const ObjectInstance& o : image.objects) {
    if (o.object_class.empty()) throw ValidationError("image '" + image.id + "' has an unnamed object");
    if (o.label < 0 || o.label > 65535) throw ValidationError("image '" + image.id + "' has a bad label id");
  }
}

std::vector<AnnotatedImage> load_dataset(const std::filesystem::path& index) {
  std::ifstream in(index);
  if (!in) throw Error("cannot open " + index.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(index.string() + ": " + e.what());
  }
  if (!j.is_array()) throw FormatError(index.string() + ": expected an array of images");
  const auto dir = index.parent_path();
  std::vector<AnnotatedImage> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    AnnotatedImage img;
    std::string mask;
    try {
      img.id = e.at("image").get<std::string>();
      img.scene = e.at("scene").get<std::string>();
      mask = e.at("mask").get<std::string>();
      for (const auto& [key, value] : e.at("classes").items()) {
        img.objects.push_back({std::stoi(key), value.get<std::string>()});
      }
    } catch (const std::exception& ex) {
      throw FormatError(index.string() + ": entry " + std::to_string(i) + ": " + ex.what());
    }
    std::sort(img.objects.begin(), img.objects.end(),
              [](const ObjectInstance& a, const ObjectInstance& b) { return a.label < b.label; });
    GrayImage g = load_label_image(dir / mask);
    img.width = g.width;
    img.height = g.height;
    img.labels = std::move(g.samples);
    validate(img);
    out.push_back(std::move(img));
  }
  return out;
}

void save_dataset(std::span<const AnnotatedImage> dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "masks");
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const AnnotatedImage& img = dataset[i];
    validate(img);
    const std::string mask = "masks/" + std::to_string(i) + ".pgm";
    write_file(dir / mask, encode_pgm(GrayImage{img.width, img.height, 65535, img.labels}));
    nlohmann::json classes = nlohmann::json::object();
    for (const ObjectInstance& o : img.objects) classes[std::to_string(o.label)] = o.object_class;
    index.push_back({{"image", img.id}, {"scene", img.scene}, {"mask", mask}, {"classes", classes}});
  }
  std::ofstream out(dir / "index.json");
  if (!out) throw Error("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

Tally object_frequency(std::span<const AnnotatedImage> dataset) {
  std::map<std::string, std::size_t> counts;
  for (const AnnotatedImage& img : dataset) {
    for (const ObjectInstance& o : img.objects) ++counts[o.object_class];
  }
  return sorted_tally(counts);
}

TagMapping::TagMapping(const std::map<std::string, std::string>& entries) {
  for (const auto& [tag, cls] : entries) entries_[normalize_tag(tag)] = cls;
}

TagMapping TagMapping::load(const std::filesystem::path& json) {
  std::ifstream in(json);
  if (!in) throw Error("cannot open " + json.string());
  try {
    return TagMapping(nlohmann::json::parse(in).get<std::map<std::string, std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json.string() + ": " + e.what());
  }
}

std::optional<std::string> TagMapping::map(std::string_view tag) const {
  auto it = entries_.find(normalize_tag(tag));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

UnitObjectCounts unit_object_counts(std::span<const AnnotationRecord> records, const TagMapping& mapping,
                                    double min_precision, std::span<const Category> categories) {
  static constexpr std::array<Category, 1> kObjects = {Category::Objects};
  if (categories.empty()) categories = kObjects;
  std::map<Unit, const AnnotationRecord*> latest;
  for (const AnnotationRecord& r : records) latest[r.unit] = &r;

  UnitObjectCounts out;
  std::map<std::string, std::size_t> counts;
  for (const auto& [unit, r] : latest) {
    if (std::find(categories.begin(), categories.end(), r->category) == categories.end()) continue;
    if (r->precision < min_precision) continue;
    if (auto cls = mapping.map(r->concept_label)) {
      ++counts[*cls];
    } else {
      out.unmapped.emplace_back(unit, r->concept_label);
    }
  }
  out.counts = sorted_tally(counts);
  return out;
}

InformativeObjects informative_objects(std::span<const AnnotatedImage> dataset, std::span<const std::string> scenes) {
  std::set<std::string> present;
  std::set<std::string> classes;
  for (const AnnotatedImage& img : dataset) {
    present.insert(img.scene);
    for (const ObjectInstance& o : img.objects) classes.insert(o.object_class);
  }
  std::vector<std::string> targets = scenes.empty() ? std::vector<std::string>(present.begin(), present.end())
                                                    : std::vector<std::string>(scenes.begin(), scenes.end());
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  if (targets.size() < 2) throw PreconditionError("informative objects need at least 2 scene categories");
  for (const std::string& s : targets) {
    if (!present.contains(s)) throw PreconditionError("scene '" + s + "' has no images");
  }

  std::map<std::string, std::vector<float>> coverage;
  for (const std::string& c : classes) {
    auto& v = coverage[c];
    for (const AnnotatedImage& img : dataset) v.push_back(static_cast<float>(img.coverage(c)));
  }

  InformativeObjects out;
  std::map<std::string, std::size_t> wins;
  for (const std::string& s : targets) {
    std::vector<bool> positive;
    for (const AnnotatedImage& img : dataset) positive.push_back(img.scene == s);
    double best_ap = -1;
    for (const std::string& c : classes) {
      const double ap = pr_ap(coverage[c], positive).ap;
      out.table.push_back({s, c, ap});
      if (ap > best_ap) {
        best_ap = ap;
        out.best[s] = c;
      }
    }
    if (out.best.contains(s)) ++wins[out.best[s]];
  }
  out.counts = sorted_tally(wins);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("pearson: lengths differ");
  if (x.size() < 2) throw PreconditionError("pearson needs at least 2 values");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw PreconditionError("pearson is undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

EmergenceCorrelations emergence_correlations(const Tally& frequency, const Tally& informative,
                                             const Tally& discovered) {
  std::map<std::string, std::array<double, 3>> table;
  for (const auto& [c, n] : frequency) table[c][0] = static_cast<double>(n);
  for (const auto& [c, n] : informative) table[c][1] = static_cast<double>(n);
  for (const auto& [c, n] : discovered) table[c][2] = static_cast<double>(n);
  EmergenceCorrelations out;
  for (const auto& [c, v] : table) {
    out.classes.push_back(c);
    out.frequency.push_back(v[0]);
    out.informative.push_back(v[1]);
    out.discovered.push_back(v[2]);
  }
  auto safe = [](std::span<const double> a, std::span<const double> b) -> std::optional<double> {
    try {
      return pearson(a, b);
    } catch (const PreconditionError&) {
      return std::nullopt;
    }
  };
  out.frequency_vs_discovered = safe(out.frequency, out.discovered);
  out.informative_vs_discovered = safe(out.informative, out.discovered);
  return out;
}

nlohmann::json analysis_to_json(const Tally& frequency, const UnitObjectCounts& units,
                                const InformativeObjects& informative, const EmergenceCorrelations& correlations) {
  nlohmann::json unmapped = nlohmann::json::array();
  for (const auto& [u, tag] : units.unmapped) unmapped.push_back({{"unit", to_string(u)}, {"tag", tag}});
  nlohmann::json table = nlohmann::json::array();
  for (const SceneObjectAP& e : informative.table) {
    table.push_back({{"scene", e.scene}, {"class", e.object_class}, {"ap", e.ap}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {
      {"metadata",
       {{"informative_metric",
         "one-vs-all average precision of ranking all images by the object class's pixel-coverage fraction"},
        {"unit_filter", "latest record per unit, category filter, precision >= threshold"}}},
      {"object_frequency", tally_json(frequency, "count")},
      {"unit_object_counts", tally_json(units.counts, "units")},
      {"unmapped_tags", unmapped},
      {"informative_objects", tally_json(informative.counts, "scenes")},
      {"most_informative", informative.best},
      {"scene_object_ap", table},
      {"correlations",
       {{"classes", correlations.classes},
        {"frequency_vs_discovered", opt(correlations.frequency_vs_discovered)},
        {"informative_vs_discovered", opt(correlations.informative_vs_discovered)}}},
  };
}

std::string tally_csv(const Tally& tally, std::string_view value_column) {
  std::ostringstream out;
  out << "class," << value_column << '\n';
  for (const auto& [c, n] : tally) out << csv_field(c) << ',' << n << '\n';
  return out.str();
}

std::string scene_ap_csv(const InformativeObjects& informative) {
  std::ostringstream out;
  out.precision(17);
  out << "scene,class,ap\n";
  for (const SceneObjectAP& e : informative.table) {
    out << csv_field(e.scene) << ',' << csv_field(e.object_class) << ',' << e.ap << '\n';
  }
  return out.str();
}

std::vector<AnnotatedImage> synthetic_dataset(std::uint64_t seed, const SyntheticDatasetOptions& o) {
  if (o.scenes < 1 || o.classes < 1 || o.images_per_scene < 1 || o.side < 8 || o.max_objects < 1) {
    throw PreconditionError("synthetic dataset options must be positive (side >= 8)");
  }
  Rng rng(seed);
  double total = 0;
  for (int c = 0; c < o.classes; ++c) total += 1.0 / (c + 1);
  std::vector<AnnotatedImage> out;
  for (int s = 0; s < o.scenes; ++s) {
    for (int i = 0; i < o.images_per_scene; ++i) {
      AnnotatedImage img;
      img.id = "synth_" + std::to_string(s) + "_" + std::to_string(i);
      img.scene = pick_name(kSceneNames, s);
      img.width = img.height = o.side;
      img.labels.assign(static_cast<std::size_t>(o.side) * o.side, 0);
      const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_objects)));
      for (int k = 0; k < n; ++k) {
        int c = s % o.classes;
        if (rng.uniform() >= 0.5) {
          double u = rng.uniform() * total;
          for (c = 0; c + 1 < o.classes && u >= 1.0 / (c + 1); ++c) u -= 1.0 / (c + 1);
        }
        const int w = o.side / 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.side / 2)));
        const int h = o.side / 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.side / 2)));
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(o.side - w + 1)));
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(o.side - h + 1)));
        for (int y = y0; y < y0 + h; ++y) {
          for (int x = x0; x < x0 + w; ++x) img.labels[static_cast<std::size_t>(y) * o.side + x] =
              static_cast<std::uint16_t>(k + 1);
        }
        img.objects.push_back({k + 1, pick_name(kClassNames, c)});
      }
      out.push_back(std::move(img));
    }
  }
  return out;
}

}  // namespace scopelens
