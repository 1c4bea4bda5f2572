#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scopelens/annotation.hpp"
#include "scopelens/annotation_http.hpp"
#include "scopelens/emergence.hpp"
#include "scopelens/error.hpp"
#include "scopelens/occlusion.hpp"
#include "scopelens/parallel.hpp"
#include "scopelens/planted.hpp"
#include "scopelens/png.hpp"
#include "scopelens/poisson.hpp"
#include "scopelens/receptive_field.hpp"
#include "scopelens/segmenter.hpp"
#include "scopelens/segments.hpp"
#include "scopelens/simplifier.hpp"

#ifndef SCOPELENS_DATA_DIR
#define SCOPELENS_DATA_DIR "data"
#endif

namespace scopelens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Env {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;

  int threads() const { return cfg.threads > 0 ? cfg.threads : default_threads(); }

  fs::path out_dir() const {
    fs::create_directories(cfg.out);
    return cfg.out;
  }

  // Writes the human-readable text to stdout and next to the data files.
  void text(const std::string& name, const std::string& body) const {
    out << body;
    write(name, body);
  }

  void write(const std::string& name, const std::string& body) const {
    const fs::path p = out_dir() / name;
    std::ofstream f(p);
    if (!f) throw Error("cannot write " + p.string());
    f << body;
  }
};

std::string bundled_net() { return (fs::path(SCOPELENS_DATA_DIR) / "places-alexnet.json").string(); }

NetworkSpec load_spec(const Env& env) { return load_netspec(env.cfg.net.empty() ? bundled_net() : env.cfg.net); }

Model load_model(const Env& env) {
  NetworkSpec spec = load_spec(env);
  if (env.cfg.weights.empty()) {
    env.err << "note: no --weights given; using He-normal random weights (seed " << env.cfg.seed << ")\n";
    WeightStore w = random_weights(spec, env.cfg.seed);
    return Model(std::move(spec), std::move(w));
  }
  WeightStore w = load_weights(env.cfg.weights, spec);
  return Model(std::move(spec), std::move(w));
}

std::vector<Unit> parse_units(const std::vector<std::string>& texts, const std::string& layer, const NetworkSpec& spec) {
  std::vector<Unit> units;
  for (const std::string& t : texts) units.push_back(parse_unit(t));
  if (!layer.empty()) {
    const int channels = spec.output_shape(spec.index_of(layer)).channels;
    for (int c = 0; c < channels; ++c) units.push_back({layer, c});
  }
  if (units.empty()) throw UsageError("give --units or --layer");
  for (const Unit& u : units) check_unit(spec, u);
  return units;
}

struct DatasetImage {
  std::string id;  // path as written in the index, or file name
  fs::path path;
};

// A directory of .ppm/.png files (sorted by name) or an index JSON whose
// entries carry an "image" path relative to the index.
std::vector<DatasetImage> list_images(const std::string& dataset) {
  if (dataset.empty()) throw UsageError("this command needs --dataset");
  const fs::path p(dataset);
  std::vector<DatasetImage> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".ppm" || ext == ".png")) out.push_back({e.path().filename().string(), e.path()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  } else {
    std::ifstream in(p);
    if (!in) throw Error("cannot open " + p.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
    for (const auto& e : j) {
      const std::string id = e.at("image").get<std::string>();
      out.push_back({id, p.parent_path() / id});
    }
  }
  if (out.empty()) throw Error("no images in " + dataset);
  return out;
}

std::vector<Tensor> load_tensors(const std::vector<DatasetImage>& images, const NetworkSpec& spec) {
  std::vector<Tensor> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(preprocess(load_image(img.path), spec.input_side(), spec.mean()));
  return out;
}

struct TagEntry {
  UnitTag tag;
  std::optional<float> threshold;
};

// [{"unit": "pool5:3", "concept": "lamp", "category": "objects",
//   "precision": 0.9, "threshold": 12.5}]
std::vector<TagEntry> load_tags(const std::string& path) {
  if (path.empty()) throw UsageError("this command needs --tags");
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<TagEntry> out;
  try {
    for (const auto& e : json::parse(in)) {
      TagEntry t;
      t.tag.unit = parse_unit(e.at("unit").get<std::string>());
      t.tag.concept_label = e.at("concept").get<std::string>();
      t.tag.category = category_from_string(e.value("category", "objects"));
      t.tag.precision = e.value("precision", 1.0);
      if (e.contains("threshold")) t.threshold = e.at("threshold").get<float>();
      out.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return out;
}

// Thresholds for the tags: given ones, else the quantile over --dataset.
std::vector<float> tag_thresholds(const Env& env, const Model& model, const std::vector<TagEntry>& tags, double q) {
  std::vector<float> th(tags.size());
  std::vector<Unit> missing;
  for (const TagEntry& t : tags)
    if (!t.threshold) missing.push_back(t.tag.unit);
  std::vector<float> calibrated;
  if (!missing.empty()) {
    const auto images = list_images(env.cfg.dataset);
    calibrated = calibrate_thresholds(model, missing, load_tensors(images, model.spec()), q, env.threads());
  }
  std::size_t m = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) th[i] = tags[i].threshold ? *tags[i].threshold : calibrated[m++];
  return th;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

int resolve_class(const NetworkSpec& spec, const std::string& text) {
  const auto& labels = spec.class_labels();
  auto it = std::find(labels.begin(), labels.end(), text);
  if (it != labels.end()) return static_cast<int>(it - labels.begin());
  try {
    std::size_t used = 0;
    const int i = std::stoi(text, &used);
    if (used == text.size() && i >= 0) return i;
  } catch (const std::exception&) {
  }
  throw UsageError("unknown class '" + text + "'");
}

// ---------------------------------------------------------------- commands

void cmd_forward(const Env& env, const std::string& image_path, int top) {
  if (top < 1) throw UsageError("--top must be positive");
  const Model model = load_model(env);
  const NetworkSpec& spec = model.spec();
  const Tensor input = preprocess(load_image(image_path), spec.input_side(), spec.mean());
  const ActivationTrace trace = model.forward_one(input, {.stop_after = std::nullopt, .keep_all = false});
  const auto best = top_k(trace.final_output(), 0, top);
  json j = {{"image", image_path}, {"network", spec.name()}, {"top", json::array()}};
  std::ostringstream t;
  for (std::size_t i = 0; i < best.size(); ++i) {
    const auto [cls, p] = best[i];
    j["top"].push_back({{"rank", i + 1}, {"class", cls}, {"label", spec.class_label(cls)}, {"prob", p}});
    t << std::setw(2) << i + 1 << "  " << fixed(p, 6) << "  " << spec.class_label(cls) << '\n';
  }
  env.write("forward.json", j.dump(2) + "\n");
  env.text("forward.txt", t.str());
}

void cmd_rf_theoretic(const Env& env) {
  const NetworkSpec spec = load_spec(env);
  json rows = json::array();
  std::ostringstream csv, t;
  csv << "layer,kind,output,size,stride,offset\n";
  t << std::left << std::setw(10) << "layer" << std::setw(9) << "kind" << std::right << std::setw(8) << "output"
    << std::setw(7) << "size" << std::setw(8) << "stride" << std::setw(8) << "offset" << '\n';
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const LayerSpec& l = spec.layer(i);
    if (!l.is_spatial()) break;
    if (l.kind == LayerKind::Relu) continue;
    const RFGeometry rf = theoretical_rf(spec, i);
    const FeatureShape s = spec.output_shape(i);
    const std::string kind(to_string(l.kind));
    rows.push_back({{"layer", l.name}, {"kind", kind}, {"output", s.width}, {"size", rf.size},
                    {"stride", rf.stride}, {"offset", rf.offset}});
    csv << l.name << ',' << kind << ',' << s.width << ',' << rf.size << ',' << rf.stride << ',' << rf.offset << '\n';
    t << std::left << std::setw(10) << l.name << std::setw(9) << kind << std::right << std::setw(8) << s.width
      << std::setw(7) << rf.size << std::setw(8) << rf.stride << std::setw(8) << rf.offset << '\n';
  }
  env.write("rf_theoretic.json", json{{"network", spec.name()}, {"layers", rows}}.dump(2) + "\n");
  env.write("rf_theoretic.csv", csv.str());
  env.text("rf_theoretic.txt", t.str());
}

struct RFEstimateArgs {
  std::vector<std::string> units;
  std::string layer;
  std::size_t top_k = 25;
  int patch = 11;
  int stride = 3;
  std::string fill = "random";
  std::string rank = "max";
  double theta = 0.5;
};

void cmd_rf_estimate(const Env& env, const RFEstimateArgs& a) {
  const Model model = load_model(env);
  const NetworkSpec& spec = model.spec();
  const auto units = parse_units(a.units, a.layer, spec);
  const auto images = list_images(env.cfg.dataset);
  const auto tensors = load_tensors(images, spec);
  RFEstimationConfig config{a.top_k, a.patch, a.stride, rank_mode_from_string(a.rank), fill_mode_from_string(a.fill),
                            env.cfg.seed, env.threads()};

  std::map<Unit, EmpiricalRF> rfs;
  std::map<std::string, std::vector<EmpiricalRF>> by_layer;
  json rows = json::array();
  std::ostringstream csv, t;
  csv << "unit,theoretical,empirical,peak_dx,peak_dy,k\n";
  t << std::left << std::setw(14) << "unit" << std::right << std::setw(12) << "theoretical" << std::setw(11)
    << "empirical" << std::setw(10) << "peak" << '\n';
  for (const Unit& u : units) {
    const UnitRFEstimate est = estimate_unit_rf(model, tensors, u, config);
    const int theoretical = theoretical_rf(spec, u.layer).size;
    const Point peak = canvas_peak(est.rf);
    const int dx = peak.x - est.rf.center(), dy = peak.y - est.rf.center();
    std::optional<double> size;
    try {
      size = rf_size(est.rf, a.theta);
    } catch (const PreconditionError&) {
      env.err << "warning: " << to_string(u) << " never responded to occlusion\n";
    }
    const std::string stem = "rf_" + u.layer + "_" + std::to_string(u.channel);
    write_file(env.out_dir() / (stem + ".pgm"),
               encode_pgm(to_gray8(est.rf.canvas, est.rf.canvas_side, est.rf.canvas_side)));
    json top = json::array();
    for (const RankedImage& r : est.top_images) top.push_back({{"image", images[r.image_id].id}, {"score", r.score}});
    rows.push_back({{"unit", to_string(u)},
                    {"theoretical", theoretical},
                    {"empirical", size ? json(*size) : json(nullptr)},
                    {"peak_offset", {dx, dy}},
                    {"k", est.rf.k_used},
                    {"top_images", top}});
    csv << to_string(u) << ',' << theoretical << ',' << (size ? fixed(*size, 3) : "") << ',' << dx << ',' << dy << ','
        << est.rf.k_used << '\n';
    t << std::left << std::setw(14) << to_string(u) << std::right << std::setw(12) << theoretical << std::setw(11)
      << (size ? fixed(*size, 2) : "-") << std::setw(10) << ("(" + std::to_string(dx) + "," + std::to_string(dy) + ")")
      << '\n';
    if (size) by_layer[u.layer].push_back(est.rf);
    rfs.emplace(u, est.rf);
  }
  json layers = json::object();
  for (const auto& [layer, list] : by_layer) {
    const SizeStats s = rf_size_stats(list, a.theta);
    layers[layer] = {{"mean", s.mean}, {"stddev", s.stddev}, {"units", s.count},
                     {"theoretical", theoretical_rf(spec, layer).size}};
    t << layer << ": empirical " << fixed(s.mean, 2) << " +- " << fixed(s.stddev, 2) << " over " << s.count
      << " units (theoretical " << theoretical_rf(spec, layer).size << ")\n";
  }
  save_empirical_rfs(rfs, env.out_dir() / "empirical_rf.nnw");
  json meta = {{"top_k", a.top_k}, {"patch", a.patch},  {"stride", a.stride}, {"fill", a.fill},
               {"rank", a.rank},   {"theta", a.theta},  {"seed", env.cfg.seed}};
  env.write("rf_estimate.json", json{{"config", meta}, {"units", rows}, {"layers", layers}}.dump(2) + "\n");
  env.write("rf_estimate.csv", csv.str());
  env.text("rf_estimate.txt", t.str());
}

struct SimplifyArgs {
  std::string image;
  std::string segments;
  std::string names;
  int grid = 0;
  std::string target;
  double tolerance = PoissonOptions{}.tolerance;
};

void cmd_simplify(const Env& env, const SimplifyArgs& a) {
  const Model model = load_model(env);
  const NetworkSpec& spec = model.spec();
  Image img = load_image(a.image);
  SegmentMap seg;
  if (!a.segments.empty()) {
    seg = load_segment_map(a.segments, a.names);
  } else if (a.grid > 0) {
    seg = grid_segments(img.width(), img.height(), a.grid);
  } else {
    throw UsageError("give --segments or --grid");
  }
  if (seg.width() != img.width() || seg.height() != img.height()) {
    throw ValidationError("segment map is " + std::to_string(seg.width()) + "x" + std::to_string(seg.height()) +
                          " but the image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  int target = 0;
  if (a.target.empty()) {
    const std::array<Image, 1> one = {img};
    target = score_images(model, one, 0, env.threads())[0].top1;
  } else {
    target = resolve_class(spec, a.target);
  }
  SimplifyOptions opts;
  opts.poisson.tolerance = a.tolerance;
  opts.threads = env.threads();
  const SimplificationTrace trace = greedy_simplify(model, img, seg, target, opts);
  save_ppm(trace.final_image, env.out_dir() / "simplified.ppm");
  save_png(trace.final_image, env.out_dir() / "simplified.png");
  env.write("simplify.json", trace_to_json(trace, seg) + "\n");

  std::ostringstream t;
  t << "target " << spec.class_label(target) << "  initial " << fixed(trace.initial_score, 4) << '\n';
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    t << "step " << i + 1 << ": remove segment " << s.label;
    if (!seg.name(s.label).empty()) t << " (" << seg.name(s.label) << ")";
    t << "  score " << fixed(s.score, 4) << '\n';
  }
  if (trace.stopped_by) t << "stopped: removing segment " << trace.stopped_by->label << " changes the class\n";
  t << "retained " << trace.retained.size() << " of " << seg.label_count() << " segments, final score "
    << fixed(trace.final_score, 4) << '\n';
  env.text("simplify.txt", t.str());
}

struct SegmentArgs {
  std::string image;
  std::vector<std::string> units;
  std::string layer;
  std::vector<float> thresholds;
  double quantile = 0.995;
};

json detection_json(const Detection& d) {
  json j = {{"unit", to_string(d.unit)}, {"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}}, {"score", d.score}};
  if (d.tag) {
    j["tag"] = d.tag->concept_label;
    j["category"] = to_string(d.tag->category);
  }
  return j;
}

void cmd_segment(const Env& env, const SegmentArgs& a) {
  const Model model = load_model(env);
  const NetworkSpec& spec = model.spec();
  const auto units = parse_units(a.units, a.layer, spec);
  std::vector<float> th = a.thresholds;
  if (th.empty()) {
    const auto images = list_images(env.cfg.dataset);
    th = calibrate_thresholds(model, units, load_tensors(images, spec), a.quantile, env.threads());
  } else if (th.size() == 1 && units.size() > 1) {
    th.assign(units.size(), th[0]);
  }
  if (th.size() != units.size()) throw UsageError("give one threshold per unit, or a single one for all");
  const Tensor input = preprocess(load_image(a.image), spec.input_side(), spec.mean());
  const Segmentation seg = segment(model, input, units, th);

  json ju = json::array();
  std::ostringstream t;
  for (const UnitSegmentation& u : seg.units) {
    const std::string stem = "mask_" + u.unit.layer + "_" + std::to_string(u.unit.channel) + ".pgm";
    write_file(env.out_dir() / stem, encode_pgm(to_gray8(u.mask)));
    json dets = json::array();
    for (const Detection& d : u.detections) dets.push_back(detection_json(d));
    ju.push_back({{"unit", to_string(u.unit)}, {"threshold", u.threshold}, {"mask", stem},
                  {"pixels", u.mask.count()}, {"detections", dets}});
  }
  json all = json::array();
  for (const Detection& d : seg.detections) {
    all.push_back(detection_json(d));
    t << std::left << std::setw(14) << to_string(d.unit) << std::right << " box (" << d.box.x0 << "," << d.box.y0
      << ")-(" << d.box.x1 << "," << d.box.y1 << ")  score " << fixed(d.score, 4) << '\n';
  }
  if (seg.detections.empty()) t << "no unit fired above its threshold\n";
  env.write("segment.json", json{{"image", a.image}, {"units", ju}, {"detections", all}}.dump(2) + "\n");
  env.text("segment.txt", t.str());
}

void cmd_report(const Env& env, const std::string& image, const std::string& tags_path, int top, double q) {
  const Model model = load_model(env);
  const NetworkSpec& spec = model.spec();
  const auto tags = load_tags(tags_path);
  const auto th = tag_thresholds(env, model, tags, q);
  std::vector<Unit> units;
  std::map<Unit, UnitTag> tag_map;
  std::map<Unit, float> th_map;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    units.push_back(tags[i].tag.unit);
    tag_map[tags[i].tag.unit] = tags[i].tag;
    th_map[tags[i].tag.unit] = th[i];
  }
  const Tensor input = preprocess(load_image(image), spec.input_side(), spec.mean());
  const SceneReport rep = report(model, input, units, tag_map, th_map, top);
  env.write("report.json", report_to_json(rep) + "\n");
  std::ostringstream t;
  t << "scenes:\n";
  for (const SceneScore& s : rep.scenes) t << "  " << fixed(s.prob, 4) << "  " << s.label << '\n';
  t << "objects:\n";
  for (const Detection& d : rep.detections) {
    t << "  " << std::left << std::setw(16) << d.tag->concept_label << std::setw(12) << to_string(d.unit) << std::right
      << " (" << d.box.x0 << "," << d.box.y0 << ")-(" << d.box.x1 << "," << d.box.y1 << ")  " << fixed(d.score, 3)
      << '\n';
  }
  if (rep.detections.empty()) t << "  none\n";
  env.text("report.txt", t.str());
}

struct AnalyzeArgs {
  std::string records;
  std::string mapping;
  double min_precision = 0.75;
  std::vector<std::string> categories;
  std::vector<std::string> scenes;
};

void cmd_analyze(const Env& env, const AnalyzeArgs& a) {
  if (env.cfg.dataset.empty()) throw UsageError("analyze needs --dataset <index.json>");
  const auto dataset = load_dataset(env.cfg.dataset);
  const Tally freq = object_frequency(dataset);
  const InformativeObjects info = informative_objects(dataset, a.scenes);
  UnitObjectCounts units;
  if (!a.records.empty()) {
    std::vector<Category> cats;
    for (const std::string& c : a.categories) cats.push_back(category_from_string(c));
    std::map<std::string, std::string> same;
    for (const auto& [cls, n] : freq) same[cls] = cls;
    const TagMapping mapping = a.mapping.empty() ? TagMapping(same) : TagMapping::load(a.mapping);
    units = unit_object_counts(AnnotationStore(a.records).records(), mapping, a.min_precision, cats);
  }
  const EmergenceCorrelations corr = emergence_correlations(freq, info.counts, units.counts);
  env.write("analysis.json", analysis_to_json(freq, units, info, corr).dump(2) + "\n");
  env.write("object_frequency.csv", tally_csv(freq, "count"));
  env.write("unit_object_counts.csv", tally_csv(units.counts, "units"));
  env.write("informative_objects.csv", tally_csv(info.counts, "scenes"));
  env.write("scene_object_ap.csv", scene_ap_csv(info));

  std::ostringstream t;
  t << dataset.size() << " images, " << freq.size() << " object classes, " << info.best.size() << " scenes\n";
  t << "most frequent objects:";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, freq.size()); ++i) t << ' ' << freq[i].first << '(' << freq[i].second << ')';
  t << "\nmost informative object per scene:\n";
  for (const auto& [scene, cls] : info.best) t << "  " << scene << ": " << cls << '\n';
  if (!a.records.empty()) {
    t << "units per object class:";
    for (const auto& [c, n] : units.counts) t << ' ' << c << '(' << n << ')';
    t << '\n';
    if (!units.unmapped.empty()) t << units.unmapped.size() << " unit tags have no class mapping\n";
  }
  auto show = [](const std::optional<double>& v) { return v ? fixed(*v, 3) : std::string("undefined"); };
  t << "correlation frequency vs discovered: " << show(corr.frequency_vs_discovered) << '\n';
  t << "correlation informative vs discovered: " << show(corr.informative_vs_discovered) << '\n';
  env.text("analysis.txt", t.str());
}

struct EvalSegArgs {
  std::string tags;
  std::string mapping;
  double quantile = 0.995;
};

// Nearest-neighbour resample of an image's class pixels to side x side.
Mask class_mask(const AnnotatedImage& img, const std::string& cls, int side) {
  std::set<int> ids;
  for (const auto& o : img.objects)
    if (o.object_class == cls) ids.insert(o.label);
  Mask m(side, side);
  for (int y = 0; y < side; ++y) {
    const int sy = std::min(img.height - 1, static_cast<int>((y + 0.5) * img.height / side));
    for (int x = 0; x < side; ++x) {
      const int sx = std::min(img.width - 1, static_cast<int>((x + 0.5) * img.width / side));
      if (ids.contains(img.labels[static_cast<std::size_t>(sy) * img.width + sx])) m.set(x, y);
    }
  }
  return m;
}

void cmd_eval_seg(const Env& env, const EvalSegArgs& a) {
  if (env.cfg.dataset.empty()) throw UsageError("eval-seg needs --dataset <index.json>");
  const Model model = load_model(env);
  const NetworkSpec& spec = model.spec();
  const auto tags = load_tags(a.tags);
  const auto th = tag_thresholds(env, model, tags, a.quantile);
  const TagMapping mapping = a.mapping.empty() ? TagMapping() : TagMapping::load(a.mapping);
  const auto dataset = load_dataset(env.cfg.dataset);
  const fs::path root = fs::path(env.cfg.dataset).parent_path();

  std::vector<Unit> units;
  std::map<std::string, std::vector<std::size_t>> by_class;  // class -> unit indices
  for (std::size_t i = 0; i < tags.size(); ++i) {
    units.push_back(tags[i].tag.unit);
    const auto mapped = mapping.map(tags[i].tag.concept_label);
    by_class[mapped ? *mapped : tags[i].tag.concept_label].push_back(i);
  }
  const int side = spec.input_side();
  std::map<std::string, std::vector<SegmentationSample>> samples;
  for (const AnnotatedImage& img : dataset) {
    const Tensor input = preprocess(load_image(root / img.id), side, spec.mean());
    const Segmentation seg = segment(model, input, units, th);
    for (const auto& [cls, members] : by_class) {
      SegmentationSample s{Mask(side, side), class_mask(img, cls, side), 0.0f, false};
      s.positive = std::any_of(img.objects.begin(), img.objects.end(),
                               [&](const ObjectInstance& o) { return o.object_class == cls; });
      for (std::size_t u : members) {
        const UnitSegmentation& us = seg.units[u];
        for (std::size_t p = 0; p < us.mask.bits().size(); ++p) {
          if (us.mask.bits()[p]) s.predicted.set(static_cast<int>(p % side), static_cast<int>(p / side));
        }
        for (const Detection& d : us.detections) s.score = std::max(s.score, d.score);
      }
      samples[cls].push_back(std::move(s));
    }
  }

  json rows = json::array();
  std::ostringstream csv, t;
  csv << "class,units,jaccard,ap,images,positives\n";
  for (const auto& [cls, list] : samples) {
    const std::size_t positives = std::count_if(list.begin(), list.end(), [](const auto& s) { return s.positive; });
    if (positives == 0) {
      env.err << "warning: class '" << cls << "' never appears in the dataset; skipped\n";
      continue;
    }
    const SegmentationScore score = evaluate_segmentation(list);
    std::vector<float> scores;
    std::vector<bool> labels;
    for (const auto& s : list) {
      scores.push_back(s.score);
      labels.push_back(s.positive);
    }
    json curve = json::array();
    for (const PRPoint& p : pr_ap(scores, labels).points) {
      curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
    }
    rows.push_back({{"class", cls}, {"units", by_class[cls].size()}, {"jaccard", score.mean_jaccard},
                    {"ap", score.ap}, {"images", score.samples}, {"positives", score.positives}, {"pr", curve}});
    csv << cls << ',' << by_class[cls].size() << ',' << score.mean_jaccard << ',' << score.ap << ',' << score.samples
        << ',' << score.positives << '\n';
    t << std::left << std::setw(16) << cls << std::right << " J " << fixed(score.mean_jaccard, 3) << "  AP "
      << fixed(score.ap, 3) << "  (" << score.positives << "/" << score.samples << " images)\n";
  }
  env.write("eval_seg.json", json{{"classes", rows}}.dump(2) + "\n");
  env.write("eval_seg.csv", csv.str());
  env.text("eval_seg.txt", t.str());
}

struct ServeArgs {
  std::vector<std::string> units;
  std::string layer;
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
  double quantile = 0.995;
};

void cmd_serve(const Env& env, const ServeArgs& a) {
  const Model model = load_model(env);
  const NetworkSpec& spec = model.spec();
  const auto units = parse_units(a.units, a.layer, spec);
  const auto images = list_images(env.cfg.dataset);
  if (images.size() < static_cast<std::size_t>(kTaskSize)) {
    throw PreconditionError("annotation tasks need at least " + std::to_string(kTaskSize) + " images, the dataset has " +
                            std::to_string(images.size()));
  }
  const auto tensors = load_tensors(images, spec);
  std::vector<std::string> ids;
  std::map<std::string, fs::path> paths;
  for (const auto& img : images) {
    ids.push_back(img.id);
    paths[img.id] = img.path;
  }
  auto candidates = collect_candidates(model, units, tensors, ids, env.threads());
  const auto th = calibrate_thresholds(model, units, tensors, a.quantile, env.threads());
  std::map<Unit, float> threshold;
  for (std::size_t i = 0; i < units.size(); ++i) threshold[units[i]] = th[i];

  const fs::path store_path = a.store.empty() ? env.out_dir() / "annotations.ndjson" : fs::path(a.store);
  AnnotationStore store(store_path);
  AnnotationService service(
      std::move(candidates),
      [&](const Unit& u, const std::string& id) { return unit_view(model, load_image(paths.at(id)), u, threshold.at(u)); },
      store);
  json meta = {{"host", a.host}, {"port", a.port}, {"units", units.size()}, {"images", images.size()},
               {"store", store_path.string()}, {"quantile", a.quantile}};
  env.write("serve.json", meta.dump(2) + "\n");
  env.text("serve.txt", "serving " + std::to_string(units.size()) + " units over " + std::to_string(images.size()) +
                            " images on http://" + a.host + ":" + std::to_string(a.port) + "\n");
  env.out.flush();
  serve_annotation(service, a.host, a.port);
}

void cmd_init_weights(const Env& env, const std::string& output) {
  const NetworkSpec spec = load_spec(env);
  const WeightStore w = random_weights(spec, env.cfg.seed);
  const fs::path path = output.empty() ? env.out_dir() / "weights.nnw" : fs::path(output);
  save_weights(w, path);
  std::size_t params = 0;
  for (const auto& [name, t] : w) params += t.size();
  env.write("init_weights.json",
            json{{"network", spec.name()}, {"path", path.string()}, {"seed", env.cfg.seed}, {"blobs", w.size()},
                 {"parameters", params}}
                    .dump(2) +
                "\n");
  env.text("init_weights.txt", "wrote " + std::to_string(w.size()) + " blobs (" + std::to_string(params) +
                                   " parameters) to " + path.string() + "\n");
}

struct SynthArgs {
  std::string kind = "planted";
  int count = 100;
  int scenes = 3;
  int classes = 4;
  int side = 64;
};

void synth_planted(const Env& env, const SynthArgs& a) {
  const PlantedDetector d = make_planted_detector(env.cfg.seed + 1);
  const fs::path dir = env.out_dir();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  {
    std::ofstream f(dir / "planted-net.json");
    f << netspec_to_json(d.model.spec()) << '\n';
  }
  save_weights(d.model.weights(), dir / "planted-weights.nnw");
  Rng rng(env.cfg.seed);
  json index = json::array();
  for (int i = 0; i < a.count; ++i) {
    const bool with = i % 2 == 0;
    const PlantedImage p = planted_image(d, rng, with);
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i;
    const std::string img = "images/" + name.str() + ".ppm", mask = "masks/" + name.str() + ".pgm";
    save_ppm(p.image, dir / img);
    GrayImage g{d.side, d.side, 65535, std::vector<std::uint16_t>(static_cast<std::size_t>(d.side) * d.side, 0)};
    json classes = json::object();
    if (p.truth) {
      for (int y = p.truth->y0; y <= p.truth->y1; ++y)
        for (int x = p.truth->x0; x <= p.truth->x1; ++x) g.samples[static_cast<std::size_t>(y) * d.side + x] = 1;
      classes["1"] = "pattern";
    }
    write_file(dir / mask, encode_pgm(g));
    index.push_back({{"image", img}, {"scene", with ? "pattern" : "background"}, {"mask", mask}, {"classes", classes}});
  }
  std::ofstream(dir / "index.json") << index.dump(2) << '\n';
  json tags = json::array({{{"unit", to_string(d.unit)},
                            {"concept", "pattern"},
                            {"category", "objects"},
                            {"precision", 1.0},
                            {"threshold", d.planted_response / 2}}});
  std::ofstream(dir / "tags.json") << tags.dump(2) << '\n';
  env.write("synth.json", json{{"kind", "planted"}, {"images", a.count}, {"net", "planted-net.json"},
                               {"weights", "planted-weights.nnw"}, {"index", "index.json"}, {"tags", "tags.json"},
                               {"unit", to_string(d.unit)}, {"planted_response", d.planted_response}}
                                  .dump(2) +
                              "\n");
  env.text("synth.txt", "wrote planted detector, " + std::to_string(a.count) + " images and index.json to " +
                            dir.string() + "\n");
}

void cmd_synth(const Env& env, const SynthArgs& a) {
  if (a.count < 1) throw UsageError("--count must be positive");
  if (a.kind == "planted") return synth_planted(env, a);
  if (a.kind != "scenes") throw UsageError("--kind must be planted or scenes");
  const int per_scene = std::max(1, a.count / std::max(1, a.scenes));
  const auto d = synthetic_dataset(env.cfg.seed, {.scenes = a.scenes,
                                                  .classes = a.classes,
                                                  .images_per_scene = per_scene,
                                                  .side = a.side,
                                                  .max_objects = 4});
  save_dataset(d, env.out_dir());
  env.write("synth.json", json{{"kind", "scenes"}, {"images", d.size()}, {"index", "index.json"}}.dump(2) + "\n");
  env.text("synth.txt", "wrote " + std::to_string(d.size()) + " annotated images to " + env.out_dir().string() + "\n");
}

// ---------------------------------------------------------------- selftest

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Check> self_checks(int threads) {
  std::vector<Check> out;
  auto run_check = [&](const std::string& name, const std::function<std::string()>& body) {
    try {
      const std::string detail = body();
      out.push_back({name, detail.empty(), detail});
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };

  run_check("theoretical RF sizes 19/67/99/131/195", [] {
    const NetworkSpec spec = load_netspec(bundled_net());
    const std::vector<std::pair<std::string, int>> want = {
        {"pool1", 19}, {"pool2", 67}, {"conv3", 99}, {"conv4", 131}, {"pool5", 195}};
    std::string bad;
    for (const auto& [layer, size] : want) {
      const int got = theoretical_rf(spec, layer).size;
      if (got != size) bad += layer + "=" + std::to_string(got) + " ";
    }
    return bad;
  });
  run_check("occluder grid 227/11/3 has 5329 positions", [] {
    const auto n = occluder_grid(227, 11, 3).count();
    return n == 5329 ? std::string() : std::to_string(n);
  });
  run_check("softmax output is a distribution", [threads] {
    const NetworkSpec spec = load_netspec(bundled_net());
    const Model model(spec, random_weights(spec, 3));
    Rng rng(4);
    Tensor x({3, spec.input_side(), spec.input_side()});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(-100, 100));
    const auto trace = model.forward_one(x, {.stop_after = std::nullopt, .keep_all = false, .threads = threads});
    double sum = 0;
    for (std::size_t i = 0; i < trace.final_output().size(); ++i) sum += trace.final_output()[i];
    return std::abs(sum - 1.0) <= 1e-5 ? std::string() : "sum " + std::to_string(sum);
  });
  run_check("planted detector fires only on its pattern", [] {
    const PlantedDetector d = make_planted_detector();
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
      const PlantedImage p = planted_image(d, rng, i % 2 == 0);
      const Tensor x = preprocess(p.image, d.side, d.model.spec().mean());
      const float peak = find_peak(d.model, x, d.unit).value;
      if (p.truth && peak < 0.5f * d.planted_response) return "weak response " + std::to_string(peak);
      if (!p.truth && peak != 0.0f) return "background response " + std::to_string(peak);
    }
    return std::string();
  });
  run_check("occluders outside the RF leave the unit unchanged", [threads] {
    const PlantedDetector d = make_planted_detector();
    Rng rng(6);
    const PlantedImage p = planted_image(d, rng, true);
    const Tensor x = preprocess(p.image, d.side, d.model.spec().mean());
    const UnitPeak peak = find_peak(d.model, x, d.unit);
    const Box rf = project(d.model.spec(), d.unit.layer, peak.position.x, peak.position.y);
    const OccluderGrid grid = occluder_grid(d.side, 5, 1);
    std::vector<Occluder> outside;
    for (std::size_t i = 0; i < grid.count(); ++i) {
      const Occluder o = grid.at(i);
      if (o.x > rf.x1 || o.y > rf.y1 || o.x + o.size - 1 < rf.x0 || o.y + o.size - 1 < rf.y0) outside.push_back(o);
    }
    Rng fill(7);
    OcclusionOptions opts;
    opts.threads = threads;
    const auto disc = occlusion_discrepancies(d.model, x, d.unit, peak, outside, fill, opts);
    const auto bad = std::count_if(disc.begin(), disc.end(), [](float v) { return v != 0.0f; });
    return bad == 0 ? std::string() : std::to_string(bad) + " nonzero discrepancies";
  });
  run_check("Poisson fill of a constant boundary", [] {
    Image img(16, 16, Rgb{90, 140, 200});
    Mask m(16, 16);
    m.fill_rect(3, 4, 12, 11);
    for (int y = 4; y <= 11; ++y)
      for (int x = 3; x <= 12; ++x) img.at(x, y) = {0, 255, 7};
    const Image f = poisson_fill(img, m);
    for (const Rgb& p : f.pixels())
      if (std::abs(p.r - 90) > 1 || std::abs(p.g - 140) > 1 || std::abs(p.b - 200) > 1) return std::string("off");
    return std::string();
  });
  run_check("jaccard, pearson and AP identities", [] {
    Mask a(4, 4), b(4, 4);
    a.fill_rect(0, 0, 1, 3);
    b.fill_rect(1, 0, 2, 3);
    if (jaccard(a, a) != 1.0 || std::abs(jaccard(a, b) - 1.0 / 3) > 1e-12) return std::string("jaccard");
    Mask c(4, 4);
    c.fill_rect(3, 0, 3, 3);
    if (jaccard(a, c) != 0.0) return std::string("jaccard disjoint");
    const std::vector<double> x = {1, 2, 3, 5}, y = {-1, -2, -3, -5};
    if (std::abs(pearson(x, x) - 1) > 1e-12 || std::abs(pearson(x, y) + 1) > 1e-12) return std::string("pearson");
    const std::vector<float> s = {0.9f, 0.8f, 0.3f, 0.1f};
    if (pr_ap(s, {true, true, false, false}).ap != 1.0) return std::string("ap");
    return std::string();
  });
  run_check("PNG round trip", [] {
    Image img(300, 250);
    Rng rng(8);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) img.at(x, y) = {rng.byte(), rng.byte(), rng.byte()};
    return decode_png_rgb(encode_png(img)) == img ? std::string() : std::string("mismatch");
  });
  run_check("annotation precision and quality control", [] {
    std::vector<Candidate> c;
    for (int i = 0; i < 70; ++i) c.push_back({std::to_string(i), static_cast<float>(i), static_cast<float>(-i)});
    const UnitTask t = build_task({"pool5", 0}, c, 1);
    Submission s{t.id, "x", "objects", t.planted_indices(), ""};
    int added = 0;
    for (int i = 0; i < kTaskSize && added < 15; ++i)
      if (!t.entries[i].planted) {
        s.rejected.push_back(i);
        ++added;
      }
    const auto ok = check_submission(t, s, "");
    if (ok.status != SubmitStatus::Accepted || ok.record->precision != 0.75) return std::string("precision");
    s.rejected.erase(std::find(s.rejected.begin(), s.rejected.end(), t.planted_indices()[0]));
    if (check_submission(t, s, "").status != SubmitStatus::QualityControl) return std::string("quality control");
    return std::string();
  });
  return out;
}

bool cmd_selftest(const Env& env) {
  const auto checks = self_checks(env.threads());
  json rows = json::array();
  std::ostringstream t;
  bool all = true;
  for (const Check& c : checks) {
    all = all && c.pass;
    rows.push_back({{"check", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    t << (c.pass ? "PASS  " : "FAIL  ") << c.name;
    if (!c.pass) t << ": " << c.detail;
    t << '\n';
  }
  t << (all ? "all checks passed\n" : "some checks failed\n");
  env.write("selftest.json", json{{"pass", all}, {"checks", rows}}.dump(2) + "\n");
  env.text("selftest.txt", t.str());
  return all;
}

// Appends flags from the config file that the command line did not set.
std::vector<std::string> merge_config(std::vector<std::string> args, CLI::App& app) {
  std::string path;
  for (std::size_t i = 1; i + 1 < args.size(); ++i)
    if (args[i] == "--config") path = args[i + 1];
  for (const auto& a : args)
    if (a.rfind("--config=", 0) == 0) path = a.substr(9);
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError(path + ": expected an object");

  CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size() && !sub; ++i) {
    for (CLI::App* s : app.get_subcommands([](CLI::App*) { return true; }))
      if (s->get_name() == args[i]) sub = s;
  }
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  auto to_arg = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  auto add = [&](const std::string& key, const json& v) {
    const std::string flag = "--" + key;
    if (given(flag)) return;
    if (v.is_array()) {
      args.push_back(flag);
      for (const auto& e : v) args.push_back(to_arg(e));
    } else if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(to_arg(v));
    }
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "options") continue;
    if (!app.get_option_no_throw("--" + key)) throw UsageError("unknown config key '" + key + "'");
    add(key, v);
  }
  if (j.contains("options") && sub) {
    for (const auto& [key, v] : j.at("options").items()) {
      if (sub->get_option_no_throw("--" + key)) add(key, v);
    }
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  CLI::App app("scopelens: receptive fields, minimal images, unit segmentation and annotation for CNNs", "scopelens");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  RunConfig cfg;
  std::string config_path;
  app.add_option("--net", cfg.net, "Network JSON (default: bundled places-alexnet)");
  app.add_option("--weights", cfg.weights, "NNW1 weight file (default: seeded random weights)");
  app.add_option("--dataset", cfg.dataset, "Image directory or dataset index.json");
  app.add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads (0: SCOPELENS_THREADS or all cores)")
      ->envname("SCOPELENS_THREADS")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--config", config_path, "JSON file with the options above and an \"options\" object");

  std::string image;
  int top = 5;
  auto* forward = app.add_subcommand("forward", "Classify one image and print the top-k classes");
  forward->add_option("--image", image, "PPM or PNG image")->required();
  forward->add_option("--top", top, "Number of classes")->capture_default_str();

  app.add_subcommand("rf-theoretic", "Theoretical receptive field of every spatial layer");

  RFEstimateArgs rfa;
  auto* rfe = app.add_subcommand("rf-estimate", "Empirical receptive fields by occlusion");
  rfe->add_option("--units", rfa.units, "Units as layer:channel");
  rfe->add_option("--layer", rfa.layer, "Every channel of this layer");
  rfe->add_option("--top-k", rfa.top_k, "Top images per unit")->capture_default_str();
  rfe->add_option("--patch", rfa.patch, "Occluder side")->capture_default_str();
  rfe->add_option("--stride", rfa.stride, "Occluder stride")->capture_default_str();
  rfe->add_option("--fill", rfa.fill, "random or gray")->capture_default_str();
  rfe->add_option("--rank", rfa.rank, "max or sum")->capture_default_str();
  rfe->add_option("--theta", rfa.theta, "Half-peak fraction for the size")->capture_default_str();

  SimplifyArgs sa;
  auto* simp = app.add_subcommand("simplify", "Greedy minimal image representation");
  simp->add_option("--image", sa.image, "PPM or PNG image")->required();
  simp->add_option("--segments", sa.segments, "16-bit PGM segment labels");
  simp->add_option("--names", sa.names, "JSON {label: class name} for the segments");
  simp->add_option("--grid", sa.grid, "Use an N x N grid instead of a segment map");
  simp->add_option("--target", sa.target, "Class label or index (default: top-1 of the image)");
  simp->add_option("--tolerance", sa.tolerance, "Poisson relative residual")->capture_default_str();

  SegmentArgs sg;
  auto* segc = app.add_subcommand("segment", "Unit segmentation of one image in a single forward pass");
  segc->add_option("--image", sg.image, "PPM or PNG image")->required();
  segc->add_option("--units", sg.units, "Units as layer:channel");
  segc->add_option("--layer", sg.layer, "Every channel of this layer");
  segc->add_option("--thresholds", sg.thresholds, "One per unit, or one for all (default: calibrate on --dataset)");
  segc->add_option("--quantile", sg.quantile, "Calibration quantile")->capture_default_str();

  std::string tags;
  double quantile = 0.995;
  auto* rep = app.add_subcommand("report", "Scene prediction plus tagged object detections");
  rep->add_option("--image", image, "PPM or PNG image")->required();
  rep->add_option("--tags", tags, "Unit tags JSON")->required();
  rep->add_option("--top", top, "Number of scene classes")->capture_default_str();
  rep->add_option("--quantile", quantile, "Calibration quantile for tags without a threshold")->capture_default_str();

  AnalyzeArgs aa;
  auto* an = app.add_subcommand("analyze", "Object frequency, informativeness and unit counts");
  an->add_option("--records", aa.records, "Annotation store (NDJSON)");
  an->add_option("--mapping", aa.mapping, "JSON {tag: object class} (default: tags equal to a class name)");
  an->add_option("--min-precision", aa.min_precision, "Unit precision filter")->capture_default_str();
  an->add_option("--categories", aa.categories, "Concept categories counted (default: objects)");
  an->add_option("--scenes", aa.scenes, "Scene categories (default: all present)");

  EvalSegArgs ea;
  auto* ev = app.add_subcommand("eval-seg", "Jaccard and AP of unit segmentation against ground truth");
  ev->add_option("--tags", ea.tags, "Unit tags JSON")->required();
  ev->add_option("--mapping", ea.mapping, "JSON {tag: object class}");
  ev->add_option("--quantile", ea.quantile, "Calibration quantile for tags without a threshold")->capture_default_str();

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--units", sv.units, "Units as layer:channel");
  serve->add_option("--layer", sv.layer, "Every channel of this layer");
  serve->add_option("--store", sv.store, "Annotation store (default: <out>/annotations.ndjson)");
  serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve->add_option("--port", sv.port, "Port")->capture_default_str();
  serve->add_option("--quantile", sv.quantile, "Segmentation threshold quantile")->capture_default_str();

  app.add_subcommand("selftest", "Run the built-in invariant checks");

  std::string weights_out;
  auto* init = app.add_subcommand("init-weights", "Write seeded random weights for --net");
  init->add_option("--output", weights_out, "Weight file (default: <out>/weights.nnw)");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate synthetic data: planted-pattern images or annotated scenes");
  synth->add_option("--kind", sy.kind, "planted or scenes")->capture_default_str();
  synth->add_option("--count", sy.count, "Number of images")->capture_default_str();
  synth->add_option("--scenes", sy.scenes, "Scene categories (scenes)")->capture_default_str();
  synth->add_option("--classes", sy.classes, "Object classes (scenes)")->capture_default_str();
  synth->add_option("--side", sy.side, "Image side (scenes)")->capture_default_str();

  std::vector<std::string> args;
  try {
    args = merge_config(raw, app);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Env env{cfg, out, err};
  try {
    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "forward") cmd_forward(env, image, top);
    else if (name == "rf-theoretic") cmd_rf_theoretic(env);
    else if (name == "rf-estimate") cmd_rf_estimate(env, rfa);
    else if (name == "simplify") cmd_simplify(env, sa);
    else if (name == "segment") cmd_segment(env, sg);
    else if (name == "report") cmd_report(env, image, tags, top, quantile);
    else if (name == "analyze") cmd_analyze(env, aa);
    else if (name == "eval-seg") cmd_eval_seg(env, ea);
    else if (name == "serve") cmd_serve(env, sv);
    else if (name == "selftest") return cmd_selftest(env) ? 0 : 1;
    else if (name == "init-weights") cmd_init_weights(env, weights_out);
    else if (name == "synth") cmd_synth(env, sy);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace scopelens::cli
