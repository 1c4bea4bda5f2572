#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "oracles.hpp"
#include "scopelens/emergence.hpp"
#include "scopelens/error.hpp"
#include "scopelens/rng.hpp"

using namespace scopelens;

namespace {

// Image of side 4 whose classes each own a block of pixels.
AnnotatedImage toy(std::string scene, const std::vector<std::pair<std::string, int>>& objects, int side = 4) {
  AnnotatedImage img;
  img.id = scene + "_" + std::to_string(objects.size());
  img.scene = std::move(scene);
  img.width = img.height = side;
  img.labels.assign(static_cast<std::size_t>(side) * side, 0);
  std::size_t next = 0;
  for (std::size_t k = 0; k < objects.size(); ++k) {
    for (int p = 0; p < objects[k].second; ++p) img.labels.at(next++) = static_cast<std::uint16_t>(k + 1);
    img.objects.push_back({static_cast<int>(k + 1), objects[k].first});
  }
  return img;
}

AnnotationRecord rec(std::string layer, int channel, std::string tag, Category cat, int rejected) {
  AnnotationRecord r;
  r.unit = {std::move(layer), channel};
  r.task_id = to_string(r.unit) + ":0";
  r.concept_label = std::move(tag);
  r.category = cat;
  for (int i = 0; i < rejected; ++i) r.rejected_positives.push_back(i);
  r.precision = unit_precision(r);
  return r;
}

const std::vector<std::string> kNames = {"bed", "lamp", "sky", "tree", "wall"};

std::vector<AnnotatedImage> random_toys(Rng& rng, int n, int scenes) {
  std::vector<AnnotatedImage> out;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<std::string, int>> objs;
    const int k = static_cast<int>(rng.below(4));
    for (int j = 0; j < k; ++j) objs.emplace_back(kNames[rng.below(kNames.size())], static_cast<int>(rng.below(5)));
    out.push_back(toy("s" + std::to_string(rng.below(static_cast<std::uint64_t>(scenes))), objs));
    out.back().id = "img" + std::to_string(i);
  }
  return out;
}

}  // namespace

TEST_CASE("object_frequency example and tie rule") {
  const std::vector<AnnotatedImage> d = {toy("a", {{"wall", 2}}), toy("a", {{"wall", 1}}), toy("b", {{"bed", 3}})};
  CHECK(object_frequency(d) == Tally{{"wall", 2}, {"bed", 1}});
  const std::vector<AnnotatedImage> tied = {toy("a", {{"zebra", 1}, {"apple", 1}, {"mango", 1}})};
  CHECK(object_frequency(tied) == Tally{{"apple", 1}, {"mango", 1}, {"zebra", 1}});
  CHECK(object_frequency({}).empty());
}

TEST_CASE("object_frequency matches a one-pass tally on random toy images") {
  Rng rng(5);
  const auto d = random_toys(rng, 100, 3);
  std::vector<std::string> all;
  for (const auto& img : d)
    for (const auto& o : img.objects) all.push_back(o.object_class);
  std::sort(all.begin(), all.end());
  Tally want;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    want.emplace_back(all[i], j - i);
    i = j;
  }
  std::sort(want.begin(), want.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  const Tally got = object_frequency(d);
  CHECK(got == want);
  std::size_t sum = 0;
  for (const auto& [c, n] : got) sum += n;
  CHECK(sum == all.size());
}

TEST_CASE("coverage counts every instance of the class") {
  AnnotatedImage img = toy("a", {{"wall", 3}, {"bed", 2}, {"wall", 5}});
  CHECK(img.coverage("wall") == doctest::Approx(8.0 / 16));
  CHECK(img.coverage("bed") == doctest::Approx(2.0 / 16));
  CHECK(img.coverage("sky") == 0.0);
}

TEST_CASE("unit_object_counts") {
  std::vector<AnnotationRecord> records;
  for (int c = 0; c < 15; ++c) records.push_back(rec("pool5", c, "building", Category::Objects, 0));
  const TagMapping mapping({{"building", "building"}, {"Bed ", "bed"}, {"wall", "wall"}});
  CHECK(unit_object_counts(records, mapping).counts == Tally{{"building", 15}});

  std::vector<AnnotationRecord> edge = {rec("pool5", 1, "bed", Category::Objects, 15),    // 0.75 kept
                                        rec("pool5", 2, "bed", Category::Objects, 16),    // 0.733 dropped
                                        rec("pool5", 3, "  BED", Category::Objects, 0),   // normalized
                                        rec("pool5", 4, "wall", Category::RegionsSurfaces, 0),
                                        rec("pool5", 5, "spaceship", Category::Objects, 0)};
  AnnotationRecord low = rec("pool5", 6, "bed", Category::Objects, 0);
  low.precision = 0.74;
  edge.push_back(low);
  const UnitObjectCounts u = unit_object_counts(edge, mapping);
  CHECK(u.counts == Tally{{"bed", 2}});
  REQUIRE(u.unmapped.size() == 1);
  CHECK(u.unmapped[0].first == Unit{"pool5", 5});
  CHECK(u.unmapped[0].second == "spaceship");

  const std::array<Category, 2> both = {Category::Objects, Category::RegionsSurfaces};
  CHECK(unit_object_counts(edge, mapping, 0.75, both).counts == Tally{{"bed", 2}, {"wall", 1}});

  // A later record of the same unit replaces the earlier one.
  std::vector<AnnotationRecord> twice = {rec("pool5", 1, "bed", Category::Objects, 0),
                                         rec("pool5", 1, "wall", Category::Objects, 0)};
  CHECK(unit_object_counts(twice, mapping).counts == Tally{{"wall", 1}});
}

TEST_CASE("informative_objects: exclusive class gets AP 1") {
  const std::vector<AnnotatedImage> d = {
      toy("s1", {{"A", 4}, {"B", 2}}), toy("s1", {{"A", 2}, {"B", 5}}), toy("s1", {{"A", 1}}),
      toy("s2", {{"B", 6}}),           toy("s2", {{"B", 3}}),
  };
  const InformativeObjects r = informative_objects(d);
  CHECK(r.best.at("s1") == "A");
  for (const auto& e : r.table) {
    if (e.scene == "s1" && e.object_class == "A") CHECK(e.ap == 1.0);
  }
  CHECK(r.table.size() == 4);
}

TEST_CASE("informative_objects: a class everywhere equally has AP = prevalence") {
  std::vector<AnnotatedImage> d;
  for (int i = 0; i < 3; ++i) d.push_back(toy("s1", {{"wall", 4}}));
  for (int i = 0; i < 7; ++i) d.push_back(toy("s2", {{"wall", 4}}));
  const InformativeObjects r = informative_objects(d);
  REQUIRE(r.table.size() == 2);
  CHECK(r.table[0].ap == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(r.table[1].ap == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("informative_objects: ties go to the alphabetically first class") {
  const std::vector<AnnotatedImage> d = {toy("s1", {{"zeta", 3}, {"alpha", 3}}), toy("s2", {})};
  const InformativeObjects r = informative_objects(d);
  CHECK(r.best.at("s1") == "alpha");
  CHECK(r.counts.front().first == "alpha");
}

TEST_CASE("informative_objects matches the exhaustive AP oracle and ignores image order") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto d = random_toys(rng, 2 + static_cast<int>(rng.below(9)), 3);
    std::set<std::string> scenes;
    for (const auto& img : d) scenes.insert(img.scene);
    if (scenes.size() < 2) continue;
    const InformativeObjects r = informative_objects(d);
    for (const auto& e : r.table) {
      std::vector<float> cov;
      std::vector<bool> pos;
      for (const auto& img : d) {
        int hit = 0;
        for (std::size_t p = 0; p < img.labels.size(); ++p)
          for (const auto& o : img.objects)
            if (o.label == img.labels[p] && o.object_class == e.object_class) {
              ++hit;
              break;
            }
        cov.push_back(static_cast<float>(static_cast<double>(hit) / img.labels.size()));
        pos.push_back(img.scene == e.scene);
      }
      REQUIRE(e.ap == doctest::Approx(oracle::cut_ap(cov, pos)).epsilon(1e-12));
    }
    std::reverse(d.begin(), d.end());
    const InformativeObjects back = informative_objects(d);
    CHECK(back.best == r.best);
    CHECK(back.counts == r.counts);
    for (std::size_t i = 0; i < r.table.size(); ++i) CHECK(back.table[i].ap == r.table[i].ap);
  }
}

TEST_CASE("informative_objects errors") {
  const std::vector<AnnotatedImage> one = {toy("s1", {{"A", 1}}), toy("s1", {{"B", 1}})};
  CHECK_THROWS_AS(informative_objects(one), PreconditionError);
  const std::vector<AnnotatedImage> two = {toy("s1", {{"A", 1}}), toy("s2", {{"B", 1}})};
  const std::vector<std::string> scenes = {"s1", "s2", "s3"};
  CHECK_THROWS_AS(informative_objects(two, scenes), PreconditionError);
}

TEST_CASE("pearson") {
  const std::vector<double> x = {1, 2, 3, 4.5, -2};
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> a = {1, 2, 3}, b = {2, 4, 7};
  CHECK(std::abs(pearson(a, b) - 15.0 / std::sqrt(228.0)) < 1e-9);

  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> u, v, w;
    const double scale = rng.uniform(0.01, 100), shift = rng.uniform(-50, 50);
    for (int i = 0; i < 12; ++i) {
      u.push_back(rng.normal());
      v.push_back(rng.normal());
      w.push_back(scale * u.back() + shift);
    }
    const double r = pearson(u, v);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(std::abs(pearson(v, u) - r) < 1e-12);
    CHECK(std::abs(pearson(w, v) - r) < 1e-9);
  }

  const std::vector<double> flat = {2, 2, 2};
  CHECK_THROWS_AS(pearson(flat, a), PreconditionError);
  CHECK_THROWS_AS(pearson(a, x), PreconditionError);
  const std::vector<double> single = {1};
  CHECK_THROWS_AS(pearson(single, single), PreconditionError);
}

TEST_CASE("dataset save/load round trip and validation") {
  const auto d = synthetic_dataset(4, {.scenes = 3, .classes = 4, .images_per_scene = 3, .side = 16});
  const auto dir = std::filesystem::temp_directory_path() / "scopelens_emergence_rt";
  std::filesystem::remove_all(dir);
  save_dataset(d, dir);
  const auto back = load_dataset(dir / "index.json");
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back[i].id == d[i].id);
    CHECK(back[i].scene == d[i].scene);
    CHECK(back[i].labels == d[i].labels);
    REQUIRE(back[i].objects.size() == d[i].objects.size());
    for (std::size_t k = 0; k < d[i].objects.size(); ++k) {
      CHECK(back[i].objects[k].label == d[i].objects[k].label);
      CHECK(back[i].objects[k].object_class == d[i].objects[k].object_class);
    }
  }
  CHECK(object_frequency(back) == object_frequency(d));

  AnnotatedImage bad = d[0];
  bad.scene.clear();
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = d[0];
  bad.labels.pop_back();
  CHECK_THROWS_AS(validate(bad), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("correlation pipeline on the synthetic dataset stays in [-1, 1]") {
  const auto d = synthetic_dataset(9, {.scenes = 4, .classes = 6, .images_per_scene = 12});
  const Tally freq = object_frequency(d);
  const InformativeObjects info = informative_objects(d);
  std::vector<AnnotationRecord> records;
  int ch = 0;
  for (const auto& [c, n] : freq) {
    for (std::size_t k = 0; k < (n + 3) / 4; ++k) records.push_back(rec("pool5", ch++, c, Category::Objects, 0));
  }
  std::map<std::string, std::string> identity;
  for (const auto& [c, n] : freq) identity[c] = c;
  const UnitObjectCounts units = unit_object_counts(records, TagMapping(identity));
  const EmergenceCorrelations corr = emergence_correlations(freq, info.counts, units.counts);
  REQUIRE(corr.frequency_vs_discovered);
  CHECK(*corr.frequency_vs_discovered >= -1.0);
  CHECK(*corr.frequency_vs_discovered <= 1.0);
  CHECK(*corr.frequency_vs_discovered > 0.8);
  if (corr.informative_vs_discovered) {
    CHECK(std::abs(*corr.informative_vs_discovered) <= 1.0);
  }
  const auto j = analysis_to_json(freq, units, info, corr);
  CHECK(j.at("metadata").at("informative_metric").get<std::string>().find("coverage") != std::string::npos);
  CHECK(j.at("object_frequency").size() == freq.size());
}

TEST_CASE("CSV output quotes awkward names") {
  const Tally t = {{"wall", 3}, {"chair, folding", 1}, {"say \"hi\"", 1}};
  CHECK(tally_csv(t, "count") == "class,count\nwall,3\n\"chair, folding\",1\n\"say \"\"hi\"\"\",1\n");
}

TEST_CASE("synthetic dataset is seed-deterministic") {
  const auto a = synthetic_dataset(1), b = synthetic_dataset(1), c = synthetic_dataset(2);
  REQUIRE(a.size() == 30);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].labels == b[i].labels);
    differs = differs || a[i].labels != c[i].labels;
  }
  CHECK(differs);
}
