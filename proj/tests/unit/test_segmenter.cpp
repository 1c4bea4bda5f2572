#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <json.hpp>

#include "oracles.hpp"
#include "scopelens/error.hpp"
#include "scopelens/planted.hpp"
#include "scopelens/receptive_field.hpp"
#include "scopelens/segmenter.hpp"

using namespace scopelens;

namespace {

NetworkSpec bundled() { return load_netspec(std::filesystem::path(SCOPELENS_DATA_DIR) / "places-alexnet.json"); }

Mask box_mask(int side, const Box& b) {
  Mask m(side, side);
  m.fill_rect(b.x0, b.y0, b.x1, b.y1);
  return m;
}

}  // namespace

TEST_CASE("project gives the theoretical RF clamped to the input") {
  const NetworkSpec spec = bundled();
  CHECK(project(spec, "pool1", 0, 0) == Box{0, 0, 18, 18});
  CHECK(project(spec, "conv1", 0, 0) == Box{0, 0, 10, 10});
  CHECK(project(spec, "conv1", 54, 54) == Box{216, 216, 226, 226});
  const Box far = project(spec, "conv5", 12, 12);
  CHECK(far.x1 == 226);
  CHECK(far.y1 == 226);
  CHECK(far.x0 == 12 * 16 - 16 - 32 - 16);
  const Box p5 = project(spec, "pool5", 5, 5);
  CHECK(p5.x1 == 226);
  CHECK(p5.x0 == 160 - 16 - 32 - 16);
  CHECK(project(spec, "pool5", 0, 0).x0 == 0);
  CHECK_THROWS_AS(project(spec, "pool5", 12, 12), PreconditionError);
  CHECK_THROWS_AS(project(spec, "fc6", 0, 0), UnsupportedLayerError);
}

TEST_CASE("segment: empty below threshold, union of boxes at threshold zero") {
  Rng rng(61);
  for (int trial = 0; trial < 15; ++trial) {
    const NetworkSpec spec = oracle::random_spec(rng, {.allow_fc = false});
    const Model model(spec, oracle::random_weights(spec, rng));
    const int c = spec.input_shape().channels, side = spec.input_side();
    const Tensor img = oracle::random_input(spec, 1, rng).reshaped({c, side, side});
    const std::size_t last = spec.size() - 1;
    const Unit unit{spec.layer(last).name, 0};
    const ActivationTrace t = model.forward_one(img);
    const auto map = t.unit_map(spec, unit, 0);
    const FeatureShape fs = spec.output_shape(spec.feature_index(last));

    const float above = *std::max_element(map.begin(), map.end()) + 1.0f;
    const Unit units[] = {unit};
    const float high[] = {above};
    const Segmentation none = segment(model, img, units, high);
    CHECK(none.detections.empty());
    CHECK(none.units[0].mask.none());

    const float zero[] = {0.0f};
    const Segmentation all = segment(model, img, units, zero);
    Mask want(side, side);
    float best = 0;
    for (int y = 0; y < fs.height; ++y)
      for (int x = 0; x < fs.width; ++x) {
        const float a = map[y * fs.width + x];
        if (a <= 0) continue;
        best = std::max(best, a);
        const Interval ix = theoretical_rf(spec, last).interval(x), iy = theoretical_rf(spec, last).interval(y);
        for (int py = std::max(iy.lo, 0); py <= std::min(iy.hi, side - 1); ++py)
          for (int px = std::max(ix.lo, 0); px <= std::min(ix.hi, side - 1); ++px) want.set(px, py);
      }
    CHECK(all.units[0].mask == want);
    if (best > 0) {
      REQUIRE_FALSE(all.detections.empty());
      CHECK(all.detections.front().score == best);
      for (std::size_t i = 1; i < all.detections.size(); ++i)
        CHECK(all.detections[i - 1].score >= all.detections[i].score);
    }

    // Higher threshold gives a subset mask.
    const float mid[] = {best / 2};
    const Mask m = segment(model, img, units, mid).units[0].mask;
    for (std::size_t i = 0; i < m.bits().size(); ++i)
      if (m.bits()[i]) REQUIRE(all.units[0].mask.bits()[i]);
  }
}

TEST_CASE("planted detector: one detection whose box contains the pattern") {
  const PlantedDetector d = make_planted_detector(1);
  Rng rng(5);
  const Unit units[] = {d.unit};
  const float th[] = {0.5f * d.planted_response};
  for (int i = 0; i < 10; ++i) {
    const PlantedImage p = planted_image(d, rng, true);
    const Segmentation s = segment(d.model, preprocess(p.image, d.side, d.model.spec().mean()), units, th);
    REQUIRE(s.detections.size() == 1);
    CHECK(s.detections[0].box.contains(*p.truth));
    CHECK(jaccard(s.units[0].mask, box_mask(d.side, *p.truth)) >= 0.5);
  }
  const PlantedImage bg = planted_image(d, rng, false);
  CHECK(segment(d.model, preprocess(bg.image, d.side, d.model.spec().mean()), units, th).detections.empty());
}

TEST_CASE("8-connected clusters merge into one detection") {
  const NetworkSpec spec("id", {1, 6, 6}, {LayerSpec{.name = "c", .kind = LayerKind::Conv, .channels_out = 1}});
  WeightStore w;
  w.emplace("c.w", Tensor({1, 1, 1, 1}, 1.0f));
  w.emplace("c.b", Tensor({1}));
  const Model model(spec, w);
  Tensor img({1, 6, 6});
  img[1 * 6 + 1] = 2;  // diagonal neighbors form one cluster
  img[2 * 6 + 2] = 3;
  img[5 * 6 + 5] = 1;  // separate cluster
  const Unit units[] = {{"c", 0}};
  const float th[] = {0.5f};
  const Segmentation s = segment(model, img, units, th);
  REQUIRE(s.detections.size() == 2);
  CHECK(s.detections[0].box == Box{1, 1, 2, 2});
  CHECK(s.detections[0].score == 3.0f);
  CHECK(s.detections[1].box == Box{5, 5, 5, 5});
  CHECK(s.units[0].mask.count() == 3);
}

TEST_CASE("quantile and threshold calibration") {
  CHECK(quantile({5, 5, 5}, 0.3) == 5.0);
  CHECK(quantile({3, 1, 2}, 0.0) == 1.0);
  CHECK(quantile({3, 1, 2}, 1.0) == 3.0);
  Rng rng(2);
  std::vector<float> v;
  for (int i = 0; i < 101; ++i) v.push_back(static_cast<float>(rng.uniform(-3, 3)));
  std::vector<float> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(quantile(v, 0.5) == sorted[50]);
  v.push_back(100.0f);
  sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(quantile(v, 0.5) == doctest::Approx((sorted[50] + static_cast<double>(sorted[51])) / 2));
  CHECK_THROWS_AS(quantile({}, 0.5), PreconditionError);

  const NetworkSpec spec("id", {1, 3, 3}, {LayerSpec{.name = "c", .kind = LayerKind::Conv, .channels_out = 1}});
  WeightStore w;
  w.emplace("c.w", Tensor({1, 1, 1, 1}, 0.0f));
  w.emplace("c.b", Tensor({1}, 2.5f));
  const Model model(spec, w);
  const std::vector<Tensor> cal{Tensor({1, 3, 3}), Tensor({1, 3, 3}, 1.0f)};
  const Unit units[] = {{"c", 0}};
  CHECK(calibrate_thresholds(model, units, cal, 0.9).at(0) == 2.5f);
  CHECK(calibrate_thresholds(model, units, cal, 0.0).at(0) == 2.5f);
  CHECK_THROWS_AS(calibrate_thresholds(model, units, std::span<const Tensor>{}), PreconditionError);
}

TEST_CASE("jaccard identities") {
  Mask a(10, 10), b(10, 10), c(10, 10);
  a.fill_rect(0, 0, 4, 4);
  b.fill_rect(5, 5, 9, 9);
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard(a, b) == 0.0);
  CHECK(jaccard(Mask(3, 3), Mask(3, 3)) == 1.0);
  Mask big(9, 1), small(9, 1);
  big.fill_rect(0, 0, 8, 0);
  small.fill_rect(3, 0, 5, 0);
  CHECK(jaccard(small, big) == doctest::Approx(1.0 / 3));
  c.fill_rect(2, 2, 7, 7);
  CHECK(jaccard(a, c) == jaccard(c, a));
  CHECK_THROWS_AS(jaccard(a, Mask(9, 10)), ShapeError);
}

TEST_CASE("pr_ap") {
  CHECK(pr_ap(std::vector<float>{0.9f, 0.8f, 0.1f}, {true, true, false}).ap == 1.0);
  const std::vector<float> flat(10, 0.5f);
  std::vector<bool> three(10, false);
  three[1] = three[4] = three[8] = true;
  const PRCurve c = pr_ap(flat, three);
  CHECK(c.ap == doctest::Approx(0.3));
  CHECK(c.points.size() == 1);

  const std::vector<float> rev{4, 3, 2, 1};
  const std::vector<bool> tail{false, false, true, true};
  CHECK(pr_ap(rev, tail).ap == doctest::Approx(oracle::cut_ap(rev, tail)));
  CHECK(pr_ap(rev, tail).ap == doctest::Approx((1.0 / 3) * 0.5 + 0.5 * 0.5));
  CHECK_THROWS_AS(pr_ap(rev, {false, false, false, false}), PreconditionError);
  CHECK_THROWS_AS(pr_ap(rev, {true}), PreconditionError);
}

TEST_CASE("AP equals brute force on every ranking of small lists") {
  int top_heavy = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int mask = 1; mask < (1 << n); ++mask) {
      std::vector<bool> pos(n);
      for (int i = 0; i < n; ++i) pos[i] = (mask >> i) & 1;
      std::vector<float> s(n);
      std::iota(s.begin(), s.end(), 0.0f);
      std::reverse(s.begin(), s.end());
      const double fwd = pr_ap(s, pos).ap;
      REQUIRE(fwd == doctest::Approx(oracle::cut_ap(s, pos)).epsilon(1e-12));
      std::vector<float> tied(s);
      for (float& v : tied) v = std::floor(v / 2);
      REQUIRE(pr_ap(tied, pos).ap == doctest::Approx(oracle::cut_ap(tied, pos)).epsilon(1e-12));

      // Top-heavy: every prefix holds at least as many positives as the
      // suffix of the same length.
      bool heavy = true;
      for (int k = 1; k <= n; ++k) {
        int head = 0, tail = 0;
        for (int i = 0; i < k; ++i) head += pos[i], tail += pos[n - 1 - i];
        heavy &= head >= tail;
      }
      if (!heavy) continue;
      ++top_heavy;
      const std::vector<bool> rpos(pos.rbegin(), pos.rend());
      REQUIRE(fwd >= pr_ap(s, rpos).ap - 1e-12);
    }
  }
  CHECK(top_heavy > 100);
}

TEST_CASE("report: single forward, descending scenes, tagged detections") {
  const PlantedDetector d = make_planted_detector(1);
  Rng rng(9);
  const PlantedImage p = planted_image(d, rng, true);
  const Tensor x = preprocess(p.image, d.side, d.model.spec().mean());
  const Unit units[] = {d.unit};
  const std::map<Unit, UnitTag> tags{{d.unit, {d.unit, "checkerboard", Category::Objects, 0.9}}};
  const std::map<Unit, float> th{{d.unit, 0.5f * d.planted_response}};
  d.model.reset_counter();
  const SceneReport rep = report(d.model, x, units, tags, th);
  CHECK(d.model.images_forwarded() == 1);
  REQUIRE(rep.scenes.size() == 2);
  CHECK(rep.scenes[0].label == "pattern");
  CHECK(rep.scenes[0].prob >= rep.scenes[1].prob);
  CHECK(rep.scenes[0].prob + rep.scenes[1].prob <= 1.0f + 1e-5f);
  REQUIRE(rep.detections.size() == 1);
  CHECK(rep.detections[0].box.contains(*p.truth));
  CHECK(rep.detections[0].tag->concept_label == "checkerboard");

  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j["scenes"][0]["label"] == "pattern");
  CHECK(j["detections"][0]["category"] == "objects");
  CHECK(j["detections"][0]["box"].size() == 4);

  const SceneReport bare = report(d.model, x, {}, {}, {});
  CHECK(bare.detections.empty());
  CHECK(bare.scenes.size() == 2);
  CHECK_THROWS_AS(report(d.model, x, units, {}, th), PreconditionError);
}

TEST_CASE("bundled spec report returns five descending scenes") {
  const NetworkSpec spec = bundled();
  const Model model(spec, random_weights(spec, 3));
  Rng rng(4);
  const Tensor x = oracle::random_input(spec, 1, rng, -50, 50).reshaped({3, 227, 227});
  const SceneReport rep = report(model, x, {}, {}, {});
  REQUIRE(rep.scenes.size() == 5);
  double sum = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    sum += rep.scenes[i].prob;
    CHECK(rep.scenes[i].prob > 0.0f);
    if (i) CHECK(rep.scenes[i - 1].prob >= rep.scenes[i].prob);
  }
  CHECK(sum <= 1.0 + 1e-5);
}

TEST_CASE("evaluate_segmentation") {
  Mask t(4, 4), p(4, 4);
  t.fill_rect(0, 0, 1, 1);
  p.fill_rect(0, 0, 1, 3);
  const std::vector<SegmentationSample> s{{p, t, 0.9f, true}, {t, t, 0.8f, true}, {Mask(4, 4), Mask(4, 4), 0.0f, false}};
  const SegmentationScore r = evaluate_segmentation(s);
  CHECK(r.mean_jaccard == doctest::Approx(0.75));
  CHECK(r.ap == 1.0);
  CHECK(r.positives == 2);
}
