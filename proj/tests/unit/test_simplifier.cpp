#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "scopelens/error.hpp"
#include "scopelens/poisson.hpp"
#include "scopelens/simplifier.hpp"

using namespace scopelens;

namespace {

Mask blob_mask(int w, int h) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - w / 2.0, dy = y - h / 2.0;
      if (dx * dx / 36 + dy * dy / 16 <= 1 || (x >= 3 && x <= 5 && y >= 2 && y <= h - 3)) m.set(x, y);
    }
  return m;
}

float replay_score(const Model& model, const Image& img, int target) {
  const ActivationTrace t = model.forward_one(preprocess(img, model.spec().input_side(), model.spec().mean()));
  return t.final_output()[target];
}

}  // namespace

TEST_CASE("constant boundary fills to the constant") {
  Rng rng(3);
  for (int c : {0, 77, 255}) {
    Image img(20, 18, Rgb{static_cast<std::uint8_t>(c), static_cast<std::uint8_t>(c), static_cast<std::uint8_t>(c)});
    const Mask m = blob_mask(20, 18);
    for (int y = 0; y < 18; ++y)
      for (int x = 0; x < 20; ++x)
        if (m.at(x, y)) img.at(x, y) = {rng.byte(), rng.byte(), rng.byte()};
    const Image out = poisson_fill(img, m);
    for (int y = 0; y < 18; ++y)
      for (int x = 0; x < 20; ++x)
        for (int ch = 0; ch < 3; ++ch) REQUIRE(std::abs(out.channel(x, y, ch) - c) <= 1);
  }
}

TEST_CASE("ramp boundary matches the dense linear solve") {
  const int w = 20, h = 18;
  const Mask m = blob_mask(w, h);
  std::vector<double> field(w * h);
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      field[y * w + x] = m.at(x, y) ? 0.0 : 3.0 * x + 2.0 * y + 10;
      img.at(x, y) = {static_cast<std::uint8_t>(3 * x + 2 * y + 10), static_cast<std::uint8_t>(5 * y + 7),
                      static_cast<std::uint8_t>(200 - 4 * x)};
      if (m.at(x, y)) img.at(x, y) = {0, 0, 0};
    }
  const auto want = oracle::dense_laplace(field, w, h, m);
  const LaplaceSolution sol = solve_laplace(field, w, h, m);
  CHECK(sol.residual <= 1e-3);
  double worst = 0;
  for (int i = 0; i < w * h; ++i) worst = std::max(worst, std::abs(sol.values[i] - want[i]));
  CHECK(worst <= 1e-3);

  const Image out = poisson_fill(img, m);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      REQUIRE(out.channel(x, y, 0) == 3 * x + 2 * y + 10);
      REQUIRE(out.channel(x, y, 1) == 5 * y + 7);
      REQUIRE(out.channel(x, y, 2) == 200 - 4 * x);
    }
}

TEST_CASE("poisson_fill leaves unmasked pixels alone and checks its preconditions") {
  Rng rng(9);
  Image img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(x, y) = {rng.byte(), rng.byte(), rng.byte()};
  CHECK(poisson_fill(img, Mask(16, 16)) == img);

  Mask m(16, 16);
  m.fill_rect(4, 5, 10, 9);
  const Image out = poisson_fill(img, m);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (!m.at(x, y)) REQUIRE(out.at(x, y) == img.at(x, y));

  Mask edge(16, 16);
  edge.fill_rect(0, 3, 2, 4);
  CHECK_THROWS_AS(poisson_fill(img, edge), PreconditionError);
  CHECK_THROWS_AS(poisson_fill(img, Mask(15, 16)), ShapeError);
  CHECK_THROWS_AS(poisson_remove(img, Mask(16, 16, true)), PreconditionError);
}

TEST_CASE("poisson_remove handles segments on the border") {
  Image img(12, 12, Rgb{40, 90, 140});
  Mask m(12, 12);
  m.fill_rect(0, 0, 5, 5);
  for (int y = 0; y <= 5; ++y)
    for (int x = 0; x <= 5; ++x) img.at(x, y) = {255, 0, 0};
  const Image out = poisson_remove(img, m);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) REQUIRE(out.at(x, y) == (Rgb{40, 90, 140}));
}

TEST_CASE("segment maps") {
  const SegmentMap g = grid_segments(10, 7, 3);
  CHECK(g.label_count() == 9);
  CHECK(g.at(0, 0) == 0);
  CHECK(g.at(9, 6) == 8);
  CHECK(g.at(4, 0) == 1);
  CHECK(g.mask(4).count() + g.mask(0).count() > 0);
  std::size_t total = 0;
  for (int l = 0; l < 9; ++l) total += g.mask(l).count();
  CHECK(total == 70);
  CHECK_THROWS_AS(SegmentMap(2, 1, {0, 2}), ValidationError);
  CHECK_THROWS_AS(SegmentMap(2, 1, {0}), ValidationError);

  const SegmentMap named(2, 2, {0, 1, 1, 2}, {{0, "bed"}, {2, "wall"}});
  const auto dir = std::filesystem::temp_directory_path();
  save_segment_map(named, dir / "scopelens_seg.pgm", dir / "scopelens_seg.json");
  const SegmentMap back = load_segment_map(dir / "scopelens_seg.pgm", dir / "scopelens_seg.json");
  CHECK(back.labels() == named.labels());
  CHECK(back.name(0) == "bed");
  CHECK(back.name(1).empty());
  CHECK(back.name(2) == "wall");
  std::filesystem::remove(dir / "scopelens_seg.pgm");
  std::filesystem::remove(dir / "scopelens_seg.json");
}

TEST_CASE("two segments: the irrelevant one is removed, the driver retained") {
  const int side = 16;
  const Model model = fixture::color_classifier(side);
  Image img(side, side, Rgb{100, 100, 100});
  std::vector<std::uint16_t> labels(side * side, 0);
  for (int y = 0; y < side; ++y)
    for (int x = side / 2; x < side; ++x) {
      labels[y * side + x] = 1;
      img.at(x, y) = {180, 100, 100};
    }
  const SegmentMap segs(side, side, labels, {{0, "floor"}, {1, "bed"}});
  const SimplificationTrace t = greedy_simplify(model, img, segs, 0);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.steps[0].label == 0);
  CHECK(t.retained == std::vector<int>{1});
  CHECK(t.removed == std::vector<int>{0});
  CHECK_FALSE(t.stopped_by.has_value());
  CHECK(t.final_score >= t.initial_score);
  CHECK(replay_score(model, t.final_image, 0) == doctest::Approx(t.final_score).epsilon(1e-5));
  CHECK(trace_to_json(t, segs).find("\"bed\"") != std::string::npos);
}

TEST_CASE("every removal flips the class: zero removals") {
  const int side = 18;
  Rng rng(21);
  Image img(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) img.at(x, y) = {static_cast<std::uint8_t>(60 + rng.below(120)), 90, 90};
  const SegmentMap segs = grid_segments(side, side, 2);
  // Texture energy of the original, then a threshold just below it.
  const Model probe = fixture::texture_classifier(side, 0.0f, 0.0f);
  const ActivationTrace tr = probe.forward_one(preprocess(img, side));
  double energy = 0;
  for (float v : tr.output(1).values()) energy += v;
  const float alpha = static_cast<float>(20.0 / energy);
  const Model model = fixture::texture_classifier(side, static_cast<float>(0.97 * energy), alpha);

  const SimplificationTrace t = greedy_simplify(model, img, segs, 0);
  CHECK(t.steps.empty());
  REQUIRE(t.stopped_by.has_value());
  CHECK(t.final_image == img);
  CHECK(t.retained == std::vector<int>{0, 1, 2, 3});
  CHECK(t.final_score == t.initial_score);
  CHECK_THROWS_AS(greedy_simplify(model, img, segs, 1), PreconditionError);
}

TEST_CASE("greedy choice matches exhaustive enumeration and per-step recheck") {
  const int side = 16;
  const Model model = fixture::color_classifier(side);
  Rng rng(12);
  int traces = 0;
  for (int trial = 0; trial < 8; ++trial) {
    fixture::Scene scene = fixture::color_scene(rng, side, 2);
    const Image one[] = {scene.image};
    const int target = score_images(model, one, 0).front().top1;
    const SimplificationTrace t = greedy_simplify(model, scene.image, scene.segments, target);

    // Full tree of removal orders; each node evaluated independently.
    std::vector<SimplificationStep> expected;
    std::optional<SimplificationStep> expected_stop;
    Image cur = scene.image;
    std::vector<int> remaining{0, 1, 2, 3};
    std::function<float(const Image&)> score = [&](const Image& im) { return replay_score(model, im, target); };
    std::map<std::vector<int>, float> order_scores;
    std::function<void(const Image&, std::vector<int>, std::vector<int>)> walk =
        [&](const Image& im, std::vector<int> prefix, std::vector<int> left) {
          if (left.size() <= 1) return;
          for (std::size_t i = 0; i < left.size(); ++i) {
            const Image next = remove_segment(im, scene.segments, left[i]);
            auto p = prefix;
            p.push_back(left[i]);
            order_scores[p] = score(next);
            auto l = left;
            l.erase(l.begin() + static_cast<std::ptrdiff_t>(i));
            walk(next, p, l);
          }
        };
    walk(scene.image, {}, remaining);
    CHECK(order_scores.size() == 4 + 12 + 24);

    std::vector<int> prefix;
    while (remaining.size() > 1) {
      int best = -1;
      float best_score = -1;
      for (int l : remaining) {
        auto p = prefix;
        p.push_back(l);
        if (order_scores[p] > best_score) best = l, best_score = order_scores[p];
      }
      prefix.push_back(best);
      cur = remove_segment(cur, scene.segments, best);
      const ActivationTrace tr =
          model.forward_one(preprocess(cur, side, model.spec().mean()));
      if (argmax(tr.final_output().values()) != target) {
        expected_stop = SimplificationStep{best, best_score};
        break;
      }
      expected.push_back({best, best_score});
      remaining.erase(std::find(remaining.begin(), remaining.end(), best));
    }
    REQUIRE(t.steps.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(t.steps[i].label == expected[i].label);
      CHECK(t.steps[i].score == doctest::Approx(expected[i].score).epsilon(1e-6));
    }
    CHECK(t.stopped_by.has_value() == expected_stop.has_value());
    CHECK(replay_score(model, t.final_image, target) == doctest::Approx(t.final_score).epsilon(1e-5));
    ++traces;
  }
  CHECK(traces == 8);
}

TEST_CASE("retained_stats percentages") {
  std::vector<RetentionRecord> recs;
  for (int i = 0; i < 10; ++i)
    recs.push_back({"bedroom", {"bed", "lamp", "wall"}, i < 3 ? std::set<std::string>{"bed", "wall"}
                                                               : std::set<std::string>{"bed"}});
  recs.push_back({"kitchen", {"stove"}, {}});
  const auto stats = retained_stats(recs);
  CHECK(stats.at("bedroom").at("bed") == 100.0);
  CHECK(stats.at("bedroom").at("lamp") == 0.0);
  CHECK(stats.at("bedroom").at("wall") == doctest::Approx(30.0));
  CHECK(stats.at("kitchen").at("stove") == 0.0);
  CHECK_THROWS_AS(retained_stats(std::span<const RetentionRecord>{}), PreconditionError);

  SimplificationTrace t;
  t.retained = {1};
  const SegmentMap segs(2, 1, {0, 1}, {{0, "wall"}, {1, "bed"}});
  const RetentionRecord r = retention_record(t, segs, "bedroom");
  CHECK(r.present == std::set<std::string>{"bed", "wall"});
  CHECK(r.retained == std::set<std::string>{"bed"});
}
