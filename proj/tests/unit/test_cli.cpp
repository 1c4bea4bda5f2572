#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "scopelens/annotation.hpp"
#include "scopelens/image.hpp"
#include "scopelens/rng.hpp"

using namespace scopelens;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "scopelens");
  std::ostringstream out, err;
  const int code = scopelens::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("scopelens_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  return json::parse(in);
}

fs::path noise_image(const fs::path& dir, int side, std::uint64_t seed) {
  Image img(side, side);
  Rng rng(seed);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) img.at(x, y) = {rng.byte(), rng.byte(), rng.byte()};
  const fs::path p = dir / "noise.ppm";
  save_ppm(img, p);
  return p;
}

}  // namespace

TEST_CASE("rf-theoretic prints the bundled network's receptive fields") {
  const fs::path dir = scratch("rf");
  const Run r = invoke({"--out", dir.string(), "rf-theoretic"});
  REQUIRE(r.code == 0);
  const json j = read_json(dir / "rf_theoretic.json");
  std::map<std::string, int> size;
  for (const auto& row : j["layers"]) size[row["layer"]] = row["size"];
  CHECK(size["conv1"] == 11);
  CHECK(size["pool1"] == 19);
  CHECK(size["pool2"] == 67);
  CHECK(size["conv3"] == 99);
  CHECK(size["conv4"] == 131);
  CHECK(size["pool5"] == 195);
  CHECK(r.out.find("195") != std::string::npos);
  CHECK(fs::exists(dir / "rf_theoretic.csv"));
  CHECK(fs::exists(dir / "rf_theoretic.txt"));
}

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"forward"}).code == 2);  // --image is required
  CHECK(invoke({"--threads", "-1", "rf-theoretic"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"forward", "--help"}).code == 0);
}

TEST_CASE("runtime failures exit with 1") {
  const fs::path dir = scratch("fail");
  const Run r = invoke({"--out", dir.string(), "forward", "--image", (dir / "missing.ppm").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.ppm") != std::string::npos);
  CHECK(invoke({"--out", dir.string(), "--net", (dir / "nope.json").string(), "rf-theoretic"}).code == 1);
}

TEST_CASE("forward reports a descending top-5 distribution") {
  const fs::path dir = scratch("forward");
  const fs::path img = noise_image(dir, 64, 1);
  const Run r = invoke({"--out", dir.string(), "--seed", "4", "forward", "--image", img.string(), "--top", "5"});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("random weights") != std::string::npos);
  const json j = read_json(dir / "forward.json");
  REQUIRE(j["top"].size() == 5);
  double sum = 0, prev = 2;
  for (const auto& row : j["top"]) {
    const double p = row["prob"];
    CHECK(p <= prev);
    CHECK(p >= 0.0);
    sum += p;
    prev = p;
  }
  CHECK(sum <= 1.0 + 1e-5);

  // Saved weights reproduce the implicit ones for the same seed.
  const fs::path w = dir / "w.nnw";
  REQUIRE(invoke({"--out", dir.string(), "--seed", "4", "init-weights", "--output", w.string()}).code == 0);
  const fs::path dir2 = dir / "again";
  REQUIRE(invoke({"--out", dir2.string(), "--weights", w.string(), "forward", "--image", img.string()}).code == 0);
  CHECK(read_json(dir2 / "forward.json")["top"] == j["top"]);
}

TEST_CASE("config file supplies defaults the command line overrides") {
  const fs::path dir = scratch("config");
  const fs::path img = noise_image(dir, 32, 2);
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << json{{"out", (dir / "from_config").string()}, {"seed", 4}, {"options", {{"top", 3}, {"grid", 5}}}}
                            .dump();
  REQUIRE(invoke({"--config", cfg.string(), "forward", "--image", img.string()}).code == 0);
  CHECK(read_json(dir / "from_config" / "forward.json")["top"].size() == 3);

  REQUIRE(invoke({"--config", cfg.string(), "--out", (dir / "cli").string(), "forward", "--image", img.string(), "--top",
               "2"})
              .code == 0);
  CHECK(read_json(dir / "cli" / "forward.json")["top"].size() == 2);

  std::ofstream(dir / "bad.json") << R"({"colour": "red"})";
  CHECK(invoke({"--config", (dir / "bad.json").string(), "rf-theoretic"}).code == 2);
}

TEST_CASE("planted data through segment, eval-seg and rf-estimate") {
  const fs::path dir = scratch("planted");
  const fs::path data = dir / "data";
  REQUIRE(invoke({"--out", data.string(), "--seed", "9", "synth", "--kind", "planted", "--count", "30"}).code == 0);
  const std::vector<std::string> net = {"--net", (data / "planted-net.json").string(), "--weights",
                                        (data / "planted-weights.nnw").string()};
  auto with_net = [&](std::vector<std::string> args) {
    args.insert(args.begin(), net.begin(), net.end());
    return invoke(args);
  };

  REQUIRE(with_net({"--out", (dir / "seg").string(), "segment", "--image", (data / "images/0000.ppm").string(),
                    "--units", "conv3:0", "--thresholds", "3.125"})
              .code == 0);
  const json seg = read_json(dir / "seg" / "segment.json");
  CHECK(seg["detections"].size() == 1);
  CHECK(fs::exists(dir / "seg" / "mask_conv3_0.pgm"));

  REQUIRE(with_net({"--out", (dir / "eval").string(), "--dataset", (data / "index.json").string(), "eval-seg", "--tags",
                    (data / "tags.json").string()})
              .code == 0);
  const json ev = read_json(dir / "eval" / "eval_seg.json");
  REQUIRE(ev["classes"].size() == 1);
  CHECK(ev["classes"][0]["class"] == "pattern");
  CHECK(ev["classes"][0]["ap"].get<double>() == doctest::Approx(1.0));
  CHECK(ev["classes"][0]["jaccard"].get<double>() > 0.3);

  REQUIRE(with_net({"--out", (dir / "rf").string(), "--dataset", (data / "index.json").string(), "rf-estimate",
                    "--units", "conv3:0", "--top-k", "5"})
              .code == 0);
  const json rf = read_json(dir / "rf" / "rf_estimate.json");
  REQUIRE(rf["units"].size() == 1);
  CHECK(rf["units"][0]["theoretical"] == 20);
  CHECK(rf["units"][0]["empirical"].get<double>() > 0.0);
  CHECK(rf["units"][0]["empirical"].get<double>() <= 20.0 * 1.5);
  CHECK(fs::exists(dir / "rf" / "empirical_rf.nnw"));

  REQUIRE(with_net({"--out", (dir / "rep").string(), "report", "--image", (data / "images/0000.ppm").string(),
                    "--tags", (data / "tags.json").string()})
              .code == 0);
  CHECK(read_json(dir / "rep" / "report.json").dump().find("pattern") != std::string::npos);

  CHECK(with_net({"--out", (dir / "x").string(), "segment", "--image", (data / "images/0000.ppm").string(), "--units",
                  "conv3:0"})
            .code == 2);  // no thresholds and no dataset
}

TEST_CASE("simplify on a grid keeps the class") {
  const fs::path dir = scratch("simplify");
  const fs::path data = dir / "data";
  REQUIRE(invoke({"--out", data.string(), "synth", "--count", "2"}).code == 0);
  const Run r = invoke({"--net", (data / "planted-net.json").string(), "--weights", (data / "planted-weights.nnw").string(),
                     "--out", dir.string(), "simplify", "--image", (data / "images/0000.ppm").string(), "--grid", "4"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "simplified.png"));
  const json t = read_json(dir / "simplify.json");
  CHECK(t.dump().find("steps") != std::string::npos);
}

TEST_CASE("analyze over synthetic scenes and annotation records") {
  const fs::path dir = scratch("analyze");
  REQUIRE(invoke({"--out", (dir / "scenes").string(), "--seed", "5", "synth", "--kind", "scenes", "--count", "30"}).code ==
          0);
  {
    AnnotationStore store(dir / "records.ndjson");
    const std::vector<std::pair<std::string, int>> tags = {{"wall", 3}, {"floor", 2}, {"bed", 1}};
    int channel = 0;
    for (const auto& [concept_label, n] : tags) {
      for (int i = 0; i < n; ++i, ++channel) {
        AnnotationRecord r;
        r.unit = {"pool5", channel};
        r.task_id = task_id(r.unit, 0);
        r.concept_label = concept_label;
        r.precision = 1.0;
        REQUIRE(store.append(r));
      }
    }
  }
  const Run r = invoke({"--out", (dir / "out").string(), "--dataset", (dir / "scenes" / "index.json").string(), "analyze",
                     "--records", (dir / "records.ndjson").string()});
  REQUIRE(r.code == 0);
  const json a = read_json(dir / "out" / "analysis.json");
  CHECK(a.dump().find("wall") != std::string::npos);
  for (const char* f : {"object_frequency.csv", "unit_object_counts.csv", "informative_objects.csv",
                        "scene_object_ap.csv", "analysis.txt"}) {
    CHECK(fs::exists(dir / "out" / f));
  }
  std::ifstream csv(dir / "out" / "unit_object_counts.csv");
  const std::string body((std::istreambuf_iterator<char>(csv)), {});
  CHECK(body.find("wall,3") != std::string::npos);
}

TEST_CASE("selftest passes") {
  const fs::path dir = scratch("selftest");
  const Run r = invoke({"--out", dir.string(), "selftest"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(read_json(dir / "selftest.json")["pass"] == true);
}
