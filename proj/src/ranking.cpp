#include "scopelens/ranking.hpp"

#include <algorithm>
#include <numeric>

#include "scopelens/error.hpp"

namespace scopelens {

RankMode rank_mode_from_string(std::string_view s) {
  if (s == "max") return RankMode::Max;
  if (s == "sum") return RankMode::Sum;
  throw ValidationError("rank mode must be 'max' or 'sum', got '" + std::string(s) + "'");
}

std::vector<std::vector<UnitResponse>> scan_responses(const Model& model, std::span<const Unit> units,
                                                      std::span<const Tensor> dataset, int threads,
                                                      int batch_size) {
  const NetworkSpec& spec = model.spec();
  std::size_t deepest = 0;
  for (const Unit& u : units) {
    check_unit(spec, u);
    deepest = std::max(deepest, spec.feature_index(spec.index_of(u.layer)));
  }
  std::vector<std::vector<UnitResponse>> out(units.size(), std::vector<UnitResponse>(dataset.size()));
  if (units.empty()) return out;

  ForwardOptions opts;
  opts.stop_after = deepest;
  opts.threads = threads;
  for (std::size_t start = 0; start < dataset.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(dataset.size(), start + static_cast<std::size_t>(batch_size));
    const Tensor batch = stack(dataset.subspan(start, end - start));
    const ActivationTrace trace = model.forward(batch, opts);
    for (std::size_t u = 0; u < units.size(); ++u) {
      for (std::size_t i = start; i < end; ++i) {
        const int n = static_cast<int>(i - start);
        const auto map = trace.unit_map(spec, units[u], n);
        const auto pre = trace.unit_pre_activation_map(spec, units[u], n);
        UnitResponse& r = out[u][i];
        r.max = *std::max_element(map.begin(), map.end());
        double sum = 0.0;
        for (float v : map) sum += v;
        r.sum = static_cast<float>(sum);
        r.min_pre = *std::min_element(pre.begin(), pre.end());
      }
    }
  }
  return out;
}

std::vector<RankedImage> rank_scores(std::span<const float> scores, std::size_t k) {
  std::vector<RankedImage> all(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) all[i] = {i, scores[i]};
  std::stable_sort(all.begin(), all.end(), [](const RankedImage& a, const RankedImage& b) { return a.score > b.score; });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<RankedImage> rank_images(const Model& model, const Unit& unit, std::span<const Tensor> dataset,
                                     RankMode mode, std::size_t k, int threads) {
  if (k < 1) throw PreconditionError("rank_images: k must be >= 1");
  const auto responses = scan_responses(model, std::span<const Unit>(&unit, 1), dataset, threads);
  std::vector<float> scores;
  scores.reserve(dataset.size());
  for (const UnitResponse& r : responses[0]) scores.push_back(mode == RankMode::Max ? r.max : r.sum);
  return rank_scores(scores, k);
}

}  // namespace scopelens
