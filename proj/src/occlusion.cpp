#include "scopelens/occlusion.hpp"

#include <algorithm>
#include <cmath>

#include "scopelens/error.hpp"
#include "scopelens/receptive_field.hpp"
#include "scopelens/weights.hpp"

namespace scopelens {

OccluderGrid occluder_grid(int side, int patch, int stride) {
  if (patch < 1) throw PreconditionError("occluder patch must be >= 1");
  if (patch > side) {
    throw PreconditionError("occluder patch " + std::to_string(patch) + " larger than input side " +
                            std::to_string(side));
  }
  if (stride < 1) throw PreconditionError("occluder stride must be >= 1");
  return {side, patch, stride, (side - patch) / stride + 1};
}

FillMode fill_mode_from_string(std::string_view s) {
  if (s == "random" || s == "uniform-random") return FillMode::UniformRandom;
  if (s == "gray" || s == "mean-gray") return FillMode::MeanGray;
  throw ValidationError("fill mode must be 'random' or 'gray', got '" + std::string(s) + "'");
}

namespace {

std::size_t feature_layer(const NetworkSpec& spec, const Unit& unit) {
  check_unit(spec, unit);
  const std::size_t index = spec.index_of(unit.layer);
  const std::size_t feat = spec.feature_index(index);
  theoretical_rf(spec, feat);  // throws UnsupportedLayerError past fc
  return feat;
}

void check_image(const NetworkSpec& spec, const Tensor& image) {
  const FeatureShape& in = spec.input_shape();
  if (image.rank() != 3 || image.dim(0) != in.channels || image.dim(1) != in.height || image.dim(2) != in.width) {
    throw ShapeError("image tensor " + shape_string(image.shape()) + " does not match network input");
  }
}

}  // namespace

UnitPeak find_peak(const Model& model, const Tensor& image, const Unit& unit) {
  const NetworkSpec& spec = model.spec();
  const std::size_t feat = feature_layer(spec, unit);
  check_image(spec, image);
  const ActivationTrace trace = model.forward_one(image, {.stop_after = feat, .keep_all = false});
  const Tensor& out = trace.output(feat);
  const int w = out.dim(3);
  const auto plane = std::span<const float>(out.item(0)).subspan(
      static_cast<std::size_t>(unit.channel) * out.dim(2) * w, static_cast<std::size_t>(out.dim(2)) * w);
  const int best = argmax(plane);
  return {{best % w, best / w}, plane[best]};
}

std::vector<float> occlusion_discrepancies(const Model& model, const Tensor& image, const Unit& unit,
                                           const UnitPeak& peak, std::span<const Occluder> occluders, Rng& rng,
                                           const OcclusionOptions& options) {
  const NetworkSpec& spec = model.spec();
  const std::size_t feat = feature_layer(spec, unit);
  check_image(spec, image);
  const int channels = image.dim(0), side = image.dim(1);
  for (const Occluder& o : occluders) {
    if (o.size < 1 || o.x < 0 || o.y < 0 || o.x + o.size > side || o.y + o.size > side) {
      throw PreconditionError("occluder outside the input");
    }
  }

  // Fill content is generated up front in occluder order.
  std::vector<std::vector<float>> fills(occluders.size());
  for (std::size_t i = 0; i < occluders.size(); ++i) {
    const int s = occluders[i].size;
    fills[i].resize(static_cast<std::size_t>(channels) * s * s);
    std::size_t k = 0;
    for (int c = 0; c < channels; ++c) {
      const float mean = c < 3 ? options.mean[c] : 0.0f;
      for (int j = 0; j < s * s; ++j, ++k) {
        fills[i][k] = options.fill == FillMode::UniformRandom ? static_cast<float>(rng.byte()) - mean : 0.0f;
      }
    }
  }

  const FeatureShape& fs = spec.output_shape(feat);
  const std::size_t probe = (static_cast<std::size_t>(unit.channel) * fs.height + peak.position.y) * fs.width +
                            peak.position.x;
  std::vector<float> out(occluders.size());
  const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (std::size_t start = 0; start < occluders.size(); start += batch) {
    const std::size_t n = std::min(batch, occluders.size() - start);
    Tensor input({static_cast<int>(n), channels, side, side});
    for (std::size_t b = 0; b < n; ++b) {
      auto dst = input.item(static_cast<int>(b));
      std::copy(image.values().begin(), image.values().end(), dst.begin());
      const Occluder& o = occluders[start + b];
      const auto& fill = fills[start + b];
      std::size_t k = 0;
      for (int c = 0; c < channels; ++c) {
        for (int y = o.y; y < o.y + o.size; ++y) {
          for (int x = o.x; x < o.x + o.size; ++x) {
            dst[(static_cast<std::size_t>(c) * side + y) * side + x] = fill[k++];
          }
        }
      }
    }
    const ActivationTrace trace =
        model.forward(input, {.stop_after = feat, .keep_all = false, .threads = options.threads});
    const Tensor& act = trace.output(feat);
    for (std::size_t b = 0; b < n; ++b) {
      const float a = act.item(static_cast<int>(b))[probe];
      out[start + b] = std::max(0.0f, peak.value - a);
    }
  }
  return out;
}

DiscrepancyMap discrepancy_map(const Model& model, const Tensor& image, const Unit& unit, const OccluderGrid& grid,
                               Rng& rng, const OcclusionOptions& options, std::size_t image_id) {
  if (grid.side != model.spec().input_side()) throw PreconditionError("occluder grid side differs from input side");
  DiscrepancyMap map;
  map.image_id = image_id;
  map.grid = grid;
  map.peak = find_peak(model, image, unit);
  std::vector<Occluder> occluders(grid.count());
  for (std::size_t i = 0; i < occluders.size(); ++i) occluders[i] = grid.at(i);
  map.values = occlusion_discrepancies(model, image, unit, map.peak, occluders, rng, options);
  return map;
}

std::vector<float> splat(const DiscrepancyMap& map) {
  const OccluderGrid& g = map.grid;
  const std::size_t S = static_cast<std::size_t>(g.side);
  std::vector<double> acc(S * S, 0.0);
  std::vector<int> cover(S * S, 0);
  for (std::size_t i = 0; i < g.count(); ++i) {
    const Occluder o = g.at(i);
    const double v = map.values[i];
    for (int y = o.y; y < o.y + o.size; ++y) {
      for (int x = o.x; x < o.x + o.size; ++x) {
        acc[y * S + x] += v;
        ++cover[y * S + x];
      }
    }
  }
  std::vector<float> out(S * S, 0.0f);
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (cover[p]) out[p] = static_cast<float>(acc[p] / cover[p]);
  }
  return out;
}

EmpiricalRF empirical_rf(std::span<const DiscrepancyMap> maps, const NetworkSpec& spec, std::string_view layer) {
  if (maps.empty()) throw PreconditionError("empirical_rf needs at least one discrepancy map");
  const RFGeometry rf = theoretical_rf(spec, spec.feature_index(spec.index_of(layer)));
  const int S = maps.front().grid.side;
  EmpiricalRF out;
  out.input_side = S;
  out.canvas_side = 2 * S - 1;
  out.k_used = static_cast<int>(maps.size());
  std::vector<double> sum(static_cast<std::size_t>(out.canvas_side) * out.canvas_side, 0.0);

  for (const DiscrepancyMap& m : maps) {
    if (m.grid.side != S || m.grid.patch != maps.front().grid.patch || m.grid.stride != maps.front().grid.stride) {
      throw PreconditionError("discrepancy maps come from different occluder grids");
    }
    const std::vector<float> img = splat(m);
    const int dx = out.center() - rf.center(m.peak.position.x);
    const int dy = out.center() - rf.center(m.peak.position.y);
    for (int y = 0; y < S; ++y) {
      const int cy = y + dy;
      if (cy < 0 || cy >= out.canvas_side) continue;
      for (int x = 0; x < S; ++x) {
        const int cx = x + dx;
        if (cx < 0 || cx >= out.canvas_side) continue;
        sum[static_cast<std::size_t>(cy) * out.canvas_side + cx] += img[static_cast<std::size_t>(y) * S + x];
      }
    }
  }
  out.canvas.resize(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out.canvas[i] = static_cast<float>(sum[i] / out.k_used);
  return out;
}

double rf_size(const EmpiricalRF& rf, double theta) {
  const float peak = rf.canvas.empty() ? 0.0f : *std::max_element(rf.canvas.begin(), rf.canvas.end());
  if (!(peak > 0.0f)) throw PreconditionError("receptive field size undefined for an all-zero canvas");
  const double cut = theta * peak;
  const auto n = std::count_if(rf.canvas.begin(), rf.canvas.end(), [&](float v) { return v >= cut; });
  return std::sqrt(static_cast<double>(n));
}

Point canvas_peak(const EmpiricalRF& rf) {
  const int i = argmax(rf.canvas);
  return {i % rf.canvas_side, i / rf.canvas_side};
}

SizeStats rf_size_stats(std::span<const EmpiricalRF> rfs, double theta) {
  SizeStats s;
  std::vector<double> sizes;
  for (const EmpiricalRF& rf : rfs) sizes.push_back(rf_size(rf, theta));
  s.count = sizes.size();
  if (sizes.empty()) return s;
  for (double v : sizes) s.mean += v;
  s.mean /= static_cast<double>(sizes.size());
  for (double v : sizes) s.stddev += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(sizes.size()));
  return s;
}

UnitRFEstimate estimate_unit_rf(const Model& model, std::span<const Tensor> dataset, const Unit& unit,
                                const RFEstimationConfig& config) {
  if (config.top_k < 1) throw PreconditionError("K must be >= 1");
  UnitRFEstimate est;
  est.unit = unit;
  est.top_images = rank_images(model, unit, dataset, config.rank, config.top_k, config.threads);
  const OccluderGrid grid = occluder_grid(model.spec().input_side(), config.patch, config.stride);
  Rng rng(config.seed);
  const OcclusionOptions opts{config.fill, model.spec().mean(), config.threads, 32};
  for (const RankedImage& r : est.top_images) {
    est.maps.push_back(discrepancy_map(model, dataset[r.image_id], unit, grid, rng, opts, r.image_id));
  }
  est.rf = empirical_rf(est.maps, model.spec(), unit.layer);
  return est;
}

void save_empirical_rfs(const std::map<Unit, EmpiricalRF>& rfs, const std::filesystem::path& path) {
  WeightStore blobs;
  for (const auto& [unit, rf] : rfs) {
    const std::string base = "rf/" + unit.layer + "/" + std::to_string(unit.channel);
    blobs.emplace(base, Tensor({rf.canvas_side, rf.canvas_side}, rf.canvas));
    blobs.emplace(base + "/k", Tensor({1}, {static_cast<float>(rf.k_used)}));
  }
  save_weights(blobs, path);
}

std::map<Unit, EmpiricalRF> load_empirical_rfs(const std::filesystem::path& path) {
  const WeightStore blobs = load_blobs(path);
  std::map<Unit, EmpiricalRF> out;
  for (const auto& [name, t] : blobs) {
    if (name.rfind("rf/", 0) != 0 || name.ends_with("/k")) continue;
    const auto slash = name.rfind('/');
    Unit unit{name.substr(3, slash - 3), std::stoi(name.substr(slash + 1))};
    if (t.rank() != 2 || t.dim(0) != t.dim(1) || t.dim(0) % 2 == 0) {
      throw FormatError("blob '" + name + "' is not an odd square canvas");
    }
    EmpiricalRF rf;
    rf.canvas_side = t.dim(0);
    rf.input_side = (rf.canvas_side + 1) / 2;
    rf.canvas = t.values();
    auto k = blobs.find(name + "/k");
    rf.k_used = k != blobs.end() ? static_cast<int>(k->second[0]) : 1;
    out.emplace(std::move(unit), std::move(rf));
  }
  return out;
}

}  // namespace scopelens
