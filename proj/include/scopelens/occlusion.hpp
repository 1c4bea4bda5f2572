#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "scopelens/forward.hpp"
#include "scopelens/image.hpp"
#include "scopelens/ranking.hpp"
#include "scopelens/rng.hpp"

namespace scopelens {

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

/// Square occluder with top-left corner (x, y) in input pixels.
struct Occluder {
  int x = 0;
  int y = 0;
  int size = 11;
};

/// Complete dense grid of occluder corners, row-major.
struct OccluderGrid {
  int side = 0;
  int patch = 0;
  int stride = 0;
  int per_axis = 0;

  std::size_t count() const noexcept { return static_cast<std::size_t>(per_axis) * per_axis; }
  Occluder at(std::size_t index) const noexcept {
    return {static_cast<int>(index % per_axis) * stride, static_cast<int>(index / per_axis) * stride, patch};
  }
};

/// (floor((side - patch) / stride) + 1)^2 positions. 227/11/3 gives 73 x 73.
OccluderGrid occluder_grid(int side, int patch, int stride);

enum class FillMode {
  UniformRandom,  // iid bytes from the seeded Rng, minus the channel mean
  MeanGray,       // the preprocessing mean color, i.e. zero in tensor space
};

FillMode fill_mode_from_string(std::string_view s);

/// Activation of a unit at its spatial argmax on the unoccluded input.
struct UnitPeak {
  Point position;  // feature-map coordinates
  float value = 0.0f;
};

/// First (row-major) spatial argmax of the unit's features.
UnitPeak find_peak(const Model& model, const Tensor& image, const Unit& unit);

struct OcclusionOptions {
  FillMode fill = FillMode::UniformRandom;
  ChannelMean mean = {0, 0, 0};
  int threads = 1;
  int batch_size = 32;
};

/// max(0, peak.value - a_o) for each occluder, where a_o is the unit's
/// activation at the fixed peak.position with the occluder pasted in. Fill
/// bytes are drawn from `rng` in occluder order before any forward pass, so
/// results do not depend on the thread count.
std::vector<float> occlusion_discrepancies(const Model& model, const Tensor& image, const Unit& unit,
                                           const UnitPeak& peak, std::span<const Occluder> occluders, Rng& rng,
                                           const OcclusionOptions& options = {});

struct DiscrepancyMap {
  std::size_t image_id = 0;
  OccluderGrid grid;
  std::vector<float> values;  // one per grid position, row-major, >= 0
  UnitPeak peak;              // argmax position used for every occluder
};

/// Throws UnsupportedLayerError for units past an fc layer.
/// Runs grid.count() + 1 forward passes.
DiscrepancyMap discrepancy_map(const Model& model, const Tensor& image, const Unit& unit, const OccluderGrid& grid,
                               Rng& rng, const OcclusionOptions& options = {}, std::size_t image_id = 0);

/// Average of recentered discrepancy maps on a (2 * side - 1)^2 canvas whose
/// center pixel corresponds to the projected center of each map's argmax.
struct EmpiricalRF {
  int input_side = 0;
  int canvas_side = 0;
  std::vector<float> canvas;
  int k_used = 0;

  float at(int x, int y) const noexcept { return canvas[static_cast<std::size_t>(y) * canvas_side + x]; }
  int center() const noexcept { return input_side - 1; }
};

/// Splat -> coverage-normalize -> shift -> average. Throws PreconditionError
/// on an empty list or maps from different grids.
EmpiricalRF empirical_rf(std::span<const DiscrepancyMap> maps, const NetworkSpec& spec, std::string_view layer);

/// Per-pixel image-space importance of one map (splat normalized by coverage).
std::vector<float> splat(const DiscrepancyMap& map);

/// sqrt(#canvas pixels >= theta * max). Throws PreconditionError when the
/// canvas is all zero.
double rf_size(const EmpiricalRF& rf, double theta = 0.5);

/// Canvas argmax (first in row-major order).
Point canvas_peak(const EmpiricalRF& rf);

struct SizeStats {
  double mean = 0;
  double stddev = 0;  // population
  std::size_t count = 0;
};
SizeStats rf_size_stats(std::span<const EmpiricalRF> rfs, double theta = 0.5);

struct RFEstimationConfig {
  std::size_t top_k = 25;
  int patch = 11;
  int stride = 3;
  RankMode rank = RankMode::Max;
  FillMode fill = FillMode::UniformRandom;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct UnitRFEstimate {
  Unit unit;
  std::vector<RankedImage> top_images;
  std::vector<DiscrepancyMap> maps;
  EmpiricalRF rf;
};

/// Full pipeline for one unit over a preprocessed dataset: rank, occlude the
/// top-K images in rank order with one Rng seeded from config.seed, average.
UnitRFEstimate estimate_unit_rf(const Model& model, std::span<const Tensor> dataset, const Unit& unit,
                                const RFEstimationConfig& config);

/// Blob archive: "rf/<layer>/<channel>" holds the canvas (side x side) and
/// "rf/<layer>/<channel>/k" the number of maps averaged.
void save_empirical_rfs(const std::map<Unit, EmpiricalRF>& rfs, const std::filesystem::path& path);
std::map<Unit, EmpiricalRF> load_empirical_rfs(const std::filesystem::path& path);

}  // namespace scopelens
