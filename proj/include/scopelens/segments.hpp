#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scopelens/image.hpp"

namespace scopelens {

/// Per-pixel segment labels 0..L-1 with optional class names per label.
class SegmentMap {
 public:
  SegmentMap() = default;
  /// Throws ValidationError unless the labels form a contiguous 0..L-1 set.
  SegmentMap(int width, int height, std::vector<std::uint16_t> labels, std::map<int, std::string> names = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int label_count() const noexcept { return count_; }
  std::uint16_t at(int x, int y) const noexcept { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<std::uint16_t>& labels() const noexcept { return labels_; }
  const std::map<int, std::string>& names() const noexcept { return names_; }
  /// Class name of a label, or empty when unnamed.
  std::string name(int label) const;

  Mask mask(int label) const;

 private:
  int width_ = 0;
  int height_ = 0;
  int count_ = 0;
  std::vector<std::uint16_t> labels_;
  std::map<int, std::string> names_;
};

/// cells x cells blocks of near-equal size, labels row-major.
SegmentMap grid_segments(int width, int height, int cells);

/// Label image as a 16-bit PGM plus an optional sidecar JSON {"<label>": "<name>"}.
SegmentMap load_segment_map(const std::filesystem::path& pgm, const std::filesystem::path& names_json = {});
void save_segment_map(const SegmentMap& map, const std::filesystem::path& pgm,
                      const std::filesystem::path& names_json = {});

}  // namespace scopelens
