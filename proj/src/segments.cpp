#include "scopelens/segments.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "scopelens/error.hpp"

namespace scopelens {

SegmentMap::SegmentMap(int width, int height, std::vector<std::uint16_t> labels, std::map<int, std::string> names)
    : width_(width), height_(height), labels_(std::move(labels)), names_(std::move(names)) {
  if (width < 1 || height < 1) throw ValidationError("segment map dimensions must be positive");
  if (labels_.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("segment map has " + std::to_string(labels_.size()) + " labels for " +
                          std::to_string(width) + "x" + std::to_string(height) + " pixels");
  }
  const int top = *std::max_element(labels_.begin(), labels_.end());
  std::vector<bool> seen(static_cast<std::size_t>(top) + 1, false);
  for (auto l : labels_) seen[l] = true;
  for (int l = 0; l <= top; ++l) {
    if (!seen[l]) throw ValidationError("segment labels are not contiguous: " + std::to_string(l) + " is missing");
  }
  count_ = top + 1;
  for (const auto& [label, name] : names_) {
    if (label < 0 || label >= count_) throw ValidationError("name given for unknown label " + std::to_string(label));
  }
}

std::string SegmentMap::name(int label) const {
  auto it = names_.find(label);
  return it == names_.end() ? std::string() : it->second;
}

Mask SegmentMap::mask(int label) const {
  Mask m(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (at(x, y) == label) m.set(x, y);
    }
  }
  return m;
}

SegmentMap grid_segments(int width, int height, int cells) {
  if (cells < 1 || cells > width || cells > height) throw PreconditionError("grid cells must be in [1, side]");
  std::vector<std::uint16_t> labels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int cx = x * cells / width, cy = y * cells / height;
      labels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint16_t>(cy * cells + cx);
    }
  }
  return SegmentMap(width, height, std::move(labels));
}

SegmentMap load_segment_map(const std::filesystem::path& pgm, const std::filesystem::path& names_json) {
  GrayImage g;
  try {
    g = decode_pgm(read_file(pgm));
  } catch (const FormatError& e) {
    throw FormatError(pgm.string() + ": " + e.what());
  }
  std::map<int, std::string> names;
  if (!names_json.empty()) {
    std::ifstream in(names_json);
    if (!in) throw Error("cannot open " + names_json.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(names_json.string() + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError(names_json.string() + ": expected an object of label names");
    for (const auto& [key, value] : j.items()) names[std::stoi(key)] = value.get<std::string>();
  }
  return SegmentMap(g.width, g.height, std::move(g.samples), std::move(names));
}

void save_segment_map(const SegmentMap& map, const std::filesystem::path& pgm,
                      const std::filesystem::path& names_json) {
  write_file(pgm, encode_pgm(GrayImage{map.width(), map.height(), 65535, map.labels()}));
  if (names_json.empty()) return;
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [label, name] : map.names()) j[std::to_string(label)] = name;
  std::ofstream out(names_json);
  if (!out) throw Error("cannot write " + names_json.string());
  out << j.dump(2) << '\n';
}

}  // namespace scopelens
