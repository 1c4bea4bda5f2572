#include "scopelens/semantics.hpp"

#include "scopelens/error.hpp"

namespace scopelens {

namespace {

constexpr std::array<std::string_view, 6> kNames = {
    "simple elements and colors", "materials and textures", "regions and surfaces", "object parts", "objects",
    "scenes",
};

}  // namespace

std::string_view to_string(Category c) { return kNames[static_cast<std::size_t>(c)]; }

Category category_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == s) return kCategories[i];
  }
  throw ValidationError("unknown category '" + std::string(s) + "'");
}

}  // namespace scopelens
