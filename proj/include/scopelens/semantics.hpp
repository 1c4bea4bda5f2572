#pragma once

#include <array>
#include <string>
#include <string_view>

namespace scopelens {

/// The six concept groups annotators choose from.
enum class Category {
  SimpleElementsColors,
  MaterialsTextures,
  RegionsSurfaces,
  ObjectParts,
  Objects,
  Scenes,
};

inline constexpr std::array<Category, 6> kCategories = {
    Category::SimpleElementsColors, Category::MaterialsTextures, Category::RegionsSurfaces,
    Category::ObjectParts,          Category::Objects,           Category::Scenes,
};

/// Display names, e.g. "simple elements and colors", "objects".
std::string_view to_string(Category c);
/// Accepts display names; throws ValidationError otherwise.
Category category_from_string(std::string_view s);

}  // namespace scopelens
