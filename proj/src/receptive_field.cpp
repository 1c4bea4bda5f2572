#include "scopelens/receptive_field.hpp"

#include "scopelens/error.hpp"

namespace scopelens {

RFGeometry theoretical_rf(const NetworkSpec& spec, std::size_t index) {
  RFGeometry rf;
  for (std::size_t i = 0; i <= index; ++i) {
    const LayerSpec& l = spec.layer(i);
    if (!l.is_spatial()) {
      throw UnsupportedLayerError("receptive field undefined at '" + spec.layer(index).name + "': layer '" + l.name +
                                  "' (" + std::string(to_string(l.kind)) + ") is not spatially local");
    }
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::MaxPool) {
      rf.offset -= l.padding * rf.stride;
      rf.size += (l.kernel - 1) * rf.stride;
      rf.stride *= l.stride;
    }
  }
  return rf;
}

RFGeometry theoretical_rf(const NetworkSpec& spec, std::string_view layer) {
  return theoretical_rf(spec, spec.index_of(layer));
}

}  // namespace scopelens
