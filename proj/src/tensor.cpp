#include "scopelens/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scopelens/error.hpp"

namespace scopelens {

std::size_t shape_product(std::span<const int> shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(std::span<const int> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) throw ShapeError("axis out of range for " + shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::item_size() const noexcept {
  if (shape_.empty()) return 0;
  return data_.size() / static_cast<std::size_t>(shape_[0]);
}

std::span<float> Tensor::item(int n) {
  const std::size_t stride = item_size();
  return std::span<float>(data_).subspan(static_cast<std::size_t>(n) * stride, stride);
}

std::span<const float> Tensor::item(int n) const {
  const std::size_t stride = item_size();
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(n) * stride, stride);
}

Tensor Tensor::reshaped(std::vector<int> shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("cannot stack an empty tensor list");
  const auto& first = items.front().shape();
  std::vector<int> shape;
  shape.reserve(first.size() + 1);
  shape.push_back(static_cast<int>(items.size()));
  shape.insert(shape.end(), first.begin(), first.end());
  std::vector<float> data;
  data.reserve(items.size() * items.front().size());
  for (const Tensor& t : items) {
    if (t.shape() != first) {
      throw ShapeError("stack: shape " + shape_string(t.shape()) + " differs from " + shape_string(first));
    }
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace scopelens
