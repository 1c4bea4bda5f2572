#include "scopelens/poisson.hpp"

#include <algorithm>
#include <cmath>

#include "scopelens/error.hpp"

namespace scopelens {

LaplaceSolution solve_laplace(std::span<const double> field, int width, int height, const Mask& mask,
                              const PoissonOptions& options) {
  if (mask.width() != width || mask.height() != height) throw ShapeError("mask does not match image dimensions");
  if (field.size() != static_cast<std::size_t>(width) * height) throw ShapeError("field size mismatch");
  LaplaceSolution sol;
  sol.values.assign(field.begin(), field.end());

  struct Cell {
    std::size_t index;
    int degree;
    double rhs;  // sum of Dirichlet neighbors
    std::size_t free[4];
    int free_count;
  };
  std::vector<Cell> cells;
  double ring_sum = 0;
  std::size_t ring_count = 0;
  static constexpr int dx[4] = {-1, 1, 0, 0};
  static constexpr int dy[4] = {0, 0, -1, 1};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!mask.at(x, y)) continue;
      Cell c{static_cast<std::size_t>(y) * width + x, 0, 0.0, {}, 0};
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k], ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        const std::size_t n = static_cast<std::size_t>(ny) * width + nx;
        ++c.degree;
        if (mask.at(nx, ny)) {
          c.free[c.free_count++] = n;
        } else {
          c.rhs += field[n];
          ring_sum += field[n];
          ++ring_count;
        }
      }
      cells.push_back(c);
    }
  }
  if (cells.empty()) return sol;
  if (ring_count == 0) throw PreconditionError("mask leaves no boundary pixels to fill from");

  const double guess = ring_sum / static_cast<double>(ring_count);
  const std::size_t n = cells.size();
  std::vector<std::size_t> slot(field.size(), n);
  for (std::size_t i = 0; i < n; ++i) slot[cells[i].index] = i;

  // A x with A = degree on the diagonal, -1 per free neighbor.
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = cells[i].degree * v[i];
      for (int k = 0; k < cells[i].free_count; ++k) s -= v[slot[cells[i].free[k]]];
      out[i] = s;
    }
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  std::vector<double> x(n, guess), r(n), z(n), p(n), q(n);
  double rhs_norm = 0;
  for (const Cell& c : cells) rhs_norm += c.rhs * c.rhs;
  const double denom = rhs_norm > 0 ? std::sqrt(rhs_norm) : 1.0;
  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = cells[i].rhs - q[i];
    z[i] = r[i] / cells[i].degree;
  }
  p = z;
  double rz = dot(r, z);
  sol.residual = std::sqrt(dot(r, r)) / denom;
  while (sol.residual > options.tolerance && sol.iterations < options.max_iterations) {
    apply(p, q);
    const double alpha = rz / dot(p, q);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      z[i] = r[i] / cells[i].degree;
    }
    const double rz_next = dot(r, z);
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + (rz_next / rz) * p[i];
    rz = rz_next;
    ++sol.iterations;
    sol.residual = std::sqrt(dot(r, r)) / denom;
  }
  for (std::size_t i = 0; i < n; ++i) sol.values[cells[i].index] = x[i];
  return sol;
}

namespace {

Image fill_channels(const Image& img, const Mask& mask, const PoissonOptions& options) {
  if (mask.width() != img.width() || mask.height() != img.height()) {
    throw ShapeError("mask does not match image dimensions");
  }
  Image out = img;
  if (mask.none()) return out;
  std::vector<double> field(static_cast<std::size_t>(img.width()) * img.height());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) field[static_cast<std::size_t>(y) * img.width() + x] = img.channel(x, y, c);
    }
    const LaplaceSolution sol = solve_laplace(field, img.width(), img.height(), mask, options);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        if (!mask.at(x, y)) continue;
        const double v = sol.values[static_cast<std::size_t>(y) * img.width() + x];
        out.set_channel(x, y, c, static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
      }
    }
  }
  return out;
}

}  // namespace

Image poisson_fill(const Image& img, const Mask& mask, const PoissonOptions& options) {
  for (int x = 0; x < mask.width(); ++x) {
    if (mask.at(x, 0) || mask.at(x, mask.height() - 1)) throw PreconditionError("mask touches the image border");
  }
  for (int y = 0; y < mask.height(); ++y) {
    if (mask.at(0, y) || mask.at(mask.width() - 1, y)) throw PreconditionError("mask touches the image border");
  }
  return fill_channels(img, mask, options);
}

Image poisson_remove(const Image& img, const Mask& mask, const PoissonOptions& options) {
  return fill_channels(img, mask, options);
}

}  // namespace scopelens
