#pragma once

#include <span>
#include <vector>

#include "scopelens/image.hpp"

namespace scopelens {

struct PoissonOptions {
  double tolerance = 1e-10;  // relative residual ||b - Ax|| / ||b||
  int max_iterations = 10000;
};

struct LaplaceSolution {
  std::vector<double> values;  // whole field, unmasked entries untouched
  int iterations = 0;
  double residual = 0;  // final relative residual
};

/// Jacobi-preconditioned conjugate-gradient solve of the 5-point Laplace equation on the masked pixels of
/// one channel. Unmasked neighbors are Dirichlet data; neighbors outside the
/// image are dropped (zero normal derivative). The initial guess is the mean
/// of the Dirichlet ring. Throws PreconditionError when the mask covers the
/// whole image.
LaplaceSolution solve_laplace(std::span<const double> field, int width, int height, const Mask& mask,
                              const PoissonOptions& options = {});

/// Zero-gradient fill of the masked pixels, per channel, clamped and rounded
/// to [0, 255]. Pixels outside the mask are bit-unchanged. Throws
/// PreconditionError when the mask touches the image border.
Image poisson_fill(const Image& img, const Mask& mask, const PoissonOptions& options = {});

/// Same fill without the border precondition: border pixels use the
/// zero-normal-derivative condition instead of Dirichlet data.
Image poisson_remove(const Image& img, const Mask& mask, const PoissonOptions& options = {});

}  // namespace scopelens
