#pragma once

#include <array>

#include "dff/image.hpp"

namespace dff {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Coefficients of the three-vector flow D(p) = alpha * (p - c) + (beta, gamma).
/// alpha is a radial (crop) coefficient; beta and gamma are pixel shifts.
struct BasisCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  bool operator==(const BasisCoefficients&) const = default;
};

/// Sanity bound on |alpha|; larger values are treated as divergence.
inline constexpr double kAlphaBound = 0.2;

bool is_finite(const BasisCoefficients& c);

/// Sampling position p + D(p).
Point2 apply_flow(const BasisCoefficients& c, Point2 center, Point2 p);

/// Coefficients of the single warp equal to warping by `first` and then by
/// `second` (both about the same center): the composed sampling map is
/// p -> M_first(M_second(p)).
BasisCoefficients compose(const BasisCoefficients& first, const BasisCoefficients& second);

/// Coefficients whose sampling map inverts that of `c`.
BasisCoefficients inverse(const BasisCoefficients& c);

/// Pure-scale coefficients about the center.
inline BasisCoefficients scale_only(double scale) { return {scale - 1.0, 0.0, 0.0}; }

/// Mean endpoint distance between the sampling maps of `a` and `b` over
/// every pixel center of a width x height grid.
double mean_endpoint_error(const BasisCoefficients& a, const BasisCoefficients& b, Point2 center,
                           int width, int height);

struct WarpResult {
  Image image;
  Mask valid;
};

/// Inverse warping: output(p) = input(p + D(p)), bilinear. Samples that land
/// outside the input are zero and flagged invalid. When `input_valid` is
/// given, samples touching an invalid input pixel are flagged as well.
WarpResult warp_basis(const Image& image, const BasisCoefficients& coeffs, Point2 center,
                      const Mask* input_valid = nullptr);

/// Geometric center of the pixel grid, ((w-1)/2, (h-1)/2).
inline Point2 image_center(int width, int height) {
  return {(width - 1) * 0.5, (height - 1) * 0.5};
}

}  // namespace dff
