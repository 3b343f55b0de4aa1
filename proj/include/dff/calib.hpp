#pragma once

#include <string>
#include <vector>

#include "dff/basis.hpp"
#include "dff/image.hpp"
#include "dff/simulator.hpp"

namespace dff {

struct CirclePattern {
  std::vector<Point2> centers_px;
};

/// Finds dark circles on a light background: Otsu threshold, 8-connected
/// components, area filter, then centroids weighted by (threshold - I).
/// Components touching the border or an invalid pixel are dropped. Centers
/// are ordered row by row (top to bottom), left to right within a row.
/// Throws DataError when fewer than three circles are found.
CirclePattern detect_circles(const Image& image, const Mask* valid = nullptr, int min_area_px = 21);

/// Otsu threshold of a single-channel image in [0, 1] (256 bins), computed
/// over valid pixels only when a mask is given.
double otsu_threshold(const Image& gray, const Mask* valid = nullptr);

struct BasisFit {
  BasisCoefficients coefficients;
  double residual_rms = 0.0;
};

/// Least-squares fit of dst_i - src_i = alpha * (src_i - center) + (beta, gamma).
/// Throws DataError on count mismatch, fewer than three points, or rank
/// deficiency (all points at the center).
BasisFit fit_basis(const std::vector<Point2>& src, const std::vector<Point2>& dst, Point2 center);

struct ParamStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
};

struct ErrorRanges {
  ParamStats alpha;
  ParamStats beta;
  ParamStats gamma;
  std::size_t samples = 0;
  std::size_t skipped_stacks = 0;
};

ParamStats summarize(const std::vector<double>& values);

/// Per FoV-aligned stack, fits every non-target slice's circle motion against
/// the target slice. Stacks whose detection or matching fails are skipped
/// (reported through `warnings` when given); if all are skipped, throws.
ErrorRanges estimate_ranges(const std::vector<FocalStack>& aligned_stacks,
                            std::vector<std::string>* warnings = nullptr);

/// Uniform error model spanning [min, max] of each parameter. Beta and gamma
/// share one translation range (their union).
ErrorModel to_error_model(const ErrorRanges& ranges, std::uint64_t seed);

std::string format_error_ranges(const ErrorRanges& ranges);
ErrorRanges parse_error_ranges(const std::string& text);

}  // namespace dff
