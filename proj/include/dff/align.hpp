#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dff/basis.hpp"
#include "dff/image.hpp"
#include "dff/simulator.hpp"

namespace dff {

/// rho(r) = (|r| + epsilon)^q.
struct RobustLossParams {
  double q = 0.4;
  double epsilon = 0.01;
};

void validate(const RobustLossParams& params);

inline double robust_rho(double r, const RobustLossParams& p) {
  return std::pow(std::abs(r) + p.epsilon, p.q);
}

/// Mean of rho over the valid pixels of a single-channel residual image.
double robust_loss(const Image& residuals, const Mask& valid, const RobustLossParams& params);

enum class SolveStatus {
  kConverged,
  kMaxIterations,
  kDegenerate,  // no usable texture: the normal matrix is singular
  kDiverged,    // |alpha| left the sanity bound
};

const char* to_string(SolveStatus status);

struct LossSample {
  int level = 0;  // pyramid level, 0 = full resolution
  int iteration = 0;
  double loss = 0.0;
};

struct SolveOptions {
  RobustLossParams loss;
  int levels = 3;
  int max_iterations = 50;
  double step_tolerance = 1e-6;  // pixels at the current level
  double max_condition = 1e8;    // above this alpha is frozen
};

struct SliceSolution {
  BasisCoefficients coefficients;  // full-resolution units
  SolveStatus status = SolveStatus::kConverged;
  bool alpha_frozen = false;
  double final_loss = 0.0;
  std::vector<LossSample> trace;  // initial loss per level, then each accepted step

  bool converged() const { return status == SolveStatus::kConverged; }
};

/// Gaussian pyramid (5x5, sigma 1, factor-2 decimation). Level 0 is the
/// input. Pixel i at level L+1 sits at pixel 2i of level L.
std::vector<Image> gaussian_pyramid(const Image& gray, int levels);
std::vector<Mask> mask_pyramid(const Mask& mask, int levels);

/// Finds coefficients c minimizing the mean robust loss of
/// reference(p + D_c(p)) - target(p) over pixels valid in both, coarse to
/// fine, by damped Gauss-Newton with IRLS weights. `initial` seeds the
/// search (full-resolution units). The radial center is the reference
/// slice's principal point, or the image center when that is not finite.
///
/// Throws DataError when the valid regions do not overlap.
SliceSolution solve_slice(const FocalSlice& reference, const FocalSlice& target,
                          const SolveOptions& options = {}, const BasisCoefficients& initial = {});

/// Warps every non-target slice by alpha = relative_fov - 1 about its
/// principal point and resets relative_fov to 1. Already-aligned slices are
/// left untouched.
FocalStack initial_fov_align(const FocalStack& stack);

struct AlignResult {
  std::vector<BasisCoefficients> coefficients;  // residual after FoV alignment
  std::vector<BasisCoefficients> total;         // FoV correction composed with residual
  std::vector<double> final_loss;
  std::vector<bool> converged;
  std::vector<SolveStatus> status;
  std::vector<std::vector<LossSample>> traces;
};

struct AlignedStack {
  FocalStack stack;
  AlignResult result;
};

/// FoV-initialized alignment of every slice to the target slice. Each slice
/// is resampled once with the composed warp.
AlignedStack align_stack(const FocalStack& stack, const SolveOptions& options = {});

/// Per slice: index alpha beta gamma final_loss converged.
std::string format_align_report(const AlignResult& result);

}  // namespace dff
