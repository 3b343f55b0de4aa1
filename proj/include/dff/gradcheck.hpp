#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dff::nn {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t entries = 0;  // number of perturbed scalars
  bool passed() const { return max_rel_error < tolerance; }
};

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over all
/// entries of `param`, where numeric is the central difference of `loss`
/// with step h. `param` is restored on return.
double max_relative_error(std::vector<double>& param, const std::vector<double>& analytic,
                          const std::function<double()>& loss, double h = 1e-4, double floor = 1e-3);

/// Finite-difference checks of every backward pass in 64-bit precision on
/// small random volumes (weights uniform in [-0.5, 0.5), fixed seed), plus
/// the pyramid shape contract and naive/blocked kernel agreement.
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed = 20240607);

}  // namespace dff::nn
