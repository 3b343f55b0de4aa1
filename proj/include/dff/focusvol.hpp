#pragma once

#include <cmath>
#include <vector>

#include "dff/image.hpp"
#include "dff/simulator.hpp"

namespace dff {

/// Per-pixel sharpness scores, one plane per focal slice.
struct FocusVolume {
  int width = 0;
  int height = 0;
  std::vector<Image> scores;  // N single-channel planes
  std::vector<double> focus_distances_mm;
  Mask valid;

  std::size_t slices() const { return scores.size(); }
  float score(std::size_t n, int x, int y) const { return scores[n].at(x, y); }
};

struct DepthMap {
  Image depth_mm;    // single channel
  Image confidence;  // single channel, [0, 1]
  Mask valid;
};

enum class FocusMeasure { kRingDifference, kModifiedLaplacian };

/// Raw sharpness of one image, summed over channels, then box-averaged
/// over a (2r+1)^2 window. Borders replicate edge pixels.
///
/// Ring difference: |I - mean of the ring of pixels at distance r|.
/// Modified Laplacian: |2I - I(x-r) - I(x+r)| + |2I - I(y-r) - I(y+r)|.
Image focus_measure_image(const Image& img, FocusMeasure method, int radius);

/// Builds the focus volume of an aligned stack. The valid mask is the
/// intersection of the slice masks, eroded by the measure's support.
FocusVolume focus_measure(const FocalStack& stack, FocusMeasure method, int radius);

/// Rescales every pixel's score profile across the stack to zero mean and
/// unit standard deviation (flat profiles become all zero). Classical
/// stand-in for learned aggregation: afterwards scores behave like logits.
FocusVolume standardize(const FocusVolume& volume);

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct RegressOptions {
  double temperature = 1.0;
  bool inverse_depth = false;  // expectation over 1/F instead of F
};

/// Per-pixel probabilities p_n = softplus(t s_n) / sum_k softplus(t s_k).
std::vector<double> slice_probabilities(const FocusVolume& volume, int x, int y, double temperature);

/// Depth as the expectation of the focus distances under the normalized
/// soft-plus probabilities. Confidence maps max_n p_n from [1/N, 1] onto
/// [0, 1]. Pixels whose scores are all non-finite are marked invalid.
DepthMap regress_depth(const FocusVolume& volume, const RegressOptions& options = {});

/// Focus distance of the highest-scoring slice; ties go to the lower index.
DepthMap winner_take_all(const FocusVolume& volume);

/// Copies each pixel from its highest-scoring slice.
Image all_in_focus(const FocalStack& stack, const FocusVolume& volume);

}  // namespace dff
