#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "dff/basis.hpp"
#include "dff/image.hpp"
#include "dff/optics.hpp"

namespace dff {

struct FocalSlice {
  Image pixels;  // H x W x C, values in [0, 1]
  Mask valid;
  double focus_distance_mm = 0.0;
  Point2 principal_point_px;
  int slice_index = 0;
  /// FoV of this slice relative to the narrowest slice; 1 once FoV-aligned.
  double relative_fov = 1.0;
};

struct FocalStack {
  std::vector<FocalSlice> slices;
  CameraConfig config;
  std::size_t target_index = 0;

  int width() const { return slices.empty() ? 0 : slices.front().pixels.width(); }
  int height() const { return slices.empty() ? 0 : slices.front().pixels.height(); }
  std::size_t size() const { return slices.size(); }
};

/// Checks that all slices share dimensions and that target_index is in range.
void validate_stack(const FocalStack& stack);

/// Uniform intrinsic-error ranges sampled per slice.
struct ErrorModel {
  std::pair<double, double> scale_err_range{-0.005, 0.005};
  std::pair<double, double> translation_err_range_px{-2.0, 2.0};
  std::uint64_t seed = 0;
};

enum class PsfShape { kDisc, kGaussian };

struct RenderOptions {
  int layers = 32;
  PsfShape psf = PsfShape::kDisc;
};

/// Normalized blur kernel of the given diameter as a dense (2r+1)^2 grid.
/// Diameters below one pixel give the identity kernel.
struct BlurKernel {
  int radius = 0;
  std::vector<double> weights;  // row-major, (2 * radius + 1)^2

  double at(int dx, int dy) const {
    return weights[static_cast<std::size_t>(dy + radius) * (2 * radius + 1) + (dx + radius)];
  }
};

BlurKernel make_blur_kernel(double diameter_px, PsfShape shape = PsfShape::kDisc);

/// Zero-padded convolution with a normalized kernel.
Image blur(const Image& img, const BlurKernel& kernel);

/// Layered thin-lens defocus rendering of an all-in-focus image for one slice.
/// Depth (mm) is binned into `options.layers` bins uniform in inverse depth;
/// each bin is blurred with the kernel of its mean depth and composited back
/// to front with its blurred coverage.
FocalSlice render_slice(const Image& rgb, const Image& depth_mm, const CameraConfig& config,
                        std::size_t slice_index, const RenderOptions& options = {});

struct SimulatedStack {
  FocalStack stack;
  /// Residual warp that aligns each FoV-aligned slice to the target; this is
  /// the injected intrinsic error and what the aligner should recover.
  std::vector<BasisCoefficients> residual_truth;
  /// Full alignment warp (FoV correction followed by residual) per slice.
  std::vector<BasisCoefficients> total_truth;
};

/// Renders every slice, then applies focal breathing and, when an error model
/// is given, a sampled intrinsic error. Per-slice randomness is derived from
/// (seed, slice index) only.
SimulatedStack render_stack(const Image& rgb, const Image& depth_mm, const CameraConfig& config,
                            const std::optional<ErrorModel>& error_model,
                            const RenderOptions& options = {});

/// Error coefficients drawn for one slice.
BasisCoefficients sample_error(const ErrorModel& model, std::size_t slice_index);

/// On-disk stack: slice_%03d.{png,pfm}, optional mask_%03d.png,
/// metadata.txt and camera.txt.
enum class SliceFormat { kPng, kPfm };
void save_stack(const FocalStack& stack, const std::filesystem::path& dir, SliceFormat format);
FocalStack load_stack(const std::filesystem::path& dir);

}  // namespace dff
