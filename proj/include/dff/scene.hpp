#pragma once

#include <cstdint>

#include "dff/image.hpp"
#include "dff/optics.hpp"

namespace dff {

/// All-in-focus colour image with its per-pixel depth in mm.
struct Scene {
  Image rgb;       // 3 channels in [0, 1]
  Image depth_mm;  // 1 channel, positive
};

struct SceneParams {
  int width = 256;
  int height = 256;
  double background_near_mm = 420.0;  // depth at the left edge
  double background_far_mm = 620.0;   // depth at the right edge; equal = fronto-parallel
  double occluder_mm = 360.0;
  std::uint64_t seed = 1;
};

/// Multi-scale value-noise texture over a linear depth ramp, with a textured
/// rectangular occluder in front. Placement and texture derive from `seed`.
Scene textured_scene(const SceneParams& params);

/// Dark discs on a white plane at constant depth, on a regular grid whose
/// outermost discs stay `margin_px` away from the border.
Scene circle_pattern_scene(int width, int height, double depth_mm, int rows, int cols, double radius_px,
                           double margin_px);

/// 25 mm f/4 lens on a 6.4 mm wide sensor; `slices` focus distances evenly
/// spaced from near_mm to far_mm (far first, so index 0 has the widest view).
CameraConfig preset_camera(int width, int height, int slices, double near_mm = 300.0, double far_mm = 700.0);

}  // namespace dff
