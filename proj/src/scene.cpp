#include "dff/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace dff {
namespace {

// Bilinearly interpolated lattice of uniform values with the given cell size.
class ValueNoise {
 public:
  ValueNoise(int width, int height, double cell, std::mt19937_64& rng) : cell_(cell) {
    gw_ = static_cast<int>(std::ceil(width / cell)) + 2;
    gh_ = static_cast<int>(std::ceil(height / cell)) + 2;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    grid_.resize(static_cast<std::size_t>(gw_) * gh_);
    for (double& v : grid_) v = u(rng);
  }

  double operator()(double x, double y) const {
    const double gx = x / cell_;
    const double gy = y / cell_;
    const int x0 = static_cast<int>(gx);
    const int y0 = static_cast<int>(gy);
    const double fx = gx - x0;
    const double fy = gy - y0;
    auto g = [&](int i, int j) { return grid_[static_cast<std::size_t>(j) * gw_ + i]; };
    return (1 - fy) * ((1 - fx) * g(x0, y0) + fx * g(x0 + 1, y0)) + fy * ((1 - fx) * g(x0, y0 + 1) + fx * g(x0 + 1, y0 + 1));
  }

 private:
  double cell_;
  int gw_ = 0;
  int gh_ = 0;
  std::vector<double> grid_;
};

// Fills `img` with a three-octave texture (cells of 3, 7 and 16 px).
void paint_texture(Image& img, std::mt19937_64& rng, double lo, double hi) {
  const int w = img.width();
  const int h = img.height();
  for (int c = 0; c < 3; ++c) {
    const ValueNoise fine(w, h, 3.0, rng);
    const ValueNoise mid(w, h, 7.0, rng);
    const ValueNoise coarse(w, h, 16.0, rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = 0.45 * fine(x, y) + 0.35 * mid(x, y) + 0.2 * coarse(x, y);
        img.at(x, y, c) = static_cast<float>(std::clamp(0.5 * (lo + hi) + 0.5 * (hi - lo) * v, 0.0, 1.0));
      }
    }
  }
}

}  // namespace

Scene textured_scene(const SceneParams& p) {
  if (p.width < 16 || p.height < 16) throw DataError("scene must be at least 16x16");
  if (!(p.background_near_mm > 0.0) || !(p.background_far_mm > 0.0) || !(p.occluder_mm > 0.0)) {
    throw DataError("scene depths must be positive");
  }
  std::mt19937_64 rng(p.seed);
  Scene s{Image(p.width, p.height, 3), Image(p.width, p.height, 1)};
  paint_texture(s.rgb, rng, 0.1, 0.9);
  Image occ(p.width, p.height, 3);
  paint_texture(occ, rng, 0.05, 0.95);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int ow = static_cast<int>(p.width * (0.25 + 0.15 * u(rng)));
  const int oh = static_cast<int>(p.height * (0.25 + 0.15 * u(rng)));
  const int ox = static_cast<int>((p.width - ow) * (0.15 + 0.7 * u(rng)));
  const int oy = static_cast<int>((p.height - oh) * (0.15 + 0.7 * u(rng)));

  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double t = p.width > 1 ? static_cast<double>(x) / (p.width - 1) : 0.0;
      double depth = p.background_near_mm + t * (p.background_far_mm - p.background_near_mm);
      if (x >= ox && x < ox + ow && y >= oy && y < oy + oh) {
        depth = p.occluder_mm;
        for (int c = 0; c < 3; ++c) s.rgb.at(x, y, c) = occ.at(x, y, c);
      }
      s.depth_mm.at(x, y) = static_cast<float>(depth);
    }
  }
  return s;
}

Scene circle_pattern_scene(int width, int height, double depth_mm, int rows, int cols, double radius_px,
                           double margin_px) {
  if (rows < 1 || cols < 1 || rows * cols < 3) throw DataError("pattern needs at least three circles");
  if (!(radius_px > 0.0) || !(depth_mm > 0.0)) throw DataError("invalid circle pattern parameters");
  const double span_x = width - 1 - 2.0 * margin_px;
  const double span_y = height - 1 - 2.0 * margin_px;
  if (span_x <= 0.0 || span_y <= 0.0) throw DataError("circle pattern margin exceeds the image");
  Scene s{Image(width, height, 3, 1.0f), Image(width, height, 1, static_cast<float>(depth_mm))};
  constexpr int kSub = 4;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double cx = margin_px + (cols > 1 ? span_x * c / (cols - 1) : 0.5 * span_x);
      const double cy = margin_px + (rows > 1 ? span_y * r / (rows - 1) : 0.5 * span_y);
      const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius_px - 1)));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + radius_px + 1)));
      const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius_px - 1)));
      const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + radius_px + 1)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          int inside = 0;
          for (int sy = 0; sy < kSub; ++sy) {
            for (int sx = 0; sx < kSub; ++sx) {
              const double px = x - 0.5 + (sx + 0.5) / kSub;
              const double py = y - 0.5 + (sy + 0.5) / kSub;
              if ((px - cx) * (px - cx) + (py - cy) * (py - cy) <= radius_px * radius_px) ++inside;
            }
          }
          const float v = 1.0f - static_cast<float>(inside) / (kSub * kSub);
          for (int ch = 0; ch < 3; ++ch) s.rgb.at(x, y, ch) = std::min(s.rgb.at(x, y, ch), v);
        }
      }
    }
  }
  return s;
}

CameraConfig preset_camera(int width, int height, int slices, double near_mm, double far_mm) {
  if (slices < 1) throw DataError("camera preset needs at least one slice");
  std::vector<double> schedule;
  for (int i = 0; i < slices; ++i) {
    const double t = slices > 1 ? static_cast<double>(i) / (slices - 1) : 0.0;
    schedule.push_back(far_mm + t * (near_mm - far_mm));
  }
  return CameraConfig(25.0, 6.4 * width / 256.0, 4.0, 500.0, width, height, std::move(schedule));
}

}  // namespace dff
