#include "dff/basis.hpp"

#include <algorithm>
#include <cmath>

namespace dff {

bool is_finite(const BasisCoefficients& c) {
  return std::isfinite(c.alpha) && std::isfinite(c.beta) && std::isfinite(c.gamma);
}

Point2 apply_flow(const BasisCoefficients& c, Point2 center, Point2 p) {
  return {p.x + c.alpha * (p.x - center.x) + c.beta, p.y + c.alpha * (p.y - center.y) + c.gamma};
}

BasisCoefficients compose(const BasisCoefficients& first, const BasisCoefficients& second) {
  // M(p) = c + s (p - c) + t;  M1(M2(p)) = c + s1 s2 (p - c) + s1 t2 + t1.
  const double s1 = 1.0 + first.alpha;
  const double s2 = 1.0 + second.alpha;
  return {s1 * s2 - 1.0, s1 * second.beta + first.beta, s1 * second.gamma + first.gamma};
}

BasisCoefficients inverse(const BasisCoefficients& c) {
  const double s = 1.0 + c.alpha;
  if (s == 0.0) throw NumericalError("basis warp is not invertible");
  return {1.0 / s - 1.0, -c.beta / s, -c.gamma / s};
}

double mean_endpoint_error(const BasisCoefficients& a, const BasisCoefficients& b, Point2 center,
                           int width, int height) {
  double sum = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point2 pa = apply_flow(a, center, {double(x), double(y)});
      const Point2 pb = apply_flow(b, center, {double(x), double(y)});
      sum += std::hypot(pa.x - pb.x, pa.y - pb.y);
    }
  }
  return sum / (static_cast<double>(width) * height);
}

WarpResult warp_basis(const Image& image, const BasisCoefficients& coeffs, Point2 center,
                      const Mask* input_valid) {
  if (!is_finite(coeffs)) throw NumericalError("non-finite warp coefficients");
  const int w = image.width();
  const int h = image.height();
  WarpResult out{Image(w, h, image.channels()), Mask(w, h, false)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Point2 src = apply_flow(coeffs, center, {double(x), double(y)});
      float v = 0.0f;
      if (!sample_bilinear(image, src.x, src.y, 0, v)) continue;
      if (input_valid) {
        const int x0 = static_cast<int>(std::floor(src.x));
        const int y0 = static_cast<int>(std::floor(src.y));
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        if (!((*input_valid)(x0, y0) && (*input_valid)(x1, y0) && (*input_valid)(x0, y1) &&
              (*input_valid)(x1, y1))) {
          continue;
        }
      }
      out.valid.set(x, y, true);
      out.image.at(x, y, 0) = v;
      for (int c = 1; c < image.channels(); ++c) {
        sample_bilinear(image, src.x, src.y, c, out.image.at(x, y, c));
      }
    }
  }
  return out;
}

}  // namespace dff
