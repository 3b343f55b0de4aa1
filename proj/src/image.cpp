#include "dff/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dff {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw DataError("image dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

float Image::clamped(int x, int y, int c) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y, c);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask operator&(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DataError("mask size mismatch");
  }
  Mask out(a.width(), a.height(), false);
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    out.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  }
  return out;
}

Image to_gray(const Image& rgb) {
  if (rgb.channels() == 1) return rgb;
  if (rgb.channels() < 3) throw DataError("to_gray expects 1 or 3 channels");
  Image out(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      out.at(x, y) = 0.299f * rgb.at(x, y, 0) + 0.587f * rgb.at(x, y, 1) + 0.114f * rgb.at(x, y, 2);
    }
  }
  return out;
}

bool sample_bilinear(const Image& img, double x, double y, int c, float& out) {
  const int w = img.width();
  const int h = img.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return false;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  x0 = std::min(x0, w - 2 < 0 ? 0 : w - 2);
  y0 = std::min(y0, h - 2 < 0 ? 0 : h - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
  const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
  out = static_cast<float>((1.0 - fy) * top + fy * bottom);
  return true;
}

Mask erode(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  // Separable min filter; outside the image counts as invalid.
  Mask rows(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool ok = x - radius >= 0 && x + radius < w;
      for (int dx = -radius; ok && dx <= radius; ++dx) ok = mask(x + dx, y);
      rows.set(x, y, ok);
    }
  }
  Mask out(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool ok = y - radius >= 0 && y + radius < h;
      for (int dy = -radius; ok && dy <= radius; ++dy) ok = rows(x, y + dy);
      out.set(x, y, ok);
    }
  }
  return out;
}

double psnr(const Image& a, const Image& b, const Mask* mask) {
  if (!a.same_shape(b)) throw DataError("psnr: shape mismatch");
  double sse = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask && !(*mask)(x, y)) continue;
      for (int c = 0; c < a.channels(); ++c) {
        const double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        sse += d * d;
        ++n;
      }
    }
  }
  if (n == 0) throw DataError("psnr: empty mask");
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height()) {
    throw DataError("crop window outside image");
  }
  Image out(w, h, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    }
  }
  return out;
}

}  // namespace dff
