#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "dff/image.hpp"

namespace dff::test {

inline Image random_image(int w, int h, int c, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Image img(w, h, c);
  for (float& v : img.data()) v = u(rng);
  return img;
}

// Smooth band-limited test pattern: a sum of a few oblique sinusoids.
inline Image smooth_pattern(int w, int h, int c = 1) {
  Image img(w, h, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const double v = 0.5 + 0.2 * std::sin(0.21 * x + 0.13 * y + ch) + 0.15 * std::cos(0.07 * x - 0.19 * y) +
                         0.1 * std::sin(0.33 * x * 0.5 + 0.29 * y + 2.0 * ch);
        img.at(x, y, ch) = static_cast<float>(v);
      }
    }
  }
  return img;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, double(std::abs(a.data()[i] - b.data()[i])));
  return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dfflab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dff::test
