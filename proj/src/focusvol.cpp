#include "dff/focusvol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dff/parallel.hpp"

namespace dff {
namespace {

std::vector<std::pair<int, int>> ring_offsets(int radius) {
  std::vector<std::pair<int, int>> out;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (std::lround(std::sqrt(double(dx * dx + dy * dy))) == radius) out.emplace_back(dx, dy);
    }
  }
  return out;
}

Image box_mean(const Image& img, int radius) {
  const int w = img.width();
  const int h = img.height();
  const double norm = 1.0 / (2 * radius + 1);
  Image tmp(w, h, 1);
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) s += img.clamped(x + d, y);
      tmp.at(x, y) = static_cast<float>(s * norm);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) s += tmp.clamped(x, y + d);
      out.at(x, y) = static_cast<float>(s * norm);
    }
  }
  return out;
}

void check_volume(const FocusVolume& v) {
  if (v.scores.empty()) throw DataError("empty focus volume");
  if (v.focus_distances_mm.size() != v.scores.size()) throw DataError("focus distances do not match volume");
}

}  // namespace

Image focus_measure_image(const Image& img, FocusMeasure method, int radius) {
  if (radius < 1) throw DataError("focus measure radius must be at least 1");
  const int support = 2 * radius + 1;
  if (img.width() < 2 * support - 1 || img.height() < 2 * support - 1) {
    throw DataError("image smaller than the focus measure support");
  }
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  Image raw(w, h, 1);
  const auto ring = ring_offsets(radius);
  const double ring_norm = 1.0 / static_cast<double>(ring.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int c = 0; c < ch; ++c) {
        const double center = img.at(x, y, c);
        if (method == FocusMeasure::kRingDifference) {
          double mean = 0.0;
          for (auto [dx, dy] : ring) mean += img.clamped(x + dx, y + dy, c);
          s += std::abs(center - mean * ring_norm);
        } else {
          s += std::abs(2.0 * center - img.clamped(x - radius, y, c) - img.clamped(x + radius, y, c)) +
               std::abs(2.0 * center - img.clamped(x, y - radius, c) - img.clamped(x, y + radius, c));
        }
      }
      raw.at(x, y) = static_cast<float>(s);
    }
  }
  return box_mean(raw, radius);
}

FocusVolume focus_measure(const FocalStack& stack, FocusMeasure method, int radius) {
  validate_stack(stack);
  FocusVolume vol;
  vol.width = stack.width();
  vol.height = stack.height();
  vol.scores.resize(stack.size());
  vol.valid = Mask(vol.width, vol.height, true);
  for (const auto& s : stack.slices) {
    vol.focus_distances_mm.push_back(s.focus_distance_mm);
    vol.valid = vol.valid & s.valid;
  }
  parallel_for(stack.size(), [&](std::size_t n) {
    vol.scores[n] = focus_measure_image(stack.slices[n].pixels, method, radius);
  });
  vol.valid = erode(vol.valid, 2 * radius);
  return vol;
}

FocusVolume standardize(const FocusVolume& volume) {
  check_volume(volume);
  FocusVolume out = volume;
  const std::size_t n = volume.slices();
  for (int y = 0; y < volume.height; ++y) {
    for (int x = 0; x < volume.width; ++x) {
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) mean += volume.score(k, x, y);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double d = volume.score(k, x, y) - mean;
        var += d * d;
      }
      const double sd = std::sqrt(var / static_cast<double>(n));
      for (std::size_t k = 0; k < n; ++k) {
        out.scores[k].at(x, y) = sd > 1e-12 ? static_cast<float>((volume.score(k, x, y) - mean) / sd) : 0.0f;
      }
    }
  }
  return out;
}

std::vector<double> slice_probabilities(const FocusVolume& volume, int x, int y, double temperature) {
  const std::size_t n = volume.slices();
  std::vector<double> p(n, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = volume.score(k, x, y);
    if (!std::isfinite(s)) continue;
    p[k] = softplus(temperature * s);
    total += p[k];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(p.begin(), p.end(), std::numeric_limits<double>::quiet_NaN());
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

DepthMap regress_depth(const FocusVolume& volume, const RegressOptions& options) {
  check_volume(volume);
  const std::size_t n = volume.slices();
  if (n < 2) throw DataError("depth regression needs at least two slices");
  if (!std::isfinite(options.temperature) || options.temperature <= 0.0) {
    throw DataError("temperature must be positive");
  }
  const auto [lo_it, hi_it] = std::minmax_element(volume.focus_distances_mm.begin(), volume.focus_distances_mm.end());
  const double f_lo = *lo_it;
  const double f_hi = *hi_it;
  DepthMap out{Image(volume.width, volume.height, 1), Image(volume.width, volume.height, 1),
               Mask(volume.width, volume.height, false)};
  for (int y = 0; y < volume.height; ++y) {
    for (int x = 0; x < volume.width; ++x) {
      if (!volume.valid(x, y)) continue;
      const auto p = slice_probabilities(volume, x, y, options.temperature);
      if (std::isnan(p.front())) continue;
      double expect = 0.0;
      double p_max = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double f = volume.focus_distances_mm[k];
        expect += p[k] * (options.inverse_depth ? 1.0 / f : f);
        p_max = std::max(p_max, p[k]);
      }
      const double depth = options.inverse_depth ? 1.0 / expect : expect;
      const double uniform = 1.0 / static_cast<double>(n);
      out.depth_mm.at(x, y) = static_cast<float>(std::clamp(depth, f_lo, f_hi));
      out.confidence.at(x, y) = static_cast<float>(std::clamp((p_max - uniform) / (1.0 - uniform), 0.0, 1.0));
      out.valid.set(x, y, true);
    }
  }
  return out;
}

namespace {
std::size_t argmax_slice(const FocusVolume& volume, int x, int y) {
  std::size_t best = 0;
  float best_score = -std::numeric_limits<float>::infinity();
  for (std::size_t k = 0; k < volume.slices(); ++k) {
    const float s = volume.score(k, x, y);
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}
}  // namespace

DepthMap winner_take_all(const FocusVolume& volume) {
  check_volume(volume);
  DepthMap out{Image(volume.width, volume.height, 1), Image(volume.width, volume.height, 1),
               Mask(volume.width, volume.height, false)};
  for (int y = 0; y < volume.height; ++y) {
    for (int x = 0; x < volume.width; ++x) {
      if (!volume.valid(x, y)) continue;
      out.depth_mm.at(x, y) = static_cast<float>(volume.focus_distances_mm[argmax_slice(volume, x, y)]);
      out.confidence.at(x, y) = 1.0f;
      out.valid.set(x, y, true);
    }
  }
  return out;
}

Image all_in_focus(const FocalStack& stack, const FocusVolume& volume) {
  validate_stack(stack);
  check_volume(volume);
  if (volume.slices() != stack.size() || volume.width != stack.width() || volume.height != stack.height()) {
    throw DataError("focus volume does not match the stack");
  }
  Image out(stack.width(), stack.height(), stack.slices.front().pixels.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const auto& src = stack.slices[argmax_slice(volume, x, y)].pixels;
      for (int c = 0; c < out.channels(); ++c) out.at(x, y, c) = src.at(x, y, c);
    }
  }
  return out;
}

}  // namespace dff
