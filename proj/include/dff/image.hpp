#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dff {

/// Thrown when input data is malformed (bad files, mismatched sizes,
/// invalid metadata). The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a numerical procedure fails (divergence, degenerate systems,
/// failed self checks). The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved, row-major float image. Pixel centers sit at integer
/// coordinates; (0, 0) is the top-left pixel.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  /// Clamp-to-edge access.
  float clamped(int x, int y, int c = 0) const;

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Per-pixel validity flags (1 = valid).
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = true)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;
  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

Mask operator&(const Mask& a, const Mask& b);

/// Luma with 0.299 / 0.587 / 0.114 weights; single-channel input is copied.
Image to_gray(const Image& rgb);

/// Bilinear sample of channel c at a real position. Returns false when the
/// position falls outside [0, w-1] x [0, h-1].
bool sample_bilinear(const Image& img, double x, double y, int c, float& out);

/// Shrinks the valid region by `radius` pixels (square structuring element).
Mask erode(const Mask& mask, int radius);

/// Peak signal-to-noise ratio for signals in [0, 1], restricted to `mask`
/// when given.
double psnr(const Image& a, const Image& b, const Mask* mask = nullptr);

/// Copies the window [x0, x0+w) x [y0, y0+h).
Image crop(const Image& img, int x0, int y0, int w, int h);

}  // namespace dff
