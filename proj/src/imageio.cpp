#include "dff/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace dff {
namespace {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

}  // namespace

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0) {
    throw DataError("bad PFM header: " + path.string());
  }
  in.get();  // single whitespace before the raster
  const int channels = magic == "PF" ? 3 : 1;
  const bool big_endian = scale > 0.0;
  Image img(w, h, channels);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(w) * channels);
  for (int r = 0; r < h; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!in) throw DataError("truncated PFM raster: " + path.string());
    const int y = h - 1 - r;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits = row[static_cast<std::size_t>(x) * channels + c];
        if (big_endian) bits = __builtin_bswap32(bits);
        img.at(x, y, c) = std::bit_cast<float>(bits);
      }
    }
  }
  return img;
}

void write_pfm(const Image& img, const std::filesystem::path& path) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw DataError("PFM supports 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << (img.channels() == 3 ? "PF" : "Pf") << '\n'
      << img.width() << ' ' << img.height() << '\n'
      << "-1.0\n";
  const std::size_t row_len = static_cast<std::size_t>(img.width()) * img.channels();
  for (int y = img.height() - 1; y >= 0; --y) {
    const float* row = img.data().data() + static_cast<std::size_t>(y) * row_len;
    out.write(reinterpret_cast<const char*>(row), static_cast<std::streamsize>(row_len * 4));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("bad PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  std::vector<png_byte> buf(static_cast<std::size_t>(w) * h * channels);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(w, h, channels);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data()[i] = buf[i] / 255.0f;
  return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  if (img.channels() != 1 && img.channels() != 3) throw DataError("PNG writer supports 1 or 3 channels");
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng init failed");
  }
  std::vector<png_byte> buf(img.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const float v = std::clamp(img.data()[i], 0.0f, 1.0f);
    buf[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  for (int y = 0; y < img.height(); ++y) png_write_row(png, buf.data() + y * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return read_png(path);
  throw DataError("unsupported image extension: " + path.string());
}

void write_image(const Image& img, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pfm") return write_pfm(img, path);
  if (ext == ".png") return write_png(img, path);
  throw DataError("unsupported image extension: " + path.string());
}

}  // namespace dff
