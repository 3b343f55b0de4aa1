#pragma once

#include <filesystem>

#include "dff/image.hpp"

namespace dff {

/// Portable float map: "PF" (3 channels) or "Pf" (1 channel) header,
/// "<w> <h>", scale -1.0 (little-endian), rows stored bottom-up.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const Image& img, const std::filesystem::path& path);

/// 8-bit PNG (gray, RGB or RGBA in; gray or RGB out). Values are scaled to
/// [0, 1]; on write they are clamped and rounded.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

/// Dispatches on the file extension (.pfm or .png).
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

}  // namespace dff
