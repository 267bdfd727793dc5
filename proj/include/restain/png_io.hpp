#pragma once

#include <filesystem>

#include "restain/image.hpp"

namespace restain {

/// Reads an 8-bit RGB or RGBA PNG. RGBA alpha is discarded.
/// Throws Error on I/O failure or unsupported bit depth / colour type.
RgbImage load_png(const std::filesystem::path& path);

/// Writes a lossless 8-bit RGB PNG. load_png(save_png(img)) is identity
/// on pixel data.
void save_png(const RgbImage& img, const std::filesystem::path& path);

} // namespace restain
