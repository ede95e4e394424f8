#pragma once

#include "varireal/raster.hpp"

#include <filesystem>
#include <string>

namespace varireal {

// Any format OpenCV decodes; returned as RGB (or 1 channel when `gray`).
Image load_image(const std::filesystem::path& path, bool gray = false);

// Lossless PNG, written to a temporary sibling and renamed into place.
void save_image(const Image& image, const std::filesystem::path& path);

// Binary rasters are stored as 0/255 single-channel PNG.
void save_binary(const BinaryRaster& raster, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);

std::string encode_png(const Image& image);

}  // namespace varireal
