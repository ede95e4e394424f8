#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace varireal {

// Interleaved 8-bit raster, row-major. channels is 1 or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c = 3, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return width == 0 || height == 0; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

// Per-pixel confidence in [0,1].
struct SoftMask {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  SoftMask() = default;
  SoftMask(int w, int h, float fill = 0.0f)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Strictly binary raster (values 0 or 1).
struct BinaryRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryRaster() = default;
  BinaryRaster(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool none() const { return count() == 0; }

  bool operator==(const BinaryRaster&) const = default;
};

struct Mask : BinaryRaster {
  using BinaryRaster::BinaryRaster;
};

struct CannyMap : BinaryRaster {
  using BinaryRaster::BinaryRaster;
};

template <typename A, typename B>
bool same_size(const A& a, const B& b) {
  return a.width == b.width && a.height == b.height;
}

Image to_gray(const Image& rgb);

Image resize_bilinear(const Image& src, int width, int height);
Mask resize_nearest(const Mask& src, int width, int height);

// Mirror padding (edge pixel not repeated) on the right and bottom.
Image pad_reflect(const Image& src, int width, int height);
Mask pad_zero(const Mask& src, int width, int height);
Image crop(const Image& src, int width, int height);

// Geometry of the backend working frame: long side scaled to `long_side`,
// aspect preserved, then padded up to a multiple of `multiple`.
struct WorkingFrame {
  int original_width = 0;
  int original_height = 0;
  int scaled_width = 0;
  int scaled_height = 0;
  int padded_width = 0;
  int padded_height = 0;

  static WorkingFrame for_size(int width, int height, int long_side, int multiple = 8);

  Image to_working(const Image& original) const;
  Mask to_working(const Mask& original) const;
  // Crop padding and resample back to the original resolution.
  Image to_original(const Image& working) const;
};

}  // namespace varireal
