#include "varireal/raster.hpp"

#include "varireal/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace varireal {

std::size_t BinaryRaster::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

Image to_gray(const Image& rgb) {
  if (rgb.channels == 1) return rgb;
  Image out(rgb.width, rgb.height, 1);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const auto* p = &rgb.data[i * 3];
    out.data[i] = static_cast<std::uint8_t>((77 * p[0] + 150 * p[1] + 29 * p[2] + 128) >> 8);
  }
  return out;
}

Image resize_bilinear(const Image& src, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(Errc::invalid_argument, "resize target must be positive");
  if (src.width == width && src.height == height) return src;
  Image out(width, height, src.channels);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
        const double bottom = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bottom * wy));
      }
    }
  }
  return out;
}

Mask resize_nearest(const Mask& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  Mask out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * src.height / height), src.height - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * src.width / width), src.width - 1);
      out.at(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Image pad_reflect(const Image& src, int width, int height) {
  if (width < src.width || height < src.height) throw Error(Errc::invalid_argument, "pad target smaller than source");
  Image out(width, height, src.channels);
  for (int y = 0; y < height; ++y) {
    const int sy = reflect_index(y, src.height);
    for (int x = 0; x < width; ++x) {
      const int sx = reflect_index(x, src.width);
      for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  return out;
}

Mask pad_zero(const Mask& src, int width, int height) {
  Mask out(width, height);
  for (int y = 0; y < src.height; ++y)
    std::copy_n(&src.bits[static_cast<std::size_t>(y) * src.width], src.width,
                &out.bits[static_cast<std::size_t>(y) * width]);
  return out;
}

Image crop(const Image& src, int width, int height) {
  if (width > src.width || height > src.height) throw Error(Errc::invalid_argument, "crop larger than source");
  Image out(width, height, src.channels);
  const std::size_t row = static_cast<std::size_t>(width) * src.channels;
  for (int y = 0; y < height; ++y)
    std::copy_n(&src.data[static_cast<std::size_t>(y) * src.width * src.channels], row, &out.data[y * row]);
  return out;
}

WorkingFrame WorkingFrame::for_size(int width, int height, int long_side, int multiple) {
  if (width <= 0 || height <= 0 || long_side <= 0 || multiple <= 0)
    throw Error(Errc::invalid_argument, "working frame needs positive sizes");
  WorkingFrame f;
  f.original_width = width;
  f.original_height = height;
  const double scale = static_cast<double>(long_side) / std::max(width, height);
  f.scaled_width = std::max(1, static_cast<int>(std::lround(width * scale)));
  f.scaled_height = std::max(1, static_cast<int>(std::lround(height * scale)));
  f.padded_width = (f.scaled_width + multiple - 1) / multiple * multiple;
  f.padded_height = (f.scaled_height + multiple - 1) / multiple * multiple;
  return f;
}

Image WorkingFrame::to_working(const Image& original) const {
  return pad_reflect(resize_bilinear(original, scaled_width, scaled_height), padded_width, padded_height);
}

Mask WorkingFrame::to_working(const Mask& original) const {
  return pad_zero(resize_nearest(original, scaled_width, scaled_height), padded_width, padded_height);
}

Image WorkingFrame::to_original(const Image& working) const {
  if (working.width != padded_width || working.height != padded_height)
    throw Error(Errc::dimension_mismatch, "raster does not match the working frame");
  return resize_bilinear(crop(working, scaled_width, scaled_height), original_width, original_height);
}

}  // namespace varireal
