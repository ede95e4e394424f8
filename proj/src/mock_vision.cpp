#include "varireal/mock_vision.hpp"

#include <algorithm>
#include <cstdlib>
#include <vector>

namespace varireal {

std::array<std::uint8_t, 3> border_color(const Image& image) {
  std::array<std::uint8_t, 3> out{0, 0, 0};
  if (image.empty()) return out;
  for (int c = 0; c < 3; ++c) {
    const int ch = std::min(c, image.channels - 1);
    std::vector<std::uint8_t> ring;
    for (int x = 0; x < image.width; ++x) {
      ring.push_back(image.at(x, 0, ch));
      ring.push_back(image.at(x, image.height - 1, ch));
    }
    for (int y = 1; y + 1 < image.height; ++y) {
      ring.push_back(image.at(0, y, ch));
      ring.push_back(image.at(image.width - 1, y, ch));
    }
    std::nth_element(ring.begin(), ring.begin() + ring.size() / 2, ring.end());
    out[c] = ring[ring.size() / 2];
  }
  return out;
}

Mask contrast_region(const Image& image, int tolerance) {
  Mask out(image.width, image.height);
  const auto bg = border_color(image);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      int diff = 0;
      for (int c = 0; c < image.channels; ++c) diff = std::max(diff, std::abs(image.at(x, y, c) - bg[c]));
      out.at(x, y) = diff > tolerance;
    }
  }
  return out;
}

std::optional<Bbox> BorderContrastDetector::detect(const Image& image, const std::string&) {
  const Mask region = contrast_region(image, tolerance_);
  Bbox box{image.width, image.height, 0, 0, 0.0};
  std::size_t n = 0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (!region.at(x, y)) continue;
      ++n;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  }
  if (n == 0) return std::nullopt;
  // Fill ratio of the box doubles as a confidence score.
  const double area = static_cast<double>(box.x1 - box.x0) * (box.y1 - box.y0);
  box.confidence = std::min(1.0, 0.3 + static_cast<double>(n) / area);
  return box;
}

SoftMask ContrastSegmenter::segment(const Image& image, const Bbox& box) {
  const Mask region = contrast_region(image, tolerance_);
  SoftMask out(image.width, image.height);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) out.at(x, y) = region.at(x, y) ? 0.95f : 0.05f;
  return out;
}

SoftMask BoxSegmenter::segment(const Image& image, const Bbox& box) {
  SoftMask out(image.width, image.height);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) out.at(x, y) = inside_;
  return out;
}

SoftMask ContrastMatting::matte(const Image& image) {
  const Mask region = contrast_region(image, tolerance_);
  SoftMask out(image.width, image.height);
  for (std::size_t i = 0; i < region.bits.size(); ++i) out.values[i] = region.bits[i] ? 0.8f : 0.1f;
  return out;
}

}  // namespace varireal
