#pragma once

#include "varireal/guidance.hpp"

#include <array>

namespace varireal {

// Colour of the image border (per-channel median of the outermost ring).
std::array<std::uint8_t, 3> border_color(const Image& image);

// Pixels whose max channel difference from the border colour exceeds
// `tolerance`. Works for toy images: one object on a plain backdrop.
Mask contrast_region(const Image& image, int tolerance);

class BorderContrastDetector : public DetectorBackend {
 public:
  explicit BorderContrastDetector(int tolerance = 24) : tolerance_(tolerance) {}
  std::optional<Bbox> detect(const Image& image, const std::string& class_name) override;

 private:
  int tolerance_;
};

class ContrastSegmenter : public SegmenterBackend {
 public:
  explicit ContrastSegmenter(int tolerance = 24) : tolerance_(tolerance) {}
  SoftMask segment(const Image& image, const Bbox& box) override;

 private:
  int tolerance_;
};

// Constant soft value inside the box, zero outside.
class BoxSegmenter : public SegmenterBackend {
 public:
  explicit BoxSegmenter(float inside = 0.9f) : inside_(inside) {}
  SoftMask segment(const Image& image, const Bbox& box) override;

 private:
  float inside_;
};

class FixedDetector : public DetectorBackend {
 public:
  explicit FixedDetector(std::optional<Bbox> box) : box_(box) {}
  std::optional<Bbox> detect(const Image&, const std::string&) override { return box_; }

 private:
  std::optional<Bbox> box_;
};

class ConstantMatting : public MattingBackend {
 public:
  explicit ConstantMatting(float value) : value_(value) {}
  SoftMask matte(const Image& image) override { return SoftMask(image.width, image.height, value_); }

 private:
  float value_;
};

class ContrastMatting : public MattingBackend {
 public:
  explicit ContrastMatting(int tolerance = 24) : tolerance_(tolerance) {}
  SoftMask matte(const Image& image) override;

 private:
  int tolerance_;
};

}  // namespace varireal
