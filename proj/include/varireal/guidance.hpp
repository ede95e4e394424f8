#pragma once

#include "varireal/raster.hpp"

#include <optional>
#include <string>

namespace varireal {

struct Bbox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)
  double confidence = 0.0;

  bool valid_for(int width, int height) const {
    return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1 && x1 <= width && y1 <= height;
  }
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::optional<Bbox> detect(const Image& image, const std::string& class_name) = 0;
};

class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual SoftMask segment(const Image& image, const Bbox& box) = 0;
};

class MattingBackend {
 public:
  virtual ~MattingBackend() = default;
  virtual SoftMask matte(const Image& image) = 0;
};

Mask binarize(const SoftMask& soft, float threshold = 0.5f);

// Square structuring element of side 2*factor_px+1.
Mask dilate_mask(const Mask& mask, int factor_px);
Mask invert_mask(const Mask& mask);

// Edge detector on an 8-bit single-channel image: 3x3 Sobel, L1 magnitude,
// non-maximum suppression and 8-connected hysteresis. Thresholds are on the
// 8-bit gradient scale.
CannyMap canny(const Image& gray, double low_thresh, double high_thresh);

CannyMap canny_from_foreground(const Image& image, const Mask& mask, double low_thresh = 100,
                               double high_thresh = 200);

struct ForegroundOptions {
  float threshold = 0.5f;
  double min_confidence = 0.3;
};

enum class MaskSource { segmenter, matting };

struct ForegroundResult {
  Mask mask;
  MaskSource source = MaskSource::segmenter;
};

// Detector box -> segmenter; on a miss, a low-confidence box or an empty
// segmentation, fall back to matting. Raises empty_mask if nothing survives.
ForegroundResult foreground_mask(const Image& image, const std::string& class_name, DetectorBackend& detector,
                                 SegmenterBackend& segmenter, MattingBackend& matting,
                                 const ForegroundOptions& options = {});

}  // namespace varireal
