#include "varireal/guidance.hpp"

#include "varireal/error.hpp"

#include <spdlog/spdlog.h>

namespace varireal {

namespace {

void check_soft(const SoftMask& soft, const Image& image, const char* who) {
  if (!same_size(soft, image)) throw Error(Errc::dimension_mismatch, std::string(who) + " returned a mask of the wrong size");
}

}  // namespace

ForegroundResult foreground_mask(const Image& image, const std::string& class_name, DetectorBackend& detector,
                                 SegmenterBackend& segmenter, MattingBackend& matting,
                                 const ForegroundOptions& options) {
  if (image.empty()) throw Error(Errc::invalid_argument, "foreground_mask on an empty image");

  const auto box = detector.detect(image, class_name);
  if (box && box->confidence >= options.min_confidence && box->valid_for(image.width, image.height)) {
    const SoftMask soft = segmenter.segment(image, *box);
    check_soft(soft, image, "segmenter");
    Mask mask = binarize(soft, options.threshold);
    if (!mask.none()) return {std::move(mask), MaskSource::segmenter};
    spdlog::debug("segmenter produced an empty mask for '{}', trying matting", class_name);
  } else if (box) {
    spdlog::debug("detector box for '{}' rejected (confidence {:.2f})", class_name, box->confidence);
  }

  const SoftMask soft = matting.matte(image);
  check_soft(soft, image, "matting");
  Mask mask = binarize(soft, options.threshold);
  if (mask.none()) throw Error(Errc::empty_mask, "no backend produced a foreground for '" + class_name + "'");
  return {std::move(mask), MaskSource::matting};
}

}  // namespace varireal
