#pragma once

#include "varireal/raster.hpp"

#include <random>
#include <string>
#include <vector>

namespace varireal {

struct AugmentConfig {
  bool random_resized_crop = false;
  double crop_scale_min = 0.5;
  double crop_scale_max = 1.0;
  bool horizontal_flip = false;
  bool color_jitter = false;
  double jitter_probability = 0.8;
  double brightness = 0.4, contrast = 0.4, saturation = 0.4;
  bool grayscale = false;
  double grayscale_probability = 0.2;

  // Names: random_resized_crop, horizontal_flip, color_jitter, grayscale.
  static AugmentConfig from_names(const std::vector<std::string>& names);
};

// Output has the input's size; draws only from rng.
Image augment(const Image& image, const AugmentConfig& cfg, std::mt19937_64& rng);

}  // namespace varireal
