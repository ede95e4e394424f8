#include "varireal/augment.hpp"

#include "varireal/error.hpp"

#include <algorithm>
#include <cmath>

namespace varireal {

AugmentConfig AugmentConfig::from_names(const std::vector<std::string>& names) {
  AugmentConfig cfg;
  for (const auto& n : names) {
    if (n == "random_resized_crop")
      cfg.random_resized_crop = true;
    else if (n == "horizontal_flip")
      cfg.horizontal_flip = true;
    else if (n == "color_jitter")
      cfg.color_jitter = true;
    else if (n == "grayscale")
      cfg.grayscale = true;
    else
      throw Error(Errc::config_error, "unknown augmentation '" + n + "'");
  }
  return cfg;
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Image resized_crop(const Image& img, const AugmentConfig& cfg, std::mt19937_64& rng) {
  const double area = static_cast<double>(img.width) * img.height;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * uniform(rng, cfg.crop_scale_min, cfg.crop_scale_max);
    const double log_ratio = uniform(rng, std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_ratio);
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w < 1 || h < 1 || w > img.width || h > img.height) continue;
    const int x0 = std::uniform_int_distribution<int>(0, img.width - w)(rng);
    const int y0 = std::uniform_int_distribution<int>(0, img.height - h)(rng);
    Image crop(w, h, img.channels);
    for (int y = 0; y < h; ++y)
      std::copy_n(&img.data[(static_cast<std::size_t>(y0 + y) * img.width + x0) * img.channels],
                  static_cast<std::size_t>(w) * img.channels, &crop.data[static_cast<std::size_t>(y) * w * img.channels]);
    return resize_bilinear(crop, img.width, img.height);
  }
  return img;
}

double gray_of(const Image& img, std::size_t i) {
  if (img.channels == 1) return img.data[i];
  const auto* p = &img.data[i * 3];
  return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
}

void jitter(Image& img, const AugmentConfig& cfg, std::mt19937_64& rng) {
  const double b = uniform(rng, std::max(0.0, 1 - cfg.brightness), 1 + cfg.brightness);
  const double c = uniform(rng, std::max(0.0, 1 - cfg.contrast), 1 + cfg.contrast);
  const double s = uniform(rng, std::max(0.0, 1 - cfg.saturation), 1 + cfg.saturation);
  std::vector<double> v(img.data.begin(), img.data.end());
  for (auto& x : v) x *= b;
  double mean = 0;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double g = img.channels == 1 ? v[i] : 0.299 * v[i * 3] + 0.587 * v[i * 3 + 1] + 0.114 * v[i * 3 + 2];
    mean += g;
  }
  mean /= static_cast<double>(img.pixel_count());
  for (auto& x : v) x = (x - mean) * c + mean;
  if (img.channels == 3)
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      const double g = 0.299 * v[i * 3] + 0.587 * v[i * 3 + 1] + 0.114 * v[i * 3 + 2];
      for (int k = 0; k < 3; ++k) v[i * 3 + k] = g + (v[i * 3 + k] - g) * s;
    }
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v[i]), 0L, 255L));
}

}  // namespace

Image augment(const Image& image, const AugmentConfig& cfg, std::mt19937_64& rng) {
  if (image.empty()) throw Error(Errc::invalid_argument, "cannot augment an empty image");
  Image out = cfg.random_resized_crop ? resized_crop(image, cfg, rng) : image;
  if (cfg.horizontal_flip && uniform(rng, 0, 1) < 0.5) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width / 2; ++x)
        for (int c = 0; c < out.channels; ++c) std::swap(out.at(x, y, c), out.at(out.width - 1 - x, y, c));
  }
  if (cfg.color_jitter && uniform(rng, 0, 1) < cfg.jitter_probability) jitter(out, cfg, rng);
  if (cfg.grayscale && out.channels == 3 && uniform(rng, 0, 1) < cfg.grayscale_probability) {
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
      const auto g = static_cast<std::uint8_t>(std::clamp(std::lround(gray_of(out, i)), 0L, 255L));
      for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = g;
    }
  }
  return out;
}

}  // namespace varireal
