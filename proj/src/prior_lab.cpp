#include "varireal/prior_lab.hpp"

#include "varireal/guidance.hpp"
#include "varireal/hashing.hpp"
#include "varireal/prompt_forge.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace varireal {

Image ProceduralDiffusion::text_to_image(const std::string& prompt, std::uint32_t seed, int steps, int width,
                                         int height) {
  ++calls_;
  if (calls_ <= fail_first_) throw Error(Errc::backend_failure, "procedural diffusion: injected failure");
  if (width <= 0 || height <= 0 || steps < 1) throw Error(Errc::invalid_argument, "bad text_to_image request");

  // Palette from the prompt, layout from the seed.
  const std::uint64_t ph = stable_hash({prompt});
  std::mt19937_64 rng(mix64(ph ^ seed));
  const int grid = 4 + static_cast<int>(ph % 5);
  std::vector<float> lattice(static_cast<std::size_t>(grid + 1) * (grid + 1) * 3);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const float tint = static_cast<float>((ph >> (8 * (i % 3))) & 0xff);
    lattice[i] = 0.6f * tint + 0.4f * static_cast<float>(rng() % 256);
  }
  Image out(width, height, 3);
  for (int y = 0; y < height; ++y) {
    const float gy = static_cast<float>(y) * grid / height;
    const int y0 = static_cast<int>(gy);
    const float wy = gy - y0;
    for (int x = 0; x < width; ++x) {
      const float gx = static_cast<float>(x) * grid / width;
      const int x0 = static_cast<int>(gx);
      const float wx = gx - x0;
      for (int c = 0; c < 3; ++c) {
        auto l = [&](int i, int j) { return lattice[(static_cast<std::size_t>(j) * (grid + 1) + i) * 3 + c]; };
        const float v = (l(x0, y0) * (1 - wx) + l(x0 + 1, y0) * wx) * (1 - wy) +
                        (l(x0, y0 + 1) * (1 - wx) + l(x0 + 1, y0 + 1) * wx) * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

RawPrior make_raw_prior(const PromptRecord& prompt, const ClassEntry& cls, DiffusionBackend& backend,
                        const ColorBank& bank, std::uint32_t seed, int steps, int width, int height) {
  if (prompt.status != PromptStatus::manual_accepted)
    throw Error(Errc::precondition, "prompt " + prompt.prompt_id + " is not accepted");
  RawPrior out;
  out.prompt_id = prompt.prompt_id;
  if (prompt.category == AttributeCategory::color) {
    const Rgb rgb = bank.lookup(prompt.keyword);
    out.source = PriorSource::color_bank;
    out.image = Image(width, height, 3);
    for (std::size_t i = 0; i < out.image.pixel_count(); ++i) {
      out.image.data[i * 3] = rgb.r;
      out.image.data[i * 3 + 1] = rgb.g;
      out.image.data[i * 3 + 2] = rgb.b;
    }
    return out;
  }
  const std::string text = render_prompt(prompt, cls);
  out.source = PriorSource::diffusion;
  out.image = retry_once(seed, "text_to_image",
                         [&](std::uint32_t s) { return backend.text_to_image(text, s, steps, width, height); });
  if (out.image.width != width || out.image.height != height || out.image.channels != 3)
    out.image = resize_bilinear(out.image, width, height);
  return out;
}

namespace {

Image matched_prior(const Image& real, const Mask& mask, const Image& raw_prior) {
  if (!same_size(real, mask)) throw Error(Errc::dimension_mismatch, "mask does not match the real image");
  if (real.channels != raw_prior.channels) throw Error(Errc::dimension_mismatch, "channel count differs");
  return same_size(real, raw_prior) ? raw_prior : resize_bilinear(raw_prior, real.width, real.height);
}

}  // namespace

Image compose_background_real_prior(const Image& real, const Mask& mask, const Image& raw_prior, int dilation_px) {
  Image out = matched_prior(real, mask, raw_prior);
  const Mask keep = dilate_mask(mask, dilation_px);
  const int ch = real.channels;
  for (std::size_t i = 0; i < keep.bits.size(); ++i)
    if (keep.bits[i]) std::copy_n(&real.data[i * ch], ch, &out.data[i * ch]);
  return out;
}

std::uint8_t blend_channel(std::uint8_t prior, std::uint8_t real, double alpha) {
  // The epsilon keeps exact .5 cases from landing just below due to
  // binary representation of alpha.
  const double v = std::floor(alpha * prior + (1.0 - alpha) * real + 0.5 + 1e-7);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

Image compose_foreground_real_prior(const Image& real, const Mask& mask, const Image& raw_prior, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must be in [0,1]");
  const Image prior = matched_prior(real, mask, raw_prior);
  Image out = real;
  const int ch = real.channels;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i]) continue;
    for (int c = 0; c < ch; ++c) out.data[i * ch + c] = blend_channel(prior.data[i * ch + c], real.data[i * ch + c], alpha);
  }
  return out;
}

}  // namespace varireal
