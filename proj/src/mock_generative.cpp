#include "varireal/mock_generative.hpp"

#include "varireal/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace varireal {

Image NoiseInpaint::inpaint(const Image& init, const Mask& mask, const std::string& prompt, double strength, double,
                            int, std::uint32_t seed) {
  ++calls_;
  if (calls_ <= fail_first_) throw Error(Errc::backend_failure, "noise inpaint: injected failure");
  if (!same_size(init, mask)) throw Error(Errc::dimension_mismatch, "noise inpaint: mask size differs");
  std::mt19937 rng(static_cast<std::uint32_t>(mix64(stable_hash({prompt}) ^ seed)));
  Image out = init;
  const int ch = init.channels;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i]) continue;
    for (int c = 0; c < ch; ++c) {
      const double noise = static_cast<double>(rng() % 256);
      const double v = (1.0 - strength) * init.data[i * ch + c] + strength * noise;
      out.data[i * ch + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

Image BlendControl::generate(const std::string&, const CannyMap& canny, const std::vector<Image>& conditions,
                             double condition_strength, double, int, std::uint32_t) {
  if (conditions.empty()) throw Error(Errc::invalid_argument, "blend control needs at least one condition");
  const Image& first = conditions.front();
  for (const auto& c : conditions)
    if (!same_size(c, first) || c.channels != first.channels)
      throw Error(Errc::dimension_mismatch, "blend control: condition sizes differ");
  if (!same_size(canny, first)) throw Error(Errc::dimension_mismatch, "blend control: canny size differs");

  const double total = 1.0 + condition_strength * static_cast<double>(conditions.size() - 1);
  Image out(first.width, first.height, first.channels);
  const int ch = first.channels;
  for (std::size_t i = 0; i < first.data.size(); ++i) {
    double v = first.data[i];
    for (std::size_t k = 1; k < conditions.size(); ++k) v += condition_strength * conditions[k].data[i];
    v /= total;
    if (canny.bits[i / ch]) v *= 0.75;
    out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

}  // namespace varireal
