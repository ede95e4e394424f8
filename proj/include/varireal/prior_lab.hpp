#pragma once

#include "varireal/error.hpp"
#include "varireal/raster.hpp"
#include "varireal/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace varireal {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// Named colours. Keys compare ignoring case, spaces and hyphens.
class ColorBank {
 public:
  static ColorBank standard();
  // One "keyword, R, G, B" entry per line; '#' starts a comment.
  static ColorBank parse(std::string_view text);
  static ColorBank load(const std::filesystem::path& path);

  void add(const std::string& keyword, Rgb rgb);
  void merge(const ColorBank& other);
  std::optional<Rgb> find(std::string_view keyword) const;
  Rgb lookup(std::string_view keyword) const;  // throws unknown_color
  std::size_t size() const { return entries_.size(); }

  static std::string normalize(std::string_view keyword);

 private:
  std::map<std::string, Rgb> entries_;
};

class DiffusionBackend {
 public:
  virtual ~DiffusionBackend() = default;
  virtual Image text_to_image(const std::string& prompt, std::uint32_t seed, int steps, int width, int height) = 0;
};

// Smooth procedural noise tinted by a hash of the prompt. Deterministic in
// (prompt, seed, size). Can be told to fail its first n calls.
class ProceduralDiffusion : public DiffusionBackend {
 public:
  explicit ProceduralDiffusion(int fail_first = 0) : fail_first_(fail_first) {}
  Image text_to_image(const std::string& prompt, std::uint32_t seed, int steps, int width, int height) override;
  int calls() const { return calls_; }

 private:
  int fail_first_;
  int calls_ = 0;
};

enum class PriorSource { diffusion, color_bank };

struct RawPrior {
  Image image;
  PriorSource source = PriorSource::diffusion;
  std::string prompt_id;
};

// Calls fn(seed); on failure calls fn(seed + 1) once more, then reports
// backend_failure.
template <typename F>
auto retry_once(std::uint32_t seed, const char* what, F&& fn) -> decltype(fn(seed)) {
  try {
    return fn(seed);
  } catch (const std::exception& first) {
    try {
      return fn(seed + 1);
    } catch (const std::exception& second) {
      throw Error(Errc::backend_failure, std::string(what) + " failed twice: " + second.what());
    }
  }
}

RawPrior make_raw_prior(const PromptRecord& prompt, const ClassEntry& cls, DiffusionBackend& backend,
                        const ColorBank& bank, std::uint32_t seed, int steps, int width, int height);

// Real where the dilated mask is set, raw prior elsewhere. The prior is
// bilinearly resized to the real image's size if needed.
Image compose_background_real_prior(const Image& real, const Mask& mask, const Image& raw_prior, int dilation_px);

// Inside the mask: alpha*prior + (1-alpha)*real, rounded half-up. Outside:
// real, untouched.
Image compose_foreground_real_prior(const Image& real, const Mask& mask, const Image& raw_prior, double alpha);

std::uint8_t blend_channel(std::uint8_t prior, std::uint8_t real, double alpha);

}  // namespace varireal
