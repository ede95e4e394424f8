#pragma once

#include "varireal/edit_engine.hpp"

namespace varireal {

// Returns the init image untouched.
class EchoInpaint : public InpaintBackend {
 public:
  Image inpaint(const Image& init, const Mask&, const std::string&, double, double, int, std::uint32_t) override {
    return init;
  }
};

// Inside the mask, mixes the init image with seeded noise by `strength`.
// Pixels outside the mask come back unchanged. Can fail its first n calls.
class NoiseInpaint : public InpaintBackend {
 public:
  explicit NoiseInpaint(int fail_first = 0) : fail_first_(fail_first) {}
  Image inpaint(const Image& init, const Mask& mask, const std::string& prompt, double strength, double guidance,
                int steps, std::uint32_t seed) override;
  int calls() const { return calls_; }

 private:
  int fail_first_;
  int calls_ = 0;
};

// Mean of the conditions, the first at full weight and the rest at the
// condition strength; edge pixels are darkened by a quarter.
class BlendControl : public StructureControlBackend {
 public:
  Image generate(const std::string& prompt, const CannyMap& canny, const std::vector<Image>& conditions,
                 double condition_strength, double guidance, int steps, std::uint32_t seed) override;
};

}  // namespace varireal
