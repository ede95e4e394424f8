#pragma once

#include "varireal/edit_config.hpp"
#include "varireal/guidance.hpp"
#include "varireal/manifest.hpp"
#include "varireal/prior_lab.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace varireal {

class InpaintBackend {
 public:
  virtual ~InpaintBackend() = default;
  // Regenerates the pixels where mask = 1.
  virtual Image inpaint(const Image& init, const Mask& mask, const std::string& prompt, double strength,
                        double guidance, int steps, std::uint32_t seed) = 0;
};

class StructureControlBackend {
 public:
  virtual ~StructureControlBackend() = default;
  virtual Image generate(const std::string& prompt, const CannyMap& canny, const std::vector<Image>& conditions,
                         double condition_strength, double guidance, int steps, std::uint32_t seed) = 0;
};

// Inpaints the background (inverse of the foreground mask) starting from the
// real prior.
Image edit_background(const Image& real, const Mask& mask, const Image& real_prior, const std::string& prompt,
                      const EditConfig& cfg, InpaintBackend& backend, std::uint32_t seed);

// Stage 1 inpaints the foreground from the real prior; stage 2 regenerates
// under the canny map with the configured image conditions.
Image edit_foreground(const Image& real, const Mask& mask, const CannyMap& canny, const Image& raw_prior,
                      const Image& real_prior, const std::string& prompt, const EditConfig& cfg,
                      InpaintBackend& inpaint, StructureControlBackend& control, std::uint32_t seed);

// Copies the unedited region from the real image: the foreground for
// background edits, everything outside the mask for color/texture edits.
Image paste_invariant_regions(const Image& generated, const Image& real, const Mask& mask, AttributeCategory category);

// File layout of a dataset workspace; every path in the manifest is relative
// to root.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
  static std::string mask_rel(const std::string& real_id) { return "maps/" + real_id + ".mask.png"; }
  static std::string canny_rel(const std::string& real_id) { return "maps/" + real_id + ".canny.png"; }
  static std::string synthetic_rel(const GenerationJob& job) { return "synthetic/" + output_stem(job) + ".png"; }
  static std::string prior_rel(const GenerationJob& job) { return "priors/" + output_stem(job) + ".png"; }
};

struct GenerationBackends {
  DiffusionBackend* diffusion = nullptr;
  InpaintBackend* inpaint = nullptr;
  StructureControlBackend* control = nullptr;
  const ColorBank* colors = nullptr;
};

// Raw prior at the job's working frame. Read from priors/ when a cached copy
// of the right size exists; otherwise generated and, with `store`, cached.
Image job_raw_prior(const GenerationJob& job, const Manifest& manifest, const Workspace& ws,
                    const GenerationBackends& backends, const EditConfig& cfg, bool store);

// maps -> priors -> edit -> paste for one job. Reads the real image and its
// stored mask, writes the synthetic image and returns its (unfiltered)
// record; the caller appends it to the manifest.
ImageRecord run_generation_job(const GenerationJob& job, const Manifest& manifest, const Workspace& ws,
                               const GenerationBackends& backends, const EditConfig& cfg);

}  // namespace varireal
