#include "varireal/edit_engine.hpp"

#include "varireal/image_io.hpp"
#include "varireal/prompt_forge.hpp"

#include <spdlog/spdlog.h>

namespace varireal {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (!same_size(a, b) || a.channels != b.channels)
    throw Error(Errc::dimension_mismatch, std::string(what) + ": raster sizes differ");
}

void require_mask(const Image& a, const BinaryRaster& m, const char* what) {
  if (!same_size(a, m)) throw Error(Errc::dimension_mismatch, std::string(what) + ": mask size differs");
}

}  // namespace

Image edit_background(const Image& real, const Mask& mask, const Image& real_prior, const std::string& prompt,
                      const EditConfig& cfg, InpaintBackend& backend, std::uint32_t seed) {
  require_same(real, real_prior, "edit_background");
  require_mask(real, mask, "edit_background");
  const Mask editable = invert_mask(mask);
  Image out = retry_once(seed, "inpaint", [&](std::uint32_t s) {
    return backend.inpaint(real_prior, editable, prompt, cfg.inpaint_strength, cfg.inpaint_guidance_scale,
                           cfg.inpaint_steps, s);
  });
  require_same(real, out, "inpaint backend");
  return out;
}

Image edit_foreground(const Image& real, const Mask& mask, const CannyMap& canny, const Image& raw_prior,
                      const Image& real_prior, const std::string& prompt, const EditConfig& cfg,
                      InpaintBackend& inpaint, StructureControlBackend& control, std::uint32_t seed) {
  require_same(real, real_prior, "edit_foreground");
  require_same(real, raw_prior, "edit_foreground");
  require_mask(real, mask, "edit_foreground");
  require_mask(real, canny, "edit_foreground");
  if (!cfg.ip_adapter_strength || !cfg.control_guidance_scale || !cfg.control_steps)
    throw Error(Errc::config_error, "foreground edits need the structure-control settings");

  const Image stage1 = retry_once(seed, "inpaint", [&](std::uint32_t s) {
    return inpaint.inpaint(real_prior, mask, prompt, cfg.inpaint_strength, cfg.inpaint_guidance_scale,
                           cfg.inpaint_steps, s);
  });
  require_same(real, stage1, "inpaint backend");

  std::vector<Image> conditions;
  for (const auto& name : cfg.stage2_conditions) {
    if (name == "stage1")
      conditions.push_back(stage1);
    else if (name == "raw_prior")
      conditions.push_back(raw_prior);
    else if (name == "real_prior")
      conditions.push_back(real_prior);
    else if (name == "real")
      conditions.push_back(real);
    else
      throw Error(Errc::config_error, "unknown stage-2 condition '" + name + "'");
  }
  Image out = retry_once(seed, "structure control", [&](std::uint32_t s) {
    return control.generate(prompt, canny, conditions, *cfg.ip_adapter_strength, *cfg.control_guidance_scale,
                            *cfg.control_steps, s);
  });
  require_same(real, out, "structure-control backend");
  return out;
}

Image paste_invariant_regions(const Image& generated, const Image& real, const Mask& mask,
                              AttributeCategory category) {
  require_same(generated, real, "paste_invariant_regions");
  require_mask(real, mask, "paste_invariant_regions");
  // Background edits keep the object; foreground edits keep the scene.
  const std::uint8_t keep = category == AttributeCategory::background ? 1 : 0;
  Image out = generated;
  const int ch = real.channels;
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if ((mask.bits[i] != 0) == (keep == 1)) std::copy_n(&real.data[i * ch], ch, &out.data[i * ch]);
  return out;
}

namespace {

struct JobRecords {
  const ImageRecord* real = nullptr;
  const PromptRecord* prompt = nullptr;
  const ClassEntry* cls = nullptr;
};

JobRecords resolve_job(const GenerationJob& job, const Manifest& manifest) {
  JobRecords r;
  r.real = manifest.find_image(job.real_image_id);
  if (!r.real || r.real->kind != ImageKind::real) throw Error(Errc::not_found, "unknown real image " + job.real_image_id);
  r.prompt = manifest.find_prompt(job.prompt_id);
  if (!r.prompt) throw Error(Errc::not_found, "unknown prompt " + job.prompt_id);
  if (r.prompt->status != PromptStatus::manual_accepted)
    throw Error(Errc::precondition, "prompt " + job.prompt_id + " is not accepted");
  if (r.prompt->class_id != r.real->class_id || r.prompt->category != job.category)
    throw Error(Errc::precondition, "job " + job.job_id + " pairs mismatched records");
  r.cls = manifest.find_class(r.real->class_id);
  if (!r.cls) throw Error(Errc::not_found, "unknown class for " + r.real->image_id);
  return r;
}

Image prior_for_frame(const GenerationJob& job, const JobRecords& r, const WorkingFrame& frame, const Workspace& ws,
                      const GenerationBackends& backends, const EditConfig& cfg, bool store) {
  const auto cached = ws.resolve(Workspace::prior_rel(job));
  if (std::filesystem::exists(cached)) {
    Image img = load_image(cached);
    if (img.width == frame.padded_width && img.height == frame.padded_height) return img;
    spdlog::warn("cached prior {} has the wrong size; regenerating", cached.string());
  }
  Image img = make_raw_prior(*r.prompt, *r.cls, *backends.diffusion, *backends.colors, job.seed,
                             cfg.prior_steps.value_or(1), frame.padded_width, frame.padded_height)
                  .image;
  if (store) save_image(img, cached);
  return img;
}

}  // namespace

Image job_raw_prior(const GenerationJob& job, const Manifest& manifest, const Workspace& ws,
                    const GenerationBackends& backends, const EditConfig& cfg, bool store) {
  if (!backends.diffusion || !backends.colors) throw Error(Errc::invalid_argument, "prior backends are incomplete");
  const JobRecords r = resolve_job(job, manifest);
  validate(cfg, job.category);
  const Image original = load_image(ws.resolve(r.real->path));
  const auto frame = WorkingFrame::for_size(original.width, original.height, cfg.working_long_side, cfg.pad_multiple);
  return prior_for_frame(job, r, frame, ws, backends, cfg, store);
}

ImageRecord run_generation_job(const GenerationJob& job, const Manifest& manifest, const Workspace& ws,
                               const GenerationBackends& backends, const EditConfig& cfg) {
  if (!backends.diffusion || !backends.inpaint || !backends.control || !backends.colors)
    throw Error(Errc::invalid_argument, "generation backends are incomplete");
  const JobRecords r = resolve_job(job, manifest);
  const ImageRecord* real = r.real;
  const PromptRecord* prompt = r.prompt;
  const ClassEntry* cls = r.cls;
  validate(cfg, job.category);

  const Image original = load_image(ws.resolve(real->path));
  const Mask original_mask = load_mask(ws.resolve(Workspace::mask_rel(real->image_id)));
  if (!same_size(original, original_mask))
    throw Error(Errc::dimension_mismatch, "stored mask does not match " + real->image_id);

  const auto frame = WorkingFrame::for_size(original.width, original.height, cfg.working_long_side, cfg.pad_multiple);
  const Image real_w = frame.to_working(original);
  const Mask mask_w = frame.to_working(original_mask);
  const std::string text = render_prompt(*prompt, *cls);

  const Image raw_prior = prior_for_frame(job, r, frame, ws, backends, cfg, false);
  Image edited;
  if (job.category == AttributeCategory::background) {
    const Image real_prior = compose_background_real_prior(real_w, mask_w, raw_prior, *cfg.dilation_px);
    edited = edit_background(real_w, mask_w, real_prior, text, cfg, *backends.inpaint, job.seed);
  } else {
    const Image real_prior = compose_foreground_real_prior(real_w, mask_w, raw_prior, *cfg.alpha);
    const CannyMap canny = canny_from_foreground(real_w, mask_w, cfg.canny_low, cfg.canny_high);
    edited = edit_foreground(real_w, mask_w, canny, raw_prior, real_prior, text, cfg, *backends.inpaint,
                             *backends.control, job.seed);
  }
  const Image result = paste_invariant_regions(frame.to_original(edited), original, original_mask, job.category);

  ImageRecord rec;
  rec.image_id = job.job_id;
  rec.class_id = real->class_id;
  rec.path = Workspace::synthetic_rel(job);
  rec.split = Split::train;
  rec.kind = ImageKind::synthetic;
  rec.parent_real_id = real->image_id;
  rec.prompt_id = prompt->prompt_id;
  rec.filter_status = FilterStatus::unfiltered;
  rec.seed = job.seed;
  rec.attempt = job.attempt;
  save_image(result, ws.resolve(rec.path));
  spdlog::debug("generated {}", rec.path);
  return rec;
}

}  // namespace varireal
