#pragma once

#include "varireal/auto_filter.hpp"
#include "varireal/edit_config.hpp"
#include "varireal/toy_encoder.hpp"
#include "varireal/trainer.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace varireal {

// Backend names. Offline choices: llm "canned" | "http", diffusion
// "procedural", inpaint "noise" | "echo", control "blend", detector
// "border-contrast", segmenter "contrast" | "box", matting "contrast",
// vqa "oracle" | "http", encoder "toy".
struct BackendSelection {
  std::string llm = "canned";
  std::string llm_url;
  int llm_drop_every = 0;
  std::string diffusion = "procedural";
  std::string inpaint = "noise";
  std::string control = "blend";
  std::string detector = "border-contrast";
  std::string segmenter = "contrast";
  std::string matting = "contrast";
  std::string vqa = "oracle";
  std::string vqa_url;
  double vqa_flip_rate = 0.0;
  std::string encoder = "toy";
  int contrast_tolerance = 24;
};

struct PipelineConfig {
  std::string dataset_id = "toy";
  std::filesystem::path workspace;  // absolute once loaded
  std::filesystem::path manifest = "manifest.jsonl";  // relative to workspace unless absolute
  BackendSelection backends;
  std::vector<AttributeCategory> categories{kAllCategories.begin(), kAllCategories.end()};
  // Raw prompts requested per class, indexed [feasible, infeasible].
  std::map<AttributeCategory, std::array<int, 2>> prompt_counts{
      {AttributeCategory::background, {50, 70}}, {AttributeCategory::color, {10, 10}},
      {AttributeCategory::texture, {30, 50}}};
  // "accept-all" or a decisions file (relative to workspace).
  std::string decisions = "accept-all";
  std::string icl_template;  // optional file
  std::string color_bank;    // optional extra colours
  std::string filter_templates;  // optional file
  int k = 2;
  nlohmann::json edit_overrides = nlohmann::json::object();  // merge-patched over the built-in table
  RetryPolicy retry;
  TrainConfig train;
  ToyEncoderShape encoder;
  std::vector<int> scale_ratios{1, 2, 3, 4, 5};
  int annotation_per_group = 10;
  int parallelism = 1;
  std::uint64_t seed = 0;

  std::filesystem::path manifest_path() const;
  std::filesystem::path resolve(const std::string& relative) const { return workspace / relative; }
  EditConfigTable edit_table() const;
  // Stable hash of the canonical JSON form, workspace excluded.
  std::string hash() const;
};

// Unknown keys are config errors. Relative workspace paths resolve against base_dir.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const PipelineConfig& cfg, const std::filesystem::path& path);

// Throws config_error on unknown backends, bad counts, or an edit table that
// cannot resolve every configured (category, feasibility).
void validate(const PipelineConfig& cfg);

}  // namespace varireal
