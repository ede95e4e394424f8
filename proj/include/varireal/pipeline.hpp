#pragma once

#include "varireal/annotation.hpp"
#include "varireal/auto_filter.hpp"
#include "varireal/edit_engine.hpp"
#include "varireal/guidance.hpp"
#include "varireal/icl_template.hpp"
#include "varireal/llm.hpp"
#include "varireal/manifest.hpp"
#include "varireal/metrics.hpp"
#include "varireal/pipeline_config.hpp"
#include "varireal/prior_lab.hpp"
#include "varireal/scaling.hpp"
#include "varireal/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace varireal {

// Stage names, in pipeline order.
inline constexpr const char* kStageInit = "init";
inline constexpr const char* kStagePrompts = "prompts";
inline constexpr const char* kStageMaps = "maps";
inline constexpr const char* kStagePriors = "priors";
inline constexpr const char* kStageGenerate = "generate";
inline constexpr const char* kStageFilter = "filter";
inline constexpr const char* kStageTrain = "train";
inline constexpr const char* kStageEval = "eval";

// Stage that must be complete before `stage` may run; empty for init.
std::string required_stage(const std::string& stage);

struct StageReport {
  std::string stage;
  std::size_t done = 0;     // units of work performed
  std::size_t skipped = 0;  // already complete
  std::size_t failed = 0;
  bool ok() const { return failed == 0; }
};

// Toy images: one shape per class on a plain backdrop, written to
// real/<split>/<class>/<n>.png under root.
struct ToyDatasetSpec {
  std::vector<std::string> classes{"disc", "block"};
  int train_per_class = 3;
  int test_per_class = 4;
  int width = 64;
  int height = 48;
  std::uint64_t seed = 0;
};

void write_toy_dataset(const std::filesystem::path& root, const ToyDatasetSpec& spec);
// Small prompt counts, the "toy" edit preset and a short training budget.
PipelineConfig toy_pipeline_config(const std::filesystem::path& workspace);

// Creates backend instances from the config. Each parallel worker asks for
// its own set, so mocks with internal state are never shared.
class BackendFactory {
 public:
  explicit BackendFactory(const PipelineConfig& cfg);

  std::unique_ptr<LlmBackend> llm() const;
  std::unique_ptr<DetectorBackend> detector() const;
  std::unique_ptr<SegmenterBackend> segmenter() const;
  std::unique_ptr<MattingBackend> matting() const;
  std::unique_ptr<DiffusionBackend> diffusion() const;
  std::unique_ptr<InpaintBackend> inpaint() const;
  std::unique_ptr<StructureControlBackend> control() const;
  // The oracle answers for one image: it knows the expectations of exactly
  // the questions asked about it. Question texts repeat across images with
  // different truths, so it is never shared.
  std::unique_ptr<VqaBackend> vqa(const std::vector<FilterQuestion>& questions) const;

  const ColorBank& colors() const { return colors_; }
  const FilterTemplates& filter_templates() const { return templates_; }
  const IclTemplate& icl() const { return icl_; }

 private:
  PipelineConfig cfg_;
  ColorBank colors_;
  FilterTemplates templates_;
  IclTemplate icl_;
};

struct TrainRequest {
  DataRegime regime = DataRegime::mixed;
  FeasibilityRegime feasibility = FeasibilityRegime::feasible;
  std::optional<AttributeCategory> category;
};

// "real", or "<regime>-<F|IF|Mix>-<category|all>".
std::string run_name(const TrainRequest& req);

struct RunResult {
  std::string name;
  double accuracy = 0;
  PredictionSet correct;
};

class Pipeline {
 public:
  // Validates the configuration before anything touches the workspace.
  explicit Pipeline(PipelineConfig cfg);
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const PipelineConfig& config() const { return cfg_; }
  Workspace workspace() const { return {cfg_.workspace}; }
  bool initialized() const;
  Manifest manifest() const;

  StageReport init();
  StageReport prompts();
  StageReport maps();
  StageReport priors();
  StageReport generate();
  StageReport filter();
  StageReport train(const TrainRequest& req);
  StageReport eval();
  StageReport scale(std::optional<AttributeCategory> category = std::nullopt);

  // Session stored under annotation/; sampled on first use.
  AnnotationSession annotation_session();
  std::filesystem::path ratings_path() const;
  StageReport annotate_export();

  // Accuracy of the encoder with the given adapters on the test split.
  RunResult evaluate(const std::string& name, const AdapterMap* adapters);

 private:
  ManifestStore& store();
  void require(const std::string& stage);
  void complete(const std::string& stage, const StageReport& report);
  std::vector<GenerationJob> planned_jobs(const Manifest& m) const;
  std::vector<ImageRecord> masked_train_reals(const Manifest& m) const;
  std::string manifest_hash() const;

  PipelineConfig cfg_;
  BackendFactory factory_;
  std::optional<ManifestStore> store_;
};

}  // namespace varireal
