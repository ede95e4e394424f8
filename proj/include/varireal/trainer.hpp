#pragma once

#include "varireal/augment.hpp"
#include "varireal/manifest.hpp"
#include "varireal/toy_encoder.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace varireal {

enum class DataRegime { real, syn, mixed };
enum class FeasibilityRegime { feasible, infeasible, mix };

std::string_view to_string(DataRegime r);
std::string_view to_string(FeasibilityRegime r);
DataRegime parse_data_regime(std::string_view s);
FeasibilityRegime parse_feasibility_regime(std::string_view s);  // F, IF, Mix

struct TrainConfig {
  double lambda_mix = 0.5;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::vector<double> lr_grid{1e-3, 5e-4, 1e-4, 5e-5, 1e-5};
  std::vector<double> wd_grid{1e-3, 1e-4, 5e-5};
  int batch_size = 64;
  int test_batch_size = 8;
  int total_iterations = 1000;
  double warmup_fraction = 0.05;
  double min_lr = 1e-8;
  int validation_interval = 0;  // 0: every total_iterations / 70 steps
  double validation_fraction = 0.1;
  std::vector<std::string> augmentations{"random_resized_crop", "horizontal_flip", "color_jitter", "grayscale"};
  bool single_mixed_batch = false;  // mixed regime: one half/half batch instead of one batch per pool
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::uint64_t seed = 0;

  int effective_validation_interval() const;
  // Batch 64, lambda 0.5, warmup 5%, the dataset's iteration budget.
  static TrainConfig full_scale(const std::string& dataset_id);
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

double mixed_loss(double ce_real, double ce_syn, double lambda_mix);

// Linear warmup to lr, then cosine decay to min_lr. step is 1-based.
double learning_rate_at(int step, double lr, const TrainConfig& cfg);

struct LabeledImage {
  std::string image_id;
  Image image;
  int label = 0;
};

struct TrainingData {
  std::vector<std::string> class_names;  // label order
  std::vector<LabeledImage> real;
  std::vector<LabeledImage> syn;
};

struct TrainingSelection {
  std::vector<ImageRecord> real;
  std::vector<ImageRecord> syn;
};

// Real train images, plus accepted synthetic images whose prompt matches the
// feasibility regime (and category, when given). Rejected or unfiltered
// synthetic images never qualify.
TrainingSelection select_training_records(const Manifest& manifest, FeasibilityRegime feasibility,
                                          std::optional<AttributeCategory> category = std::nullopt);
TrainingData load_training_data(const Manifest& manifest, const std::filesystem::path& root,
                                const TrainingSelection& selection);

struct TrainLogEntry {
  int step = 0;
  double loss = 0;
  double lr = 0;
  std::optional<double> val_accuracy;
};

struct Provenance {
  std::string manifest_hash;
  std::string data_regime;
  std::string feasibility_regime;
  std::string category;
};

struct AdapterCheckpoint {
  AdapterMap adapters;  // best-validation adapters
  TrainConfig config;
  double best_val_accuracy = -1;
  int best_step = 0;
  int steps_run = 0;
  std::uint64_t base_weight_hash = 0;
  Provenance provenance;
  std::vector<TrainLogEntry> log;
};

nlohmann::json to_json(const AdapterCheckpoint& ckpt);
AdapterCheckpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const AdapterCheckpoint& ckpt, const std::filesystem::path& path);
AdapterCheckpoint load_checkpoint(const std::filesystem::path& path);

// Predicted labels, evaluated in chunks of test_batch_size.
std::vector<int> predict(const EncoderBackend& encoder, const std::vector<Image>& images,
                         const std::vector<std::string>& class_names, int test_batch_size = 8);
double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth);

// Runs exactly cfg.total_iterations optimizer steps on the encoder's adapters
// and leaves the best-validation adapters installed. Validation uses a held
// out fraction of the real pool, which is then excluded from training.
AdapterCheckpoint train(EncoderBackend& encoder, const TrainingData& data, DataRegime regime, const TrainConfig& cfg,
                        const std::function<void(const TrainLogEntry&)>& on_log = {});

// Arg-max of validation_fn over the grid; ties go to the smaller lr, then the
// smaller weight decay.
std::pair<double, double> select_hyperparameters(const std::vector<double>& lr_grid, const std::vector<double>& wd_grid,
                                                 const std::function<double(double, double)>& validation_fn);

}  // namespace varireal
