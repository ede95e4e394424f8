#pragma once

#include "varireal/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace varireal {

// Generation parameters for one (dataset, category, feasibility) triple.
// Fields that do not apply to a category stay empty.
struct EditConfig {
  double inpaint_guidance_scale = 7.5;
  std::optional<double> control_guidance_scale;
  double inpaint_strength = 1.0;
  std::optional<double> ip_adapter_strength;
  std::optional<int> prior_steps;
  int inpaint_steps = 30;
  std::optional<int> control_steps;
  std::optional<int> dilation_px;  // background
  std::optional<double> alpha;     // color, texture
  // Image conditions for the structure-controlled stage, in order.
  // Names: stage1, raw_prior, real_prior, real.
  std::vector<std::string> stage2_conditions{"stage1", "raw_prior", "real_prior"};
  int working_long_side = 1024;
  int pad_multiple = 8;
  double canny_low = 100;
  double canny_high = 200;

  bool operator==(const EditConfig&) const = default;
};

// Throws config_error when a value is out of range or a field the category
// needs is missing.
void validate(const EditConfig& cfg, AttributeCategory category);

EditConfig edit_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EditConfig& cfg);

// Layered table:
//   {"defaults": {...},
//    "datasets": {"<id>": {"defaults": {...},
//                          "<category>": {"defaults": {...}, "feasible": {...}, "infeasible": {...}}}}}
// Later layers override earlier ones key by key.
class EditConfigTable {
 public:
  explicit EditConfigTable(nlohmann::json layers);

  // Built-in presets for pets, airc and cars, plus a small-frame "toy" entry.
  static EditConfigTable builtin();
  static const nlohmann::json& builtin_json();

  EditConfig resolve(const std::string& dataset_id, AttributeCategory category, Feasibility feasibility) const;
  // Resolves every triple for the dataset; throws config_error on the first gap.
  void check_complete(const std::string& dataset_id) const;
  std::vector<std::string> datasets() const;
  const nlohmann::json& layers() const { return layers_; }

 private:
  nlohmann::json layers_;
};

}  // namespace varireal
