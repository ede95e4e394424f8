#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace varireal {

enum class AttributeCategory { background, color, texture };
enum class Feasibility { feasible, infeasible };
enum class PromptStatus { raw, self_filtered, manual_accepted, manual_rejected };
enum class Split { train, test };
enum class ImageKind { real, synthetic };
enum class FilterStatus { unfiltered, accepted, rejected };

inline constexpr std::array kAllCategories{AttributeCategory::background, AttributeCategory::color,
                                           AttributeCategory::texture};
inline constexpr std::array kAllFeasibilities{Feasibility::feasible, Feasibility::infeasible};

std::string_view to_string(AttributeCategory v);
std::string_view to_string(Feasibility v);
std::string_view to_string(PromptStatus v);
std::string_view to_string(Split v);
std::string_view to_string(ImageKind v);
std::string_view to_string(FilterStatus v);

// Parsers accept the to_string spelling; "F"/"IF" are also accepted for feasibility.
AttributeCategory parse_category(std::string_view s);
Feasibility parse_feasibility(std::string_view s);
PromptStatus parse_prompt_status(std::string_view s);
Split parse_split(std::string_view s);
ImageKind parse_image_kind(std::string_view s);
FilterStatus parse_filter_status(std::string_view s);

struct ClassEntry {
  int class_id = 0;
  std::string name;
  std::string dataset_id;

  bool operator==(const ClassEntry&) const = default;
};

struct PromptRecord {
  std::string prompt_id;
  int class_id = 0;
  AttributeCategory category = AttributeCategory::background;
  Feasibility feasibility = Feasibility::feasible;
  std::string keyword;
  std::string description;  // may be empty for color prompts
  PromptStatus status = PromptStatus::raw;

  bool operator==(const PromptRecord&) const = default;
};

// Throws Errc::schema_error when the record breaks its invariants.
void validate(const PromptRecord& record);

struct ImageRecord {
  std::string image_id;
  int class_id = 0;
  std::string path;
  Split split = Split::train;
  ImageKind kind = ImageKind::real;
  std::optional<std::string> parent_real_id;  // synthetic only
  std::optional<std::string> prompt_id;       // synthetic only
  FilterStatus filter_status = FilterStatus::unfiltered;
  std::uint64_t seed = 0;
  int attempt = 0;  // 0 for real images, >= 1 for synthetic

  bool operator==(const ImageRecord&) const = default;
};

void validate(const ImageRecord& record);

struct AnsweredQuestion {
  std::string text;
  std::string expected;
  std::string answered;  // empty when the backend gave no usable answer

  bool operator==(const AnsweredQuestion&) const = default;
};

struct VerdictRecord {
  std::string image_id;
  int attempt = 1;
  std::vector<AnsweredQuestion> questions;
  bool accepted = false;
  bool indeterminate = false;

  bool operator==(const VerdictRecord&) const = default;
};

struct FailureRecord {
  std::string job_id;
  int attempt = 1;
  std::string stage;
  std::string message;

  bool operator==(const FailureRecord&) const = default;
};

struct StageRecord {
  std::string name;
  bool completed = false;

  bool operator==(const StageRecord&) const = default;
};

struct GenerationJob {
  std::string job_id;
  std::string real_image_id;
  std::string prompt_id;
  AttributeCategory category = AttributeCategory::background;
  Feasibility feasibility = Feasibility::feasible;
  int attempt = 1;
  std::uint32_t seed = 0;

  bool operator==(const GenerationJob&) const = default;
};

std::string make_job_id(std::string_view real_image_id, std::string_view prompt_id);

// Output file stem for one generation attempt: {real_id}__{prompt_id}__{attempt}.
std::string output_stem(const GenerationJob& job);

}  // namespace varireal
