#include "varireal/types.hpp"

#include "varireal/error.hpp"

#include <string>

namespace varireal {

std::string_view to_string(AttributeCategory v) {
  switch (v) {
    case AttributeCategory::background: return "background";
    case AttributeCategory::color: return "color";
    case AttributeCategory::texture: return "texture";
  }
  return "?";
}

std::string_view to_string(Feasibility v) {
  return v == Feasibility::feasible ? "feasible" : "infeasible";
}

std::string_view to_string(PromptStatus v) {
  switch (v) {
    case PromptStatus::raw: return "raw";
    case PromptStatus::self_filtered: return "self_filtered";
    case PromptStatus::manual_accepted: return "manual_accepted";
    case PromptStatus::manual_rejected: return "manual_rejected";
  }
  return "?";
}

std::string_view to_string(Split v) { return v == Split::train ? "train" : "test"; }
std::string_view to_string(ImageKind v) { return v == ImageKind::real ? "real" : "synthetic"; }

std::string_view to_string(FilterStatus v) {
  switch (v) {
    case FilterStatus::unfiltered: return "unfiltered";
    case FilterStatus::accepted: return "accepted";
    case FilterStatus::rejected: return "rejected";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_value(std::string_view what, std::string_view s) {
  throw Error(Errc::parse_error, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

AttributeCategory parse_category(std::string_view s) {
  if (s == "background") return AttributeCategory::background;
  if (s == "color") return AttributeCategory::color;
  if (s == "texture") return AttributeCategory::texture;
  bad_value("category", s);
}

Feasibility parse_feasibility(std::string_view s) {
  if (s == "feasible" || s == "F") return Feasibility::feasible;
  if (s == "infeasible" || s == "IF") return Feasibility::infeasible;
  bad_value("feasibility", s);
}

PromptStatus parse_prompt_status(std::string_view s) {
  if (s == "raw") return PromptStatus::raw;
  if (s == "self_filtered") return PromptStatus::self_filtered;
  if (s == "manual_accepted") return PromptStatus::manual_accepted;
  if (s == "manual_rejected") return PromptStatus::manual_rejected;
  bad_value("prompt status", s);
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  bad_value("split", s);
}

ImageKind parse_image_kind(std::string_view s) {
  if (s == "real") return ImageKind::real;
  if (s == "synthetic") return ImageKind::synthetic;
  bad_value("image kind", s);
}

FilterStatus parse_filter_status(std::string_view s) {
  if (s == "unfiltered") return FilterStatus::unfiltered;
  if (s == "accepted") return FilterStatus::accepted;
  if (s == "rejected") return FilterStatus::rejected;
  bad_value("filter status", s);
}

void validate(const PromptRecord& r) {
  if (r.keyword.empty()) throw Error(Errc::schema_error, "prompt " + r.prompt_id + " has empty keyword");
  if (r.keyword.find(',') != std::string::npos)
    throw Error(Errc::schema_error, "prompt keyword may not contain ',': " + r.keyword);
  if (r.category != AttributeCategory::color && r.description.empty())
    throw Error(Errc::schema_error, "prompt " + r.prompt_id + " needs a description");
}

void validate(const ImageRecord& r) {
  if (r.kind == ImageKind::real) {
    if (r.parent_real_id || r.prompt_id)
      throw Error(Errc::schema_error, "real image " + r.image_id + " carries synthetic provenance");
    if (r.filter_status != FilterStatus::unfiltered)
      throw Error(Errc::schema_error, "real image " + r.image_id + " carries a filter verdict");
  } else {
    if (!r.parent_real_id || !r.prompt_id)
      throw Error(Errc::schema_error, "synthetic image " + r.image_id + " lacks parent or prompt");
    if (r.attempt < 1) throw Error(Errc::schema_error, "synthetic image " + r.image_id + " has attempt < 1");
  }
}

std::string make_job_id(std::string_view real_image_id, std::string_view prompt_id) {
  std::string id(real_image_id);
  id += "__";
  id += prompt_id;
  return id;
}

std::string output_stem(const GenerationJob& job) {
  return job.job_id + "__" + std::to_string(job.attempt);
}

}  // namespace varireal
