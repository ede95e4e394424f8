#pragma once

#include "varireal/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace varireal {

// In-context-learning request used to ask the LLM for attribute phrases.
// Placeholders: [Attribute], [CLASS], [NUMBER].
struct IclTemplate {
  std::string task_text;
  std::vector<std::string> criteria;
  std::string positive_example;
  std::string negative_example_with_reasons;
  std::string question_text;

  // Throws Errc::config_error unless question_text mentions every placeholder.
  void validate() const;

  std::string render(const std::string& attribute, const std::string& class_name, int number) const;
};

IclTemplate default_icl_template();

// Sectioned text file: lines "## task", "## criteria" (one rule per line),
// "## positive_example", "## negative_example", "## question".
IclTemplate load_icl_template(const std::filesystem::path& path);

// "feasible backgrounds", "unfeasible colors", ...
std::string attribute_phrase(AttributeCategory category, Feasibility feasibility);

// Self-check follow-up that asks the model to prune its own answers.
std::string self_check_question(AttributeCategory category, Feasibility feasibility, const std::string& class_name);

std::string replace_all(std::string text, const std::string& from, const std::string& to);

}  // namespace varireal
