#pragma once

#include "varireal/icl_template.hpp"
#include "varireal/llm.hpp"
#include "varireal/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace varireal {

// "c007-bg-f" style group prefix; prompt ids append "-NNN".
std::string prompt_group_prefix(int class_id, AttributeCategory category, Feasibility feasibility);

// Asks the LLM for up to n distinct attribute phrases. Keywords are
// deduplicated case-insensitively; background/texture items without a
// description are dropped; color items keep no description. A malformed reply
// is retried once before Errc::malformed_reply is raised.
std::vector<PromptRecord> generate_attributes(const ClassEntry& cls, AttributeCategory category,
                                              Feasibility feasibility, int n, LlmBackend& llm,
                                              const IclTemplate& icl = default_icl_template(), int first_index = 0);

// Follow-up self-check turn. Survivors are the inputs whose keyword the model
// kept; keywords the model invents are dropped with a warning.
std::vector<PromptRecord> self_filter(std::span<const PromptRecord> records, const ClassEntry& cls, LlmBackend& llm,
                                      const IclTemplate& icl = default_icl_template());

// decisions: normalized keyword -> accept (true) / reject (false).
// Throws Errc::missing_decision if any record lacks a decision.
std::vector<PromptRecord> apply_manual_filter(std::span<const PromptRecord> records,
                                              const std::map<std::string, bool>& decisions);

// Decisions file: one decision per line, tab separated, '#' comments.
//   <keyword>\t<accept|reject>                                          (any group)
//   <class_id>\t<category>\t<feasibility>\t<keyword>\t<accept|reject>   (one group)
class DecisionTable {
 public:
  static DecisionTable load(const std::filesystem::path& path);
  static DecisionTable parse(std::string_view text);

  void set(const std::string& keyword, bool accept);
  void set(int class_id, AttributeCategory category, Feasibility feasibility, const std::string& keyword, bool accept);

  // Map for one group: scoped entries override global ones.
  std::map<std::string, bool> for_group(int class_id, AttributeCategory category, Feasibility feasibility) const;

  // Template listing every record, pre-filled with `accept`.
  static std::string template_for(std::span<const PromptRecord> records);

 private:
  std::map<std::string, bool> global_;
  std::map<std::string, std::map<std::string, bool>> scoped_;
};

struct GroupStats {
  int raw_count = 0;
  int self_filtered_count = 0;
  int manual_count = 0;
};

// Throws Errc::division_by_zero when raw_count is 0.
double acceptance_rate(const GroupStats& stats);

struct GroupKey {
  int class_id = 0;
  AttributeCategory category = AttributeCategory::background;
  Feasibility feasibility = Feasibility::feasible;

  auto operator<=>(const GroupKey&) const = default;
};

// Every record ever generated, grouped per (class, category, feasibility).
// Records dropped by the self-check stay with status raw; manual rejects are
// retained for audit.
struct PromptBank {
  std::vector<PromptRecord> records;

  GroupStats stats(const GroupKey& key) const;
  std::map<GroupKey, GroupStats> all_stats() const;
  std::vector<PromptRecord> group(const GroupKey& key) const;
};

// "a photo of a <class>" plus the attribute clause and optional description.
// Throws Errc::precondition unless the record was manually accepted.
std::string render_prompt(const PromptRecord& record, const ClassEntry& cls);

}  // namespace varireal
