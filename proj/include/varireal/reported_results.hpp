#pragma once

#include "varireal/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace varireal {

// Published accuracy triples with their printed gap columns.
struct ReportedDeltaRow {
  std::string regime;   // "syn-only" or "real+syn"
  AttributeCategory category = AttributeCategory::background;
  std::string dataset;  // pets, airc, cars, average
  double f = 0, infeasible = 0, mix = 0;
  double printed_delta1 = 0, printed_delta2 = 0;
};

const std::vector<ReportedDeltaRow>& reported_accuracy_rows();

struct DeltaCheck {
  ReportedDeltaRow row;
  double delta1 = 0, delta2 = 0;  // recomputed, unrounded
  bool delta1_exact = false;      // one-decimal rounding equals the printed value
  bool delta2_within = false;     // |recomputed - printed| <= tolerance
  bool delta2_rounds_to_printed = false;
  bool formula_inconsistent() const { return !delta1_exact || !delta2_within; }
};

std::vector<DeltaCheck> check_reported_deltas(double delta2_tolerance = 0.05);

// Closed range for cells printed as "a~b"; single values have lo == hi.
struct CountRange {
  int lo = 0, hi = 0;
};
struct RateRange {
  double lo = 0, hi = 0;
};

struct ReportedPromptCounts {
  AttributeCategory category = AttributeCategory::background;
  std::string dataset;  // pets, airc, cars
  Feasibility feasibility = Feasibility::feasible;
  int raw = 0;
  CountRange self_filtered;
  CountRange manual;
  RateRange printed_rate;
};

const std::vector<ReportedPromptCounts>& reported_prompt_counts();

struct ReportedHumanStudy {
  std::string category;  // background, color, texture, averaged
  double correctness_f = 0, correctness_if = 0;
  double naturalness_f = 0, naturalness_if = 0;
};

const std::vector<ReportedHumanStudy>& reported_human_study();

struct ReportedSimilarity {
  AttributeCategory category = AttributeCategory::background;
  Feasibility feasibility = Feasibility::feasible;
  double clip = 0, dino = 0, lpips = 0;
};

const std::vector<ReportedSimilarity>& reported_similarity();

}  // namespace varireal
