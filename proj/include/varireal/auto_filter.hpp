#pragma once

#include "varireal/raster.hpp"
#include "varireal/types.hpp"

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace varireal {

struct FilterQuestion {
  std::string text;
  std::vector<std::string> choices{"yes", "no"};
  std::string expected;

  bool operator==(const FilterQuestion&) const = default;
};

// Question templates. "expect" is "yes", "no" or "[FEASIBLE]" (yes iff the
// prompt is feasible). Placeholders: [CLS], [BACKGROUND], [COLOR/TEXTURE].
struct QuestionTemplate {
  std::string text;
  std::string expect;
};

struct FilterTemplates {
  std::vector<QuestionTemplate> background;
  std::vector<QuestionTemplate> appearance;  // color and texture
};

const FilterTemplates& default_filter_templates();
FilterTemplates load_filter_templates(const std::filesystem::path& path);

std::vector<FilterQuestion> build_questions(AttributeCategory category, const std::string& class_name,
                                            const std::string& keyword, Feasibility feasibility,
                                            const FilterTemplates& templates = default_filter_templates());

class VqaBackend {
 public:
  virtual ~VqaBackend() = default;
  virtual std::string ask(const Image& image, const std::string& question, const std::vector<std::string>& choices) = 0;
};

// Replies in order; throws backend_unavailable once exhausted.
class ScriptedVqa : public VqaBackend {
 public:
  explicit ScriptedVqa(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  std::string ask(const Image& image, const std::string& question, const std::vector<std::string>& choices) override;
  const std::vector<std::string>& questions() const { return questions_; }

 private:
  std::deque<std::string> replies_;
  std::vector<std::string> questions_;
};

// Knows the expected answer of every registered question and gives the wrong
// one at a deterministic, hash-based rate (keyed on question and image).
// Unregistered questions get an unusable reply.
class OracleVqa : public VqaBackend {
 public:
  explicit OracleVqa(double flip_rate = 0.0, std::uint64_t salt = 0) : flip_rate_(flip_rate), salt_(salt) {}
  void expect(const FilterQuestion& q) { expected_[q.text] = q.expected; }
  std::string ask(const Image& image, const std::string& question, const std::vector<std::string>& choices) override;

 private:
  double flip_rate_;
  std::uint64_t salt_;
  std::map<std::string, std::string> expected_;
};

// "Yes." / " YES, it is" -> "yes"; anything without a yes/no prefix -> nullopt.
std::optional<std::string> normalize_answer(const std::string& reply);

// One ask per question. Accepted iff every normalized answer equals the
// expectation; a backend error or unusable reply makes it indeterminate.
VerdictRecord filter_image(const std::string& image_id, int attempt, const Image& image,
                           const std::vector<FilterQuestion>& questions, VqaBackend& vqa);

struct RetryPolicy {
  int max_attempts = 3;
  bool regenerate = true;  // false: judge once and drop on rejection
};

struct FilterOutcome {
  ImageRecord record;  // filter_status is accepted or rejected
  VerdictRecord verdict;
  int generations = 0;
};

// Generate, judge, and regenerate with attempt+1 (and its derived seed) on
// rejection, up to the policy's limit.
FilterOutcome filter_and_retry(GenerationJob job, const RetryPolicy& policy,
                               const std::function<ImageRecord(const GenerationJob&)>& generate,
                               const std::function<VerdictRecord(const ImageRecord&)>& judge);

}  // namespace varireal
