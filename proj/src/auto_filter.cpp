#include "varireal/auto_filter.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"
#include "varireal/icl_template.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cctype>
#include <fstream>

namespace varireal {

namespace {

FilterTemplates parse_templates(const nlohmann::json& j) {
  FilterTemplates t;
  try {
    for (const char* key : {"background", "appearance"}) {
      auto& dst = std::string(key) == "background" ? t.background : t.appearance;
      for (const auto& q : j.at(key)) {
        QuestionTemplate qt{q.at("text").get<std::string>(), q.at("expect").get<std::string>()};
        if (qt.expect != "yes" && qt.expect != "no" && qt.expect != "[FEASIBLE]")
          throw Error(Errc::config_error, "filter template expectation must be yes, no or [FEASIBLE]");
        dst.push_back(std::move(qt));
      }
      if (dst.empty()) throw Error(Errc::config_error, std::string("no filter questions for ") + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("filter templates: ") + e.what());
  }
  return t;
}

}  // namespace

const FilterTemplates& default_filter_templates() {
  static const FilterTemplates t = parse_templates(nlohmann::json::parse(R"({
    "background": [
      {"text": "Is the object in the image located in the [BACKGROUND] environment?", "expect": "yes"},
      {"text": "Does the image background represent [BACKGROUND]?", "expect": "yes"},
      {"text": "Does the [BACKGROUND] look feasible for the [CLS]?", "expect": "[FEASIBLE]"},
      {"text": "Is it possible for the [CLS] in this image to exist in the real world with its background?", "expect": "[FEASIBLE]"}
    ],
    "appearance": [
      {"text": "Does the image show a [COLOR/TEXTURE] [CLS]?", "expect": "yes"},
      {"text": "Is the [COLOR/TEXTURE] feasible for the [CLS]?", "expect": "[FEASIBLE]"}
    ]
  })"));
  return t;
}

FilterTemplates load_filter_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read filter templates " + path.string());
  try {
    return parse_templates(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse_error, std::string("filter templates: ") + e.what());
  }
}

std::vector<FilterQuestion> build_questions(AttributeCategory category, const std::string& class_name,
                                            const std::string& keyword, Feasibility feasibility,
                                            const FilterTemplates& templates) {
  const bool bg = category == AttributeCategory::background;
  const auto& list = bg ? templates.background : templates.appearance;
  std::vector<FilterQuestion> out;
  for (const auto& t : list) {
    FilterQuestion q;
    q.text = replace_all(replace_all(t.text, "[CLS]", class_name), bg ? "[BACKGROUND]" : "[COLOR/TEXTURE]", keyword);
    if (t.expect == "[FEASIBLE]")
      q.expected = feasibility == Feasibility::feasible ? "yes" : "no";
    else
      q.expected = t.expect;
    out.push_back(std::move(q));
  }
  return out;
}

std::string ScriptedVqa::ask(const Image&, const std::string& question, const std::vector<std::string>&) {
  questions_.push_back(question);
  if (replies_.empty()) throw Error(Errc::backend_unavailable, "scripted VQA has no replies left");
  auto r = replies_.front();
  replies_.pop_front();
  return r;
}

std::string OracleVqa::ask(const Image& image, const std::string& question, const std::vector<std::string>&) {
  auto it = expected_.find(question);
  if (it == expected_.end()) return "I cannot tell.";
  const std::string_view pixels(reinterpret_cast<const char*>(image.data.data()), image.data.size());
  const std::uint64_t h = mix64(stable_hash({question, pixels}) ^ salt_);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  const bool flip = u < flip_rate_;
  const bool yes = (it->second == "yes") != flip;
  return yes ? "Yes." : "No.";
}

std::optional<std::string> normalize_answer(const std::string& reply) {
  std::string s;
  for (char c : reply) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u) || std::isspace(u)) s += static_cast<char>(std::tolower(u));
  }
  const auto start = s.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) return std::nullopt;
  s.erase(0, start);
  auto word_is = [&](std::string_view w) {
    return s.compare(0, w.size(), w) == 0 && (s.size() == w.size() || !std::isalpha(static_cast<unsigned char>(s[w.size()])));
  };
  if (word_is("yes")) return "yes";
  if (word_is("no")) return "no";
  return std::nullopt;
}

VerdictRecord filter_image(const std::string& image_id, int attempt, const Image& image,
                           const std::vector<FilterQuestion>& questions, VqaBackend& vqa) {
  if (questions.empty()) throw Error(Errc::invalid_argument, "filter_image needs at least one question");
  VerdictRecord v;
  v.image_id = image_id;
  v.attempt = attempt;
  bool all_match = true;
  for (const auto& q : questions) {
    AnsweredQuestion a{q.text, q.expected, ""};
    try {
      if (auto norm = normalize_answer(vqa.ask(image, q.text, q.choices)))
        a.answered = *norm;
      else
        v.indeterminate = true;
    } catch (const std::exception& e) {
      spdlog::warn("VQA failed on {}: {}", image_id, e.what());
      v.indeterminate = true;
    }
    if (a.answered != a.expected) all_match = false;
    v.questions.push_back(std::move(a));
  }
  v.accepted = all_match && !v.indeterminate;
  return v;
}

FilterOutcome filter_and_retry(GenerationJob job, const RetryPolicy& policy,
                               const std::function<ImageRecord(const GenerationJob&)>& generate,
                               const std::function<VerdictRecord(const ImageRecord&)>& judge) {
  if (policy.max_attempts < 1) throw Error(Errc::invalid_argument, "max_attempts must be >= 1");
  const int limit = policy.regenerate ? policy.max_attempts : 1;
  FilterOutcome out;
  for (int attempt = job.attempt; attempt < job.attempt + limit; ++attempt) {
    GenerationJob current = job;
    current.attempt = attempt;
    current.seed = derive_seed(job.real_image_id, job.prompt_id, attempt);
    out.record = generate(current);
    ++out.generations;
    out.verdict = judge(out.record);
    if (out.verdict.accepted) {
      out.record.filter_status = FilterStatus::accepted;
      return out;
    }
  }
  out.record.filter_status = FilterStatus::rejected;
  return out;
}

}  // namespace varireal
