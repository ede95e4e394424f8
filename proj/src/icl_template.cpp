#include "varireal/icl_template.hpp"

#include "varireal/error.hpp"

#include <fstream>
#include <sstream>

namespace varireal {

namespace {

constexpr const char* kPlaceholders[] = {"[Attribute]", "[CLASS]", "[NUMBER]"};

const char* kDefaultTemplate = R"(## task
Task: As an AI language model, generate [Attribute] where the given class of objects typically exists ('feasible') and where they absolutely cannot exist ('unfeasible'). For each [Attribute], provide a one-sentence description detailing its visual appearance. You should adhere to the specified criteria.
## criteria
Unique [Attribute]: Ensure each listed [Attribute] is distinct and not synonymous with others provided.
Empty List Handling: If no [Attribute] can be identified, use 'EMPTY' to denote this.
Format Requirement: Answers must be formatted as a Python list, following the structure shown in the 'Answer' section of the 'Example'.
## positive_example
Object Class: [CLASS]
Question: Provide five different [Attribute] for the object class, each accompanied by a concise visual description.
Answer: [("first attribute", "One sentence describing how it looks."), ("second attribute", "One sentence describing how it looks."), ("third attribute", "One sentence describing how it looks."), ("fourth attribute", "One sentence describing how it looks."), ("fifth attribute", "One sentence describing how it looks.")]
## negative_example
The answers are not acceptable as follows: ["first attribute", "first attribute again", "a synonym of the first attribute"]
Reasons: entries repeat or are synonyms of each other, and no visual descriptions are given.
## question
Please give me [NUMBER] different [Attribute] for the class [CLASS]; in the meantime, also give me corresponding detailed descriptions for the given [Attribute].
)";

IclTemplate parse_template(std::istream& in) {
  IclTemplate t;
  std::string section, line;
  auto append = [](std::string& dst, const std::string& l) {
    if (!dst.empty()) dst += '\n';
    dst += l;
  };
  while (std::getline(in, line)) {
    if (line.rfind("## ", 0) == 0) {
      section = line.substr(3);
      continue;
    }
    if (section == "task") append(t.task_text, line);
    else if (section == "criteria") { if (!line.empty()) t.criteria.push_back(line); }
    else if (section == "positive_example") append(t.positive_example, line);
    else if (section == "negative_example") append(t.negative_example_with_reasons, line);
    else if (section == "question") append(t.question_text, line);
    else if (!line.empty()) throw Error(Errc::config_error, "template text outside a known section: " + line);
  }
  t.validate();
  return t;
}

}  // namespace

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  if (from.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

void IclTemplate::validate() const {
  for (const char* p : kPlaceholders)
    if (question_text.find(p) == std::string::npos)
      throw Error(Errc::config_error, std::string("question text lacks placeholder ") + p);
  if (task_text.empty()) throw Error(Errc::config_error, "template has no task text");
}

std::string IclTemplate::render(const std::string& attribute, const std::string& class_name, int number) const {
  std::ostringstream out;
  out << task_text << "\n\nCriteria:\n";
  for (std::size_t i = 0; i < criteria.size(); ++i) out << (i + 1) << ". " << criteria[i] << '\n';
  out << "\nPositive Example:\n" << positive_example << "\n\nNegative Examples:\n" << negative_example_with_reasons
      << "\n\nQuestion: " << question_text << '\n';
  std::string text = out.str();
  text = replace_all(text, "[Attribute]", attribute);
  text = replace_all(text, "[CLASS]", class_name);
  text = replace_all(text, "[NUMBER]", std::to_string(number));
  return text;
}

IclTemplate default_icl_template() {
  std::istringstream in(kDefaultTemplate);
  return parse_template(in);
}

IclTemplate load_icl_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read template " + path.string());
  return parse_template(in);
}

std::string attribute_phrase(AttributeCategory category, Feasibility feasibility) {
  std::string noun;
  switch (category) {
    case AttributeCategory::background: noun = "backgrounds"; break;
    case AttributeCategory::color: noun = "colors"; break;
    case AttributeCategory::texture: noun = "textures"; break;
  }
  return (feasibility == Feasibility::feasible ? "feasible " : "unfeasible ") + noun;
}

std::string self_check_question(AttributeCategory category, Feasibility feasibility, const std::string& class_name) {
  return "Can you modify or filter your answers to ensure each " + std::string(to_string(category)) +
         " is definitely " + std::string(to_string(feasibility)) + " for class " + class_name +
         "? Please delete and ignore some of the answers if you can't guarantee them.";
}

}  // namespace varireal
