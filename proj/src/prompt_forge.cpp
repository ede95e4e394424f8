#include "varireal/prompt_forge.hpp"

#include "varireal/error.hpp"
#include "varireal/list_reply.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace varireal {

namespace {

std::string category_code(AttributeCategory c) {
  switch (c) {
    case AttributeCategory::background: return "bg";
    case AttributeCategory::color: return "co";
    case AttributeCategory::texture: return "tx";
  }
  return "??";
}

std::vector<AttributeItem> ask_for_list(LlmBackend& llm, const Conversation& conversation) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string reply = llm.send(conversation);
    if (auto items = parse_attribute_list(reply)) return *items;
    spdlog::warn("LLM reply is not a list (attempt {}): {}", attempt + 1, reply.substr(0, 120));
  }
  throw Error(Errc::malformed_reply, "LLM reply could not be parsed as a list after one retry");
}

std::string group_scope(int class_id, AttributeCategory category, Feasibility feasibility) {
  return std::to_string(class_id) + "|" + std::string(to_string(category)) + "|" + std::string(to_string(feasibility));
}

bool parse_decision(const std::string& s) {
  if (s == "accept" || s == "yes" || s == "1") return true;
  if (s == "reject" || s == "no" || s == "0") return false;
  throw Error(Errc::parse_error, "decision must be accept or reject, got '" + s + "'");
}

}  // namespace

std::string prompt_group_prefix(int class_id, AttributeCategory category, Feasibility feasibility) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%03d-%s-%s", class_id, category_code(category).c_str(),
                feasibility == Feasibility::feasible ? "f" : "if");
  return buf;
}

std::vector<PromptRecord> generate_attributes(const ClassEntry& cls, AttributeCategory category,
                                              Feasibility feasibility, int n, LlmBackend& llm,
                                              const IclTemplate& icl, int first_index) {
  if (n < 1) throw Error(Errc::invalid_argument, "n must be at least 1");
  const Conversation conversation{{"user", icl.render(attribute_phrase(category, feasibility), cls.name, n)}};
  const auto items = ask_for_list(llm, conversation);

  std::vector<PromptRecord> out;
  std::set<std::string> seen;
  const std::string prefix = prompt_group_prefix(cls.class_id, category, feasibility);
  for (const auto& item : items) {
    if (static_cast<int>(out.size()) >= n) break;
    const std::string norm = normalize_keyword(item.keyword);
    if (norm.empty() || !seen.insert(norm).second) continue;
    if (item.keyword.find(',') != std::string::npos) {
      spdlog::warn("dropping keyword with a comma: '{}'", item.keyword);
      continue;
    }
    PromptRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "-%03d", first_index + static_cast<int>(out.size()));
    r.prompt_id = prefix + id;
    r.class_id = cls.class_id;
    r.category = category;
    r.feasibility = feasibility;
    r.keyword = item.keyword;
    r.description = category == AttributeCategory::color ? "" : item.description;
    r.status = PromptStatus::raw;
    if (category != AttributeCategory::color && r.description.empty()) {
      spdlog::warn("dropping '{}': no description", item.keyword);
      continue;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PromptRecord> self_filter(std::span<const PromptRecord> records, const ClassEntry& cls, LlmBackend& llm,
                                      const IclTemplate& icl) {
  if (records.empty()) return {};
  for (const auto& r : records)
    if (r.status != PromptStatus::raw) throw Error(Errc::precondition, "self_filter expects raw records: " + r.prompt_id);
  const auto category = records.front().category;
  const auto feasibility = records.front().feasibility;

  std::vector<AttributeItem> previous;
  for (const auto& r : records) previous.push_back({r.keyword, r.description});
  const Conversation conversation{
      {"user", icl.render(attribute_phrase(category, feasibility), cls.name, static_cast<int>(records.size()))},
      {"assistant", format_attribute_list(previous)},
      {"user", self_check_question(category, feasibility, cls.name)}};
  const auto kept_items = ask_for_list(llm, conversation);

  std::set<std::string> kept;
  for (const auto& item : kept_items) kept.insert(normalize_keyword(item.keyword));
  std::set<std::string> known;
  for (const auto& r : records) known.insert(normalize_keyword(r.keyword));
  for (const auto& k : kept)
    if (!known.count(k)) spdlog::warn("self-check introduced unknown keyword '{}'; ignored", k);

  std::vector<PromptRecord> out;
  for (const auto& r : records) {
    if (!kept.count(normalize_keyword(r.keyword))) continue;
    PromptRecord s = r;
    s.status = PromptStatus::self_filtered;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PromptRecord> apply_manual_filter(std::span<const PromptRecord> records,
                                              const std::map<std::string, bool>& decisions) {
  std::map<std::string, bool> normalized;
  for (const auto& [k, v] : decisions) normalized[normalize_keyword(k)] = v;
  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto it = normalized.find(normalize_keyword(r.keyword));
    if (it == normalized.end()) throw Error(Errc::missing_decision, "no decision for keyword '" + r.keyword + "'");
    PromptRecord d = r;
    d.status = it->second ? PromptStatus::manual_accepted : PromptStatus::manual_rejected;
    out.push_back(std::move(d));
  }
  return out;
}

DecisionTable DecisionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read decisions file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

DecisionTable DecisionTable::parse(std::string_view text) {
  DecisionTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find('\t', start)) != std::string::npos; start = pos + 1)
      fields.push_back(line.substr(start, pos - start));
    fields.push_back(line.substr(start));
    if (fields.size() == 2) {
      table.set(fields[0], parse_decision(fields[1]));
    } else if (fields.size() == 5) {
      table.set(std::stoi(fields[0]), parse_category(fields[1]), parse_feasibility(fields[2]), fields[3],
                parse_decision(fields[4]));
    } else {
      throw Error(Errc::parse_error, "decisions line " + std::to_string(line_no) + " needs 2 or 5 tab-separated fields");
    }
  }
  return table;
}

void DecisionTable::set(const std::string& keyword, bool accept) { global_[normalize_keyword(keyword)] = accept; }

void DecisionTable::set(int class_id, AttributeCategory category, Feasibility feasibility, const std::string& keyword,
                        bool accept) {
  scoped_[group_scope(class_id, category, feasibility)][normalize_keyword(keyword)] = accept;
}

std::map<std::string, bool> DecisionTable::for_group(int class_id, AttributeCategory category,
                                                     Feasibility feasibility) const {
  auto out = global_;
  auto it = scoped_.find(group_scope(class_id, category, feasibility));
  if (it != scoped_.end())
    for (const auto& [k, v] : it->second) out[k] = v;
  return out;
}

std::string DecisionTable::template_for(std::span<const PromptRecord> records) {
  std::ostringstream out;
  out << "# class_id\tcategory\tfeasibility\tkeyword\taccept|reject\n";
  for (const auto& r : records)
    out << r.class_id << '\t' << to_string(r.category) << '\t' << to_string(r.feasibility) << '\t' << r.keyword
        << "\taccept\n";
  return out.str();
}

double acceptance_rate(const GroupStats& stats) {
  if (stats.raw_count <= 0) throw Error(Errc::division_by_zero, "raw_count is zero");
  return static_cast<double>(stats.manual_count) / stats.raw_count;
}

GroupStats PromptBank::stats(const GroupKey& key) const {
  GroupStats s;
  for (const auto& r : records) {
    if (r.class_id != key.class_id || r.category != key.category || r.feasibility != key.feasibility) continue;
    ++s.raw_count;
    if (r.status != PromptStatus::raw) ++s.self_filtered_count;
    if (r.status == PromptStatus::manual_accepted) ++s.manual_count;
  }
  return s;
}

std::map<GroupKey, GroupStats> PromptBank::all_stats() const {
  std::map<GroupKey, GroupStats> out;
  for (const auto& r : records) {
    GroupKey key{r.class_id, r.category, r.feasibility};
    if (!out.count(key)) out[key] = stats(key);
  }
  return out;
}

std::vector<PromptRecord> PromptBank::group(const GroupKey& key) const {
  std::vector<PromptRecord> out;
  for (const auto& r : records)
    if (r.class_id == key.class_id && r.category == key.category && r.feasibility == key.feasibility) out.push_back(r);
  return out;
}

std::string render_prompt(const PromptRecord& record, const ClassEntry& cls) {
  if (record.status != PromptStatus::manual_accepted)
    throw Error(Errc::precondition, "prompt " + record.prompt_id + " is not accepted");
  std::string text = "a photo of a ";
  if (record.category == AttributeCategory::background)
    text += cls.name + " in the " + record.keyword;
  else
    text += record.keyword + " " + cls.name;
  if (!record.description.empty()) text += ", " + record.description;
  return text;
}

}  // namespace varireal
