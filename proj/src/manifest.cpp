#include "varireal/manifest.hpp"

#include "varireal/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace varireal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "varireal-manifest";

template <typename T, typename Key>
void upsert_by(std::vector<T>& items, const T& item, Key key) {
  auto it = std::find_if(items.begin(), items.end(), [&](const T& x) { return key(x) == key(item); });
  if (it == items.end())
    items.push_back(item);
  else
    *it = item;
}

template <typename T, typename Pred>
const T* find_by(const std::vector<T>& items, Pred pred) {
  auto it = std::find_if(items.begin(), items.end(), pred);
  return it == items.end() ? nullptr : &*it;
}

json to_json(const ClassEntry& c) {
  return {{"kind", "class"}, {"class_id", c.class_id}, {"name", c.name}, {"dataset_id", c.dataset_id}};
}

json to_json(const PromptRecord& p) {
  return {{"kind", "prompt"},
          {"prompt_id", p.prompt_id},
          {"class_id", p.class_id},
          {"category", to_string(p.category)},
          {"feasibility", to_string(p.feasibility)},
          {"keyword", p.keyword},
          {"description", p.description},
          {"status", to_string(p.status)}};
}

json to_json(const ImageRecord& i) {
  json j = {{"kind", "image"},
            {"image_id", i.image_id},
            {"class_id", i.class_id},
            {"path", i.path},
            {"split", to_string(i.split)},
            {"image_kind", to_string(i.kind)},
            {"filter_status", to_string(i.filter_status)},
            {"seed", i.seed},
            {"attempt", i.attempt}};
  if (i.parent_real_id) j["parent_real_id"] = *i.parent_real_id;
  if (i.prompt_id) j["prompt_id"] = *i.prompt_id;
  return j;
}

json to_json(const VerdictRecord& v) {
  json qs = json::array();
  for (const auto& q : v.questions) qs.push_back({{"text", q.text}, {"expected", q.expected}, {"answered", q.answered}});
  return {{"kind", "verdict"},       {"image_id", v.image_id}, {"attempt", v.attempt}, {"questions", qs},
          {"accepted", v.accepted}, {"indeterminate", v.indeterminate}};
}

json to_json(const FailureRecord& f) {
  return {{"kind", "failure"}, {"job_id", f.job_id}, {"attempt", f.attempt}, {"stage", f.stage},
          {"message", f.message}};
}

json to_json(const StageRecord& s) { return {{"kind", "stage"}, {"name", s.name}, {"completed", s.completed}}; }

json header_json(const Manifest& m) {
  return {{"format", kFormat},
          {"version", kManifestVersion},
          {"dataset_id", m.dataset_id},
          {"pipeline_config_hash", m.pipeline_config_hash},
          {"created_at", m.created_at}};
}

void apply_record(Manifest& m, const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "class") {
    m.upsert(ClassEntry{j.at("class_id").get<int>(), j.at("name").get<std::string>(),
                        j.at("dataset_id").get<std::string>()});
  } else if (kind == "prompt") {
    PromptRecord p;
    p.prompt_id = j.at("prompt_id").get<std::string>();
    p.class_id = j.at("class_id").get<int>();
    p.category = parse_category(j.at("category").get<std::string>());
    p.feasibility = parse_feasibility(j.at("feasibility").get<std::string>());
    p.keyword = j.at("keyword").get<std::string>();
    p.description = j.at("description").get<std::string>();
    p.status = parse_prompt_status(j.at("status").get<std::string>());
    m.upsert(p);
  } else if (kind == "image") {
    ImageRecord i;
    i.image_id = j.at("image_id").get<std::string>();
    i.class_id = j.at("class_id").get<int>();
    i.path = j.at("path").get<std::string>();
    i.split = parse_split(j.at("split").get<std::string>());
    i.kind = parse_image_kind(j.at("image_kind").get<std::string>());
    i.filter_status = parse_filter_status(j.at("filter_status").get<std::string>());
    i.seed = j.at("seed").get<std::uint64_t>();
    i.attempt = j.at("attempt").get<int>();
    if (j.contains("parent_real_id")) i.parent_real_id = j["parent_real_id"].get<std::string>();
    if (j.contains("prompt_id")) i.prompt_id = j["prompt_id"].get<std::string>();
    m.upsert(i);
  } else if (kind == "verdict") {
    VerdictRecord v;
    v.image_id = j.at("image_id").get<std::string>();
    v.attempt = j.at("attempt").get<int>();
    for (const auto& q : j.at("questions"))
      v.questions.push_back({q.at("text").get<std::string>(), q.at("expected").get<std::string>(),
                             q.at("answered").get<std::string>()});
    v.accepted = j.at("accepted").get<bool>();
    v.indeterminate = j.at("indeterminate").get<bool>();
    m.upsert(v);
  } else if (kind == "failure") {
    m.add(FailureRecord{j.at("job_id").get<std::string>(), j.at("attempt").get<int>(),
                        j.at("stage").get<std::string>(), j.at("message").get<std::string>()});
  } else if (kind == "stage") {
    m.upsert(StageRecord{j.at("name").get<std::string>(), j.at("completed").get<bool>()});
  } else if (kind == "config") {
    m.pipeline_config_hash = j.at("pipeline_config_hash").get<std::string>();
  } else {
    throw Error(Errc::schema_error, "unknown record kind '" + kind + "'");
  }
}

}  // namespace

const ClassEntry* Manifest::find_class(int class_id) const {
  return find_by(classes, [&](const ClassEntry& c) { return c.class_id == class_id; });
}

const PromptRecord* Manifest::find_prompt(std::string_view prompt_id) const {
  return find_by(prompts, [&](const PromptRecord& p) { return p.prompt_id == prompt_id; });
}

const ImageRecord* Manifest::find_image(std::string_view image_id) const {
  return find_by(images, [&](const ImageRecord& i) { return i.image_id == image_id; });
}

const VerdictRecord* Manifest::find_verdict(std::string_view image_id) const {
  return find_by(verdicts, [&](const VerdictRecord& v) { return v.image_id == image_id; });
}

bool Manifest::stage_completed(std::string_view name) const {
  const auto* s = find_by(stages, [&](const StageRecord& r) { return r.name == name; });
  return s != nullptr && s->completed;
}

void Manifest::upsert(const ClassEntry& c) { upsert_by(classes, c, [](const ClassEntry& x) { return x.class_id; }); }
void Manifest::upsert(const PromptRecord& p) {
  upsert_by(prompts, p, [](const PromptRecord& x) { return x.prompt_id; });
}
void Manifest::upsert(const ImageRecord& i) { upsert_by(images, i, [](const ImageRecord& x) { return x.image_id; }); }
void Manifest::upsert(const VerdictRecord& v) {
  upsert_by(verdicts, v, [](const VerdictRecord& x) { return x.image_id; });
}
void Manifest::upsert(const StageRecord& s) { upsert_by(stages, s, [](const StageRecord& x) { return x.name; }); }

void Manifest::add(const FailureRecord& f) {
  const bool seen = std::any_of(failures.begin(), failures.end(), [&](const FailureRecord& x) {
    return x.job_id == f.job_id && x.attempt == f.attempt && x.stage == f.stage;
  });
  if (!seen) failures.push_back(f);
}

void Manifest::check_integrity() const {
  std::set<int> class_ids;
  for (const auto& c : classes) {
    if (c.name.empty()) throw Error(Errc::schema_error, "class " + std::to_string(c.class_id) + " has empty name");
    class_ids.insert(c.class_id);
  }
  std::set<std::string> prompt_ids;
  for (const auto& p : prompts) {
    if (!class_ids.count(p.class_id)) throw Error(Errc::schema_error, "prompt " + p.prompt_id + " has dangling class_id");
    validate(p);
    prompt_ids.insert(p.prompt_id);
  }
  std::set<std::string> real_ids;
  for (const auto& i : images)
    if (i.kind == ImageKind::real) real_ids.insert(i.image_id);
  for (const auto& i : images) {
    validate(i);
    if (!class_ids.count(i.class_id)) throw Error(Errc::schema_error, "image " + i.image_id + " has dangling class_id");
    if (i.prompt_id && !prompt_ids.count(*i.prompt_id))
      throw Error(Errc::schema_error, "image " + i.image_id + " has dangling prompt_id " + *i.prompt_id);
    if (i.parent_real_id && !real_ids.count(*i.parent_real_id))
      throw Error(Errc::schema_error, "image " + i.image_id + " has dangling parent_real_id " + *i.parent_real_id);
  }
  for (const auto& v : verdicts)
    if (!find_image(v.image_id)) throw Error(Errc::schema_error, "verdict for unknown image " + v.image_id);
}

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string serialize_manifest(const Manifest& m) {
  std::ostringstream out;
  out << header_json(m).dump() << '\n';
  for (const auto& c : m.classes) out << to_json(c).dump() << '\n';
  for (const auto& p : m.prompts) out << to_json(p).dump() << '\n';
  for (const auto& i : m.images) out << to_json(i).dump() << '\n';
  for (const auto& v : m.verdicts) out << to_json(v).dump() << '\n';
  for (const auto& f : m.failures) out << to_json(f).dump() << '\n';
  for (const auto& s : m.stages) out << to_json(s).dump() << '\n';
  return out.str();
}

Manifest parse_manifest(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::parse_error, "manifest is empty");
  Manifest m;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != kFormat) throw Error(Errc::parse_error, "not a manifest file");
    const int version = header.at("version").get<int>();
    if (version != kManifestVersion)
      throw Error(Errc::schema_version_mismatch,
                  "manifest version " + std::to_string(version) + ", expected " + std::to_string(kManifestVersion));
    m.dataset_id = header.at("dataset_id").get<std::string>();
    m.pipeline_config_hash = header.at("pipeline_config_hash").get<std::string>();
    m.created_at = header.at("created_at").get<std::string>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        apply_record(m, json::parse(line));
      } catch (const json::exception& e) {
        throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  m.check_integrity();
  return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out << serialize_manifest(manifest);
  }
  fs::rename(tmp, path);
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

ManifestStore::ManifestStore(fs::path path, Manifest manifest) : path_(std::move(path)), manifest_(std::move(manifest)) {}

ManifestStore::ManifestStore(ManifestStore&& other) noexcept
    : path_(std::move(other.path_)), manifest_(std::move(other.manifest_)) {}

ManifestStore ManifestStore::create(const fs::path& path, Manifest initial) {
  if (initial.created_at.empty()) initial.created_at = current_timestamp();
  initial.check_integrity();
  save_manifest(initial, path);
  return ManifestStore(path, std::move(initial));
}

ManifestStore ManifestStore::open(const fs::path& path) {
  std::string text;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  // An interrupted append leaves an unterminated last line. Drop it so the
  // next append starts on a fresh line.
  if (!text.empty() && text.back() != '\n') {
    const auto cut = text.rfind('\n');
    if (cut == std::string::npos) throw Error(Errc::parse_error, "manifest header is incomplete: " + path.string());
    spdlog::warn("{}: dropping {} bytes of an interrupted record", path.string(), text.size() - cut - 1);
    text.resize(cut + 1);
    fs::resize_file(path, text.size());
  }
  return ManifestStore(path, parse_manifest(text));
}

Manifest ManifestStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return manifest_;
}

void ManifestStore::write_line(const std::string& line) {
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::io_error, "cannot append to " + path_.string());
  out << line << '\n';
  out.flush();
}

void ManifestStore::append(const ClassEntry& c) {
  std::lock_guard lock(mutex_);
  manifest_.upsert(c);
  write_line(to_json(c).dump());
}

void ManifestStore::append(const PromptRecord& p) {
  std::lock_guard lock(mutex_);
  validate(p);
  if (!manifest_.find_class(p.class_id)) throw Error(Errc::schema_error, "prompt " + p.prompt_id + " has dangling class_id");
  manifest_.upsert(p);
  write_line(to_json(p).dump());
}

void ManifestStore::append(const ImageRecord& i) {
  std::lock_guard lock(mutex_);
  validate(i);
  if (!manifest_.find_class(i.class_id)) throw Error(Errc::schema_error, "image " + i.image_id + " has dangling class_id");
  if (i.prompt_id && !manifest_.find_prompt(*i.prompt_id))
    throw Error(Errc::schema_error, "image " + i.image_id + " has dangling prompt_id");
  if (i.parent_real_id && !manifest_.find_image(*i.parent_real_id))
    throw Error(Errc::schema_error, "image " + i.image_id + " has dangling parent_real_id");
  manifest_.upsert(i);
  write_line(to_json(i).dump());
}

void ManifestStore::append(const VerdictRecord& v) {
  std::lock_guard lock(mutex_);
  if (!manifest_.find_image(v.image_id)) throw Error(Errc::schema_error, "verdict for unknown image " + v.image_id);
  manifest_.upsert(v);
  write_line(to_json(v).dump());
}

void ManifestStore::append(const FailureRecord& f) {
  std::lock_guard lock(mutex_);
  manifest_.add(f);
  write_line(to_json(f).dump());
}

void ManifestStore::append(const StageRecord& s) {
  std::lock_guard lock(mutex_);
  manifest_.upsert(s);
  write_line(to_json(s).dump());
}

void ManifestStore::set_config_hash(const std::string& hash) {
  std::lock_guard lock(mutex_);
  if (manifest_.pipeline_config_hash == hash) return;
  manifest_.pipeline_config_hash = hash;
  write_line(json{{"kind", "config"}, {"pipeline_config_hash", hash}}.dump());
}

}  // namespace varireal
