#include "varireal/annotation.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"
#include "varireal/prompt_forge.hpp"
#include "varireal/scaling.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace varireal {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<AnnotationItem> sample_annotation_items(const Manifest& manifest, int per_group, std::uint64_t seed) {
  if (per_group < 1) throw Error(Errc::invalid_argument, "per_group must be >= 1");
  std::map<std::pair<AttributeCategory, Feasibility>, std::vector<AnnotationItem>> groups;
  for (const auto& img : manifest.images) {
    if (img.kind != ImageKind::synthetic || img.filter_status != FilterStatus::accepted || !img.prompt_id) continue;
    const PromptRecord* p = manifest.find_prompt(*img.prompt_id);
    const ClassEntry* cls = manifest.find_class(img.class_id);
    if (!p || !cls) continue;
    groups[{p->category, p->feasibility}].push_back(
        {img.image_id, render_prompt(*p, *cls), p->category, p->feasibility, img.path});
  }
  std::vector<AnnotationItem> out;
  for (auto& [key, items] : groups) {
    std::sort(items.begin(), items.end(), [](auto& a, auto& b) { return a.image_id < b.image_id; });
    const auto group_seed = mix64(seed ^ stable_hash({"annotation", to_string(key.first), to_string(key.second)}));
    auto picked = nested_subsample(items, static_cast<std::size_t>(per_group), group_seed);
    out.insert(out.end(), picked.begin(), picked.end());
  }
  return out;
}

json to_json(const AnnotationItem& item) {
  return {{"image_id", item.image_id},
          {"prompt", item.prompt},
          {"category", to_string(item.category)},
          {"feasibility", to_string(item.feasibility)}};
}

json to_json(const Rating& r) {
  return {{"annotator", r.annotator},
          {"image_id", r.image_id},
          {"feasibility_correct", r.feasibility_correct},
          {"naturalness", r.naturalness},
          {"timestamp", r.timestamp}};
}

void validate(const Rating& r) {
  if (r.annotator.empty()) throw Error(Errc::invalid_argument, "rating has no annotator");
  if (r.image_id.empty()) throw Error(Errc::invalid_argument, "rating has no image_id");
  if (r.naturalness < 1 || r.naturalness > 5)
    throw Error(Errc::invalid_argument, "naturalness must be an integer from 1 to 5");
}

Rating rating_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "rating must be an object");
  Rating r;
  auto str = [&](const char* k) -> std::string {
    auto it = j.find(k);
    if (it == j.end() || !it->is_string()) throw Error(Errc::invalid_argument, std::string("rating needs string ") + k);
    return it->get<std::string>();
  };
  r.annotator = str("annotator");
  r.image_id = str("image_id");
  auto fc = j.find("feasibility_correct");
  if (fc == j.end() || !fc->is_boolean()) throw Error(Errc::invalid_argument, "rating needs boolean feasibility_correct");
  r.feasibility_correct = fc->get<bool>();
  auto nat = j.find("naturalness");
  if (nat == j.end() || !nat->is_number_integer())
    throw Error(Errc::invalid_argument, "naturalness must be an integer from 1 to 5");
  const auto n = nat->get<long long>();
  if (n < 1 || n > 5) throw Error(Errc::invalid_argument, "naturalness must be an integer from 1 to 5");
  r.naturalness = static_cast<int>(n);
  if (auto ts = j.find("timestamp"); ts != j.end() && ts->is_string()) r.timestamp = ts->get<std::string>();
  validate(r);
  return r;
}

RatingStore::RatingStore(fs::path path) : path_(std::move(path)) {
  if (!fs::exists(path_)) return;
  std::string text;
  {
    std::ifstream in(path_, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  // A torn final line from an interrupted write is cut off so the next
  // append starts cleanly.
  if (!text.empty() && text.back() != '\n') {
    const auto cut = text.rfind('\n');
    text.resize(cut == std::string::npos ? 0 : cut + 1);
    spdlog::warn("{}: dropping an interrupted rating", path_.string());
    fs::resize_file(path_, text.size());
  }
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      Rating r = rating_from_json(json::parse(line));
      ratings_[{r.annotator, r.image_id}] = r;
    } catch (const std::exception& e) {
      spdlog::warn("{}:{}: skipping unreadable rating ({})", path_.string(), lineno, e.what());
    }
  }
}

void RatingStore::put(Rating rating) {
  validate(rating);
  if (rating.timestamp.empty()) rating.timestamp = current_timestamp();
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(Errc::io_error, "cannot append to " + path_.string());
  out << to_json(rating).dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::io_error, "write failed: " + path_.string());
  ratings_[{rating.annotator, rating.image_id}] = std::move(rating);
}

std::vector<Rating> RatingStore::all() const {
  std::lock_guard lock(mutex_);
  std::vector<Rating> out;
  for (const auto& [k, r] : ratings_) out.push_back(r);
  return out;
}

std::set<std::string> RatingStore::rated_by(const std::string& annotator) const {
  std::lock_guard lock(mutex_);
  std::set<std::string> out;
  for (auto it = ratings_.lower_bound({annotator, ""}); it != ratings_.end() && it->first.first == annotator; ++it)
    out.insert(it->first.second);
  return out;
}

std::size_t RatingStore::size() const {
  std::lock_guard lock(mutex_);
  return ratings_.size();
}

AnnotationSession::AnnotationSession(std::vector<AnnotationItem> items, std::uint64_t seed)
    : items_(std::move(items)), seed_(seed) {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (!index_.emplace(items_[i].image_id, i).second)
      throw Error(Errc::invalid_argument, "duplicate annotation item " + items_[i].image_id);
}

const AnnotationItem* AnnotationSession::find(const std::string& image_id) const {
  auto it = index_.find(image_id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

std::vector<std::size_t> AnnotationSession::order_for(const std::string& annotator) const {
  return nested_order(items_.size(), mix64(seed_ ^ fnv1a64(annotator)));
}

std::optional<AnnotationItem> AnnotationSession::next(const std::string& annotator, const RatingStore& store) const {
  const auto done = store.rated_by(annotator);
  for (std::size_t i : order_for(annotator))
    if (!done.count(items_[i].image_id)) return items_[i];
  return std::nullopt;
}

void AnnotationSession::rate(Rating rating, RatingStore& store) const {
  validate(rating);
  if (!find(rating.image_id)) throw Error(Errc::not_found, "unknown annotation item " + rating.image_id);
  store.put(std::move(rating));
}

Progress AnnotationSession::progress(const std::string& annotator, const RatingStore& store) const {
  Progress p{0, items_.size()};
  for (const auto& id : store.rated_by(annotator)) p.rated += find(id) != nullptr;
  return p;
}

json AnnotationSession::to_json() const {
  json items = json::array();
  for (const auto& it : items_) {
    json j = varireal::to_json(it);
    j["path"] = it.path;
    items.push_back(j);
  }
  return {{"seed", seed_}, {"items", items}};
}

AnnotationSession AnnotationSession::from_json(const json& j) {
  try {
    std::vector<AnnotationItem> items;
    for (const auto& it : j.at("items"))
      items.push_back({it.at("image_id"), it.at("prompt"), parse_category(it.at("category").get<std::string>()),
                       parse_feasibility(it.at("feasibility").get<std::string>()), it.at("path")});
    return AnnotationSession(std::move(items), j.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw Error(Errc::schema_error, std::string("annotation session: ") + e.what());
  }
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::vector<AggregateRow> aggregate_ratings(const std::vector<Rating>& ratings,
                                            const std::vector<AnnotationItem>& items) {
  std::map<std::string, const AnnotationItem*> by_id;
  for (const auto& it : items) by_id[it.image_id] = &it;
  struct Acc {
    std::size_t n = 0, correct = 0;
    long long natural = 0;
  };
  std::map<AttributeCategory, std::array<Acc, 2>> acc;
  for (const auto& r : ratings) {
    auto it = by_id.find(r.image_id);
    if (it == by_id.end()) throw Error(Errc::not_found, "rating for unknown item " + r.image_id);
    auto& a = acc[it->second->category][it->second->feasibility == Feasibility::feasible ? 0 : 1];
    ++a.n;
    a.correct += r.feasibility_correct;
    a.natural += r.naturalness;
  }
  auto cell = [](const Acc& a) {
    AggregateCell c;
    c.count = a.n;
    if (a.n > 0) {
      c.correctness = 100.0 * static_cast<double>(a.correct) / static_cast<double>(a.n);
      c.naturalness = static_cast<double>(a.natural) / static_cast<double>(a.n);
    }
    return c;
  };
  std::vector<AggregateRow> rows;
  for (auto cat : kAllCategories) {
    auto it = acc.find(cat);
    if (it == acc.end()) continue;
    rows.push_back({std::string(to_string(cat)), cell(it->second[0]), cell(it->second[1])});
  }
  if (rows.empty()) return rows;
  AggregateRow avg{"averaged", {}, {}};
  auto mean_into = [&](AggregateCell AggregateRow::*member) {
    std::size_t n = 0;
    for (const auto& row : rows) {
      const AggregateCell& c = row.*member;
      if (c.count == 0) continue;
      (avg.*member).correctness += c.correctness;
      (avg.*member).naturalness += c.naturalness;
      (avg.*member).count += c.count;
      ++n;
    }
    if (n > 0) {
      (avg.*member).correctness /= static_cast<double>(n);
      (avg.*member).naturalness /= static_cast<double>(n);
    }
  };
  mean_into(&AggregateRow::feasible);
  mean_into(&AggregateRow::infeasible);
  rows.push_back(avg);
  return rows;
}

std::string format_aggregate_table(const std::vector<AggregateRow>& rows) {
  std::ostringstream o;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %14s %14s %12s %12s\n", "category", "correct F (%)", "correct IF (%)",
                "natural F", "natural IF");
  o << buf;
  auto num = [](const AggregateCell& c, double v) {
    char s[32];
    if (c.count == 0) return std::string("-");
    std::snprintf(s, sizeof s, "%.2f", round2(v));
    return std::string(s);
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %14s %14s %12s %12s\n", r.category.c_str(),
                  num(r.feasible, r.feasible.correctness).c_str(), num(r.infeasible, r.infeasible.correctness).c_str(),
                  num(r.feasible, r.feasible.naturalness).c_str(), num(r.infeasible, r.infeasible.naturalness).c_str());
    o << buf;
  }
  return o.str();
}

json to_json(const std::vector<AggregateRow>& rows) {
  json out = json::array();
  auto cell = [](const AggregateCell& c) {
    if (c.count == 0) return json{{"count", 0}, {"correctness", nullptr}, {"naturalness", nullptr}};
    return json{{"count", c.count}, {"correctness", round2(c.correctness)}, {"naturalness", round2(c.naturalness)}};
  };
  for (const auto& r : rows)
    out.push_back({{"category", r.category}, {"feasible", cell(r.feasible)}, {"infeasible", cell(r.infeasible)}});
  return out;
}

std::string export_ratings_tsv(const std::vector<Rating>& ratings, const std::vector<AnnotationItem>& items) {
  std::map<std::string, const AnnotationItem*> by_id;
  for (const auto& it : items) by_id[it.image_id] = &it;
  std::ostringstream o;
  o << "annotator\timage_id\tcategory\tfeasibility\tfeasibility_correct\tnaturalness\ttimestamp\n";
  auto clean = [](std::string s) {
    std::replace(s.begin(), s.end(), '\t', ' ');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  for (const auto& r : ratings) {
    auto it = by_id.find(r.image_id);
    o << clean(r.annotator) << '\t' << r.image_id << '\t'
      << (it != by_id.end() ? to_string(it->second->category) : "") << '\t'
      << (it != by_id.end() ? to_string(it->second->feasibility) : "") << '\t'
      << (r.feasibility_correct ? "yes" : "no") << '\t' << r.naturalness << '\t' << r.timestamp << '\n';
  }
  return o.str();
}

}  // namespace varireal
