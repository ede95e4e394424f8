#pragma once

#include "varireal/manifest.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace varireal {

struct AnnotationItem {
  std::string image_id;
  std::string prompt;  // rendered
  AttributeCategory category = AttributeCategory::background;
  Feasibility feasibility = Feasibility::feasible;  // claimed by the prompt
  std::string path;    // relative to the workspace; never sent to clients

  bool operator==(const AnnotationItem&) const = default;
};

struct Rating {
  std::string annotator;
  std::string image_id;
  bool feasibility_correct = false;
  int naturalness = 0;  // 1..5
  std::string timestamp;

  bool operator==(const Rating&) const = default;
};

// Up to per_group accepted synthetic images from every (category, feasibility)
// group, chosen by a seeded shuffle of the sorted ids.
std::vector<AnnotationItem> sample_annotation_items(const Manifest& manifest, int per_group, std::uint64_t seed);

nlohmann::json to_json(const AnnotationItem& item);  // without the path
nlohmann::json to_json(const Rating& rating);
// Throws invalid_argument for a missing field or a naturalness outside 1..5.
Rating rating_from_json(const nlohmann::json& j);
void validate(const Rating& rating);

// One rating per (annotator, image); later submissions overwrite. Persisted as
// append-only JSON lines, folded last-wins on open.
class RatingStore {
 public:
  explicit RatingStore(std::filesystem::path path);

  void put(Rating rating);
  std::vector<Rating> all() const;  // sorted by (annotator, image_id)
  std::set<std::string> rated_by(const std::string& annotator) const;
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  std::map<std::pair<std::string, std::string>, Rating> ratings_;
  mutable std::mutex mutex_;
};

struct Progress {
  std::size_t rated = 0;
  std::size_t total = 0;
};

// Items plus a stable per-annotator presentation order.
class AnnotationSession {
 public:
  AnnotationSession(std::vector<AnnotationItem> items, std::uint64_t seed);

  const std::vector<AnnotationItem>& items() const { return items_; }
  const AnnotationItem* find(const std::string& image_id) const;
  std::vector<std::size_t> order_for(const std::string& annotator) const;
  // First item in the annotator's order without a rating, or nullopt when done.
  std::optional<AnnotationItem> next(const std::string& annotator, const RatingStore& store) const;
  // Validates and stores; throws not_found for an unknown item.
  void rate(Rating rating, RatingStore& store) const;
  Progress progress(const std::string& annotator, const RatingStore& store) const;

  nlohmann::json to_json() const;
  static AnnotationSession from_json(const nlohmann::json& j);

 private:
  std::vector<AnnotationItem> items_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t seed_;
};

struct AggregateCell {
  std::size_t count = 0;
  double correctness = 0;  // percent of ratings with feasibility_correct
  double naturalness = 0;  // mean score
};

struct AggregateRow {
  std::string category;  // background, color, texture, averaged
  AggregateCell feasible;
  AggregateCell infeasible;
};

// Rows for each category present, then "averaged" as the plain mean of the
// category rows. Ratings of unknown items throw not_found.
std::vector<AggregateRow> aggregate_ratings(const std::vector<Rating>& ratings,
                                            const std::vector<AnnotationItem>& items);

double round2(double v);
std::string format_aggregate_table(const std::vector<AggregateRow>& rows);
nlohmann::json to_json(const std::vector<AggregateRow>& rows);

// Tab-separated: annotator, image_id, category, feasibility, feasibility_correct, naturalness, timestamp.
std::string export_ratings_tsv(const std::vector<Rating>& ratings, const std::vector<AnnotationItem>& items);

}  // namespace varireal
