#pragma once

#include "varireal/types.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace varireal {

inline constexpr int kManifestVersion = 1;

struct Manifest {
  std::string dataset_id;
  std::vector<ClassEntry> classes;
  std::vector<PromptRecord> prompts;
  std::vector<ImageRecord> images;
  std::vector<VerdictRecord> verdicts;
  std::vector<FailureRecord> failures;
  std::vector<StageRecord> stages;
  std::string pipeline_config_hash;
  std::string created_at;

  bool operator==(const Manifest&) const = default;

  const ClassEntry* find_class(int class_id) const;
  const PromptRecord* find_prompt(std::string_view prompt_id) const;
  const ImageRecord* find_image(std::string_view image_id) const;
  const VerdictRecord* find_verdict(std::string_view image_id) const;
  bool stage_completed(std::string_view name) const;

  // Upserts keep the position of the first occurrence.
  void upsert(const ClassEntry& c);
  void upsert(const PromptRecord& p);
  void upsert(const ImageRecord& i);
  void upsert(const VerdictRecord& v);
  void upsert(const StageRecord& s);
  void add(const FailureRecord& f);

  // Throws Errc::schema_error on any dangling class_id, prompt_id, or parent_real_id.
  void check_integrity() const;
};

std::string current_timestamp();

// Versioned header line followed by one JSON record per line, grouped by section.
std::string serialize_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

// Single writer over a manifest file: every mutation is applied in memory and
// appended as one record line. Later records for the same id supersede earlier
// ones when the file is loaded.
class ManifestStore {
 public:
  static ManifestStore create(const std::filesystem::path& path, Manifest initial);
  static ManifestStore open(const std::filesystem::path& path);

  ManifestStore(ManifestStore&& other) noexcept;

  const std::filesystem::path& path() const { return path_; }
  Manifest snapshot() const;

  void append(const ClassEntry& c);
  void append(const PromptRecord& p);
  void append(const ImageRecord& i);
  void append(const VerdictRecord& v);
  void append(const FailureRecord& f);
  void append(const StageRecord& s);
  void set_config_hash(const std::string& hash);

 private:
  ManifestStore(std::filesystem::path path, Manifest manifest);
  void write_line(const std::string& line);

  std::filesystem::path path_;
  Manifest manifest_;
  mutable std::mutex mutex_;
};

}  // namespace varireal
