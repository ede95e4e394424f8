#include "varireal/pipeline_config.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"

#include <fstream>
#include <set>

namespace varireal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKeys{"dataset_id", "workspace",      "manifest",        "backends",   "categories",
                                  "prompt_counts", "decisions",   "icl_template",    "color_bank", "filter_templates",
                                  "k",            "edit",          "retry",           "train",      "encoder",
                                  "scale_ratios", "annotation_per_group", "parallelism", "seed"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::config_error, where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw Error(Errc::config_error, "unknown key '" + k + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

json backends_json(const BackendSelection& b) {
  return {{"llm", b.llm},           {"llm_url", b.llm_url},       {"llm_drop_every", b.llm_drop_every},
          {"diffusion", b.diffusion}, {"inpaint", b.inpaint},     {"control", b.control},
          {"detector", b.detector}, {"segmenter", b.segmenter},   {"matting", b.matting},
          {"vqa", b.vqa},           {"vqa_url", b.vqa_url},       {"vqa_flip_rate", b.vqa_flip_rate},
          {"encoder", b.encoder},   {"contrast_tolerance", b.contrast_tolerance}};
}

BackendSelection backends_from_json(const json& j) {
  BackendSelection b;
  check_keys(j, {"llm", "llm_url", "llm_drop_every", "diffusion", "inpaint", "control", "detector", "segmenter",
                 "matting", "vqa", "vqa_url", "vqa_flip_rate", "encoder", "contrast_tolerance"},
             "backends");
  read(j, "llm", b.llm);
  read(j, "llm_url", b.llm_url);
  read(j, "llm_drop_every", b.llm_drop_every);
  read(j, "diffusion", b.diffusion);
  read(j, "inpaint", b.inpaint);
  read(j, "control", b.control);
  read(j, "detector", b.detector);
  read(j, "segmenter", b.segmenter);
  read(j, "matting", b.matting);
  read(j, "vqa", b.vqa);
  read(j, "vqa_url", b.vqa_url);
  read(j, "vqa_flip_rate", b.vqa_flip_rate);
  read(j, "encoder", b.encoder);
  read(j, "contrast_tolerance", b.contrast_tolerance);
  return b;
}

json encoder_json(const ToyEncoderShape& s) {
  return {{"grid", s.grid},   {"hidden", s.hidden}, {"embed", s.embed},   {"text_buckets", s.text_buckets},
          {"rank", s.rank},   {"alpha", s.alpha},   {"scaled", s.scaled}, {"logit_scale", s.logit_scale}};
}

ToyEncoderShape encoder_from_json(const json& j) {
  check_keys(j, {"grid", "hidden", "embed", "text_buckets", "rank", "alpha", "scaled", "logit_scale"}, "encoder");
  ToyEncoderShape s;
  read(j, "grid", s.grid);
  read(j, "hidden", s.hidden);
  read(j, "embed", s.embed);
  read(j, "text_buckets", s.text_buckets);
  read(j, "rank", s.rank);
  read(j, "alpha", s.alpha);
  read(j, "scaled", s.scaled);
  read(j, "logit_scale", s.logit_scale);
  return s;
}

}  // namespace

fs::path PipelineConfig::manifest_path() const { return manifest.is_absolute() ? manifest : workspace / manifest; }

EditConfigTable PipelineConfig::edit_table() const {
  json layers = EditConfigTable::builtin_json();
  layers.merge_patch(edit_overrides);
  return EditConfigTable(layers);
}

std::string PipelineConfig::hash() const {
  json j = to_json(*this);
  j.erase("workspace");
  j.erase("parallelism");  // outputs do not depend on the worker count
  return hex64(fnv1a64(j.dump()));
}

json to_json(const PipelineConfig& cfg) {
  json counts = json::object();
  for (const auto& [cat, n] : cfg.prompt_counts)
    counts[std::string(to_string(cat))] = {{"feasible", n[0]}, {"infeasible", n[1]}};
  json cats = json::array();
  for (auto c : cfg.categories) cats.push_back(to_string(c));
  return {{"dataset_id", cfg.dataset_id},
          {"workspace", cfg.workspace.string()},
          {"manifest", cfg.manifest.string()},
          {"backends", backends_json(cfg.backends)},
          {"categories", cats},
          {"prompt_counts", counts},
          {"decisions", cfg.decisions},
          {"icl_template", cfg.icl_template},
          {"color_bank", cfg.color_bank},
          {"filter_templates", cfg.filter_templates},
          {"k", cfg.k},
          {"edit", cfg.edit_overrides},
          {"retry", {{"max_attempts", cfg.retry.max_attempts}, {"regenerate", cfg.retry.regenerate}}},
          {"train", to_json(cfg.train)},
          {"encoder", encoder_json(cfg.encoder)},
          {"scale_ratios", cfg.scale_ratios},
          {"annotation_per_group", cfg.annotation_per_group},
          {"parallelism", cfg.parallelism},
          {"seed", cfg.seed}};
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, kKeys, "pipeline config");
  PipelineConfig cfg;
  try {
    read(j, "dataset_id", cfg.dataset_id);
    std::string ws = ".";
    read(j, "workspace", ws);
    cfg.workspace = fs::path(ws).is_absolute() ? fs::path(ws) : base_dir / ws;
    cfg.workspace = cfg.workspace.lexically_normal();
    if (cfg.workspace.filename().empty() && cfg.workspace.has_parent_path()) cfg.workspace = cfg.workspace.parent_path();
    if (j.contains("manifest")) cfg.manifest = j.at("manifest").get<std::string>();
    if (j.contains("backends")) cfg.backends = backends_from_json(j.at("backends"));
    if (j.contains("categories")) {
      cfg.categories.clear();
      for (const auto& c : j.at("categories")) cfg.categories.push_back(parse_category(c.get<std::string>()));
    }
    if (j.contains("prompt_counts")) {
      for (const auto& [k, v] : j.at("prompt_counts").items()) {
        check_keys(v, {"feasible", "infeasible"}, "prompt_counts." + k);
        auto& slot = cfg.prompt_counts[parse_category(k)];
        read(v, "feasible", slot[0]);
        read(v, "infeasible", slot[1]);
      }
    }
    read(j, "decisions", cfg.decisions);
    read(j, "icl_template", cfg.icl_template);
    read(j, "color_bank", cfg.color_bank);
    read(j, "filter_templates", cfg.filter_templates);
    read(j, "k", cfg.k);
    if (j.contains("edit")) cfg.edit_overrides = j.at("edit");
    if (j.contains("retry")) {
      const auto& r = j.at("retry");
      check_keys(r, {"max_attempts", "regenerate"}, "retry");
      read(r, "max_attempts", cfg.retry.max_attempts);
      read(r, "regenerate", cfg.retry.regenerate);
    }
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    if (j.contains("encoder")) cfg.encoder = encoder_from_json(j.at("encoder"));
    read(j, "scale_ratios", cfg.scale_ratios);
    read(j, "annotation_per_group", cfg.annotation_per_group);
    read(j, "parallelism", cfg.parallelism);
    read(j, "seed", cfg.seed);
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, std::string("pipeline config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::config_error) throw;
    throw Error(Errc::config_error, std::string("pipeline config: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, "config " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, fs::absolute(path).parent_path());
}

void save_pipeline_config(const PipelineConfig& cfg, const fs::path& path) {
  json j = to_json(cfg);
  j["workspace"] = ".";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void validate(const PipelineConfig& cfg) {
  auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed, const char* what) {
    for (const char* a : allowed)
      if (v == a) return;
    throw Error(Errc::config_error, std::string("unknown ") + what + " backend '" + v + "'");
  };
  const auto& b = cfg.backends;
  one_of(b.llm, {"canned", "http"}, "llm");
  one_of(b.diffusion, {"procedural"}, "diffusion");
  one_of(b.inpaint, {"noise", "echo"}, "inpaint");
  one_of(b.control, {"blend"}, "control");
  one_of(b.detector, {"border-contrast"}, "detector");
  one_of(b.segmenter, {"contrast", "box"}, "segmenter");
  one_of(b.matting, {"contrast"}, "matting");
  one_of(b.vqa, {"oracle", "http"}, "vqa");
  one_of(b.encoder, {"toy"}, "encoder");
  if (b.llm == "http" && b.llm_url.empty()) throw Error(Errc::config_error, "llm 'http' needs llm_url");
  if (b.vqa == "http" && b.vqa_url.empty()) throw Error(Errc::config_error, "vqa 'http' needs vqa_url");
  if (!(b.vqa_flip_rate >= 0.0 && b.vqa_flip_rate <= 1.0))
    throw Error(Errc::config_error, "vqa_flip_rate must be in [0,1]");
  if (cfg.dataset_id.empty()) throw Error(Errc::config_error, "dataset_id is empty");
  if (cfg.k < 1) throw Error(Errc::config_error, "k must be >= 1");
  if (cfg.parallelism < 1) throw Error(Errc::config_error, "parallelism must be >= 1");
  if (cfg.retry.max_attempts < 1) throw Error(Errc::config_error, "retry.max_attempts must be >= 1");
  if (cfg.annotation_per_group < 1) throw Error(Errc::config_error, "annotation_per_group must be >= 1");
  if (cfg.categories.empty()) throw Error(Errc::config_error, "no categories configured");
  if (!cfg.edit_overrides.is_object()) throw Error(Errc::config_error, "edit overrides must be an object");
  for (const auto& [key, v] : cfg.edit_overrides.items())
    if (key != "defaults" && key != "datasets")
      throw Error(Errc::config_error, "edit overrides: unknown key '" + key + "' (expected defaults or datasets)");
  if (cfg.scale_ratios.empty()) throw Error(Errc::config_error, "no scale ratios");
  for (int r : cfg.scale_ratios)
    if (r < 1) throw Error(Errc::config_error, "scale ratios must be >= 1");
  for (auto c : cfg.categories) {
    auto it = cfg.prompt_counts.find(c);
    if (it == cfg.prompt_counts.end())
      throw Error(Errc::config_error, "no prompt counts for " + std::string(to_string(c)));
    for (int n : it->second)
      if (n < cfg.k)
        throw Error(Errc::config_error, std::string(to_string(c)) + " prompt count below k = " + std::to_string(cfg.k));
  }
  if (cfg.train.total_iterations < 1 || cfg.train.batch_size < 1)
    throw Error(Errc::config_error, "train needs positive iterations and batch size");
  const auto table = cfg.edit_table();
  for (auto c : cfg.categories)
    for (auto f : kAllFeasibilities) {
      try {
        validate(table.resolve(cfg.dataset_id, c, f), c);
      } catch (const Error& e) {
        throw Error(Errc::config_error, "edit config for " + cfg.dataset_id + "/" + std::string(to_string(c)) + "/" +
                                            std::string(to_string(f)) + ": " + e.what());
      }
    }
}

}  // namespace varireal
