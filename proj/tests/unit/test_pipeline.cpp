#include <doctest.h>

#include "test_support.hpp"
#include "varireal/error.hpp"
#include "varireal/hashing.hpp"
#include "varireal/image_io.hpp"
#include "varireal/pipeline.hpp"
#include "varireal/prompt_forge.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace varireal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
Errc error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::invalid_argument;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 2 classes x 3 train reals, k = 2, a single category.
PipelineConfig small_config(const std::string& name, AttributeCategory cat, int parallelism = 2) {
  const fs::path ws = vrtest::fresh_dir(name);
  write_toy_dataset(ws, ToyDatasetSpec{});
  PipelineConfig cfg = toy_pipeline_config(ws);
  cfg.k = 2;
  cfg.categories = {cat};
  cfg.parallelism = parallelism;
  return cfg;
}

void run_through_filter(Pipeline& p) {
  REQUIRE(p.init().ok());
  REQUIRE(p.prompts().ok());
  REQUIRE(p.maps().ok());
  REQUIRE(p.priors().ok());
  REQUIRE(p.generate().ok());
  REQUIRE(p.filter().ok());
}

std::map<std::string, std::string> synthetic_files(const fs::path& ws) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(ws / "synthetic"))
    if (e.is_regular_file()) out[fs::relative(e.path(), ws).generic_string()] = hex64(fnv1a64(read_file(e.path())));
  return out;
}

// Content hashes of the synthetic images the manifest points at.
std::map<std::string, std::string> referenced_files(const fs::path& ws, const Manifest& m) {
  std::map<std::string, std::string> out;
  for (const auto& img : m.images)
    if (img.kind == ImageKind::synthetic) out[img.path] = hex64(fnv1a64(read_file(ws / img.path)));
  return out;
}

Manifest without_timestamp(Manifest m) {
  m.created_at.clear();
  return m;
}

}  // namespace

TEST_CASE("stage order") {
  CHECK(required_stage(kStageInit).empty());
  CHECK(required_stage(kStagePrompts) == kStageInit);
  CHECK(required_stage(kStageFilter) == kStageGenerate);
  CHECK(required_stage(kStageTrain) == kStageFilter);
  CHECK(required_stage(kStageEval) == kStageTrain);
  CHECK(error_code_of([] { required_stage("paint"); }) == Errc::invalid_argument);

  Pipeline p(small_config("order", AttributeCategory::color));
  CHECK(error_code_of([&] { p.prompts(); }) == Errc::stage_order);  // no manifest yet
  p.init();
  CHECK(error_code_of([&] { p.train({}); }) == Errc::stage_order);
  CHECK(error_code_of([&] { p.maps(); }) == Errc::stage_order);
  CHECK(error_code_of([&] { p.eval(); }) == Errc::stage_order);
  CHECK(error_code_of([&] { p.scale(); }) == Errc::stage_order);
  CHECK(error_code_of([&] { p.annotation_session(); }) == Errc::stage_order);
}

TEST_CASE("config errors surface before any work") {
  PipelineConfig cfg = small_config("badcfg", AttributeCategory::color);
  SUBCASE("unknown backend") { cfg.backends.diffusion = "sdxl"; }
  SUBCASE("http without url") { cfg.backends.vqa = "http"; }
  SUBCASE("k larger than the prompt budget") { cfg.k = 50; }
  SUBCASE("zero parallelism") { cfg.parallelism = 0; }
  SUBCASE("edit table missing the dataset") { cfg.dataset_id = "no-such-dataset"; }
  SUBCASE("edit override in the wrong shape") { cfg.edit_overrides = {{"toy", {{"inpaint_steps", 2}}}}; }
  SUBCASE("edit override failing validation") {
    cfg.edit_overrides = {{"datasets", {{"toy", {{"color", {{"defaults", {{"inpaint_steps", 0}}}}}}}}}};
  }
  CHECK(error_code_of([&] { Pipeline p(cfg); }) == Errc::config_error);
  CHECK_FALSE(fs::exists(cfg.manifest_path()));

  const json j = to_json(small_config("badcfg_json", AttributeCategory::color));
  json extra = j;
  extra["backend"] = json::object();
  CHECK(error_code_of([&] { pipeline_config_from_json(extra, "/tmp"); }) == Errc::config_error);
}

TEST_CASE("config round trip and hash") {
  PipelineConfig cfg = small_config("cfgrt", AttributeCategory::texture);
  cfg.edit_overrides = {{"datasets", {{"toy", {{"texture", {{"feasible", {{"inpaint_steps", 7}}}}}}}}}};
  const fs::path path = cfg.workspace / "cfg.json";
  save_pipeline_config(cfg, path);
  const PipelineConfig back = load_pipeline_config(path);
  CHECK(back.workspace == cfg.workspace);
  CHECK(back.hash() == cfg.hash());
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.edit_table().resolve("toy", AttributeCategory::texture, Feasibility::feasible).inpaint_steps == 7);
  PipelineConfig other = cfg;
  other.seed = 99;
  CHECK(other.hash() != cfg.hash());
  other = cfg;
  other.workspace = "/elsewhere";
  CHECK(other.hash() == cfg.hash());
}

TEST_CASE("end-to-end mock pipeline per category") {
  for (auto cat : kAllCategories) {
    CAPTURE(to_string(cat));
    PipelineConfig cfg = small_config(std::string("e2e_") + std::string(to_string(cat)), cat);
    std::map<std::string, std::string> real_before;
    for (const auto& e : fs::recursive_directory_iterator(cfg.workspace / "real"))
      if (e.is_regular_file()) real_before[e.path().string()] = read_file(e.path());

    Pipeline p(cfg);
    run_through_filter(p);
    const Manifest m = p.manifest();

    // Enumeration oracle: every train real pairs with k distinct accepted
    // prompts of its own class per feasibility.
    std::vector<const ImageRecord*> reals;
    for (const auto& img : m.images)
      if (img.kind == ImageKind::real && img.split == Split::train) reals.push_back(&img);
    REQUIRE(reals.size() == 6);
    std::map<std::pair<std::string, Feasibility>, std::set<std::string>> per_real;
    std::size_t feasible = 0, infeasible = 0;
    for (const auto& img : m.images) {
      if (img.kind != ImageKind::synthetic) continue;
      REQUIRE(img.parent_real_id);
      REQUIRE(img.prompt_id);
      const ImageRecord* parent = m.find_image(*img.parent_real_id);
      const PromptRecord* prompt = m.find_prompt(*img.prompt_id);
      REQUIRE(parent);
      REQUIRE(prompt);
      CHECK(prompt->status == PromptStatus::manual_accepted);
      CHECK(prompt->category == cat);
      CHECK(prompt->class_id == parent->class_id);
      CHECK(img.class_id == parent->class_id);
      CHECK(img.seed == derive_seed(parent->image_id, prompt->prompt_id, img.attempt));
      CHECK((img.filter_status == FilterStatus::accepted || img.filter_status == FilterStatus::rejected));
      const VerdictRecord* v = m.find_verdict(img.image_id);
      REQUIRE(v);
      CHECK(v->attempt == img.attempt);
      CHECK(v->accepted == (img.filter_status == FilterStatus::accepted));
      CHECK(fs::exists(cfg.workspace / img.path));
      per_real[{parent->image_id, prompt->feasibility}].insert(prompt->prompt_id);
      (prompt->feasibility == Feasibility::feasible ? feasible : infeasible)++;
    }
    CHECK(feasible == 12);
    CHECK(infeasible == 12);
    CHECK(per_real.size() == 12);
    for (const auto& [key, prompts] : per_real) CHECK(prompts.size() == 2);
    CHECK(m.failures.empty());

    // Rerunning every stage performs no new work and leaves the manifest as is.
    const std::string bytes = read_file(cfg.manifest_path());
    CHECK(p.init().done == 0);
    CHECK(p.prompts().done == 0);
    CHECK(p.maps().done == 0);
    CHECK(p.priors().done == 0);
    const StageReport again = p.generate();
    CHECK(again.done == 0);
    CHECK(again.skipped == 24);
    CHECK(p.filter().done == 0);
    CHECK(read_file(cfg.manifest_path()) == bytes);

    for (const auto& [path, content] : real_before) CHECK(read_file(path) == content);
  }
}

TEST_CASE("crash and resume reach the same manifest and images") {
  PipelineConfig clean_cfg = small_config("resume_clean", AttributeCategory::background);
  Pipeline clean(clean_cfg);
  run_through_filter(clean);
  const Manifest reference = without_timestamp(clean.manifest());
  const auto reference_files = referenced_files(clean_cfg.workspace, reference);

  PipelineConfig cfg = small_config("resume_crash", AttributeCategory::background, 3);
  {
    Pipeline p(cfg);
    run_through_filter(p);
  }
  // Cut the manifest mid-filter, leave a torn record, and lose some outputs.
  std::string text = read_file(cfg.manifest_path());
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < text.size(); ++i)
    if (text[i] == '\n') ends.push_back(i);
  REQUIRE(ends.size() > 40);
  text.resize(ends[ends.size() - 30] + 1);
  text += R"({"kind":"image","image_id":"trunc)";
  {
    std::ofstream out(cfg.manifest_path(), std::ios::binary | std::ios::trunc);
    out << text;
  }
  std::vector<fs::path> synthetic;
  for (const auto& e : fs::recursive_directory_iterator(cfg.workspace / "synthetic"))
    if (e.is_regular_file()) synthetic.push_back(e.path());
  std::sort(synthetic.begin(), synthetic.end());
  for (std::size_t i = 0; i < synthetic.size(); i += 5) fs::remove(synthetic[i]);
  fs::remove_all(cfg.workspace / "priors");
  fs::remove(cfg.workspace / Workspace::mask_rel("train_disc_1"));

  {
    Pipeline p(cfg);
    CHECK(p.manifest().stage_completed(kStageGenerate));
    CHECK_FALSE(p.manifest().stage_completed(kStageFilter));
    CHECK(p.maps().done == 1);
    p.priors();
    CHECK(p.generate().ok());
    CHECK(p.filter().ok());
    CHECK(without_timestamp(p.manifest()) == reference);
  }
  // Superseded retry attempts may stay lost; referenced images may not.
  CHECK(referenced_files(cfg.workspace, reference) == reference_files);
  // The file on disk folds to the same state as the in-memory store.
  CHECK(without_timestamp(load_manifest(cfg.manifest_path())) == reference);
}

TEST_CASE("worker count does not change results") {
  PipelineConfig one = small_config("par1", AttributeCategory::texture, 1);
  PipelineConfig four = small_config("par4", AttributeCategory::texture, 4);
  Pipeline a(one), b(four);
  run_through_filter(a);
  run_through_filter(b);
  CHECK(without_timestamp(a.manifest()) == without_timestamp(b.manifest()));
  CHECK(synthetic_files(one.workspace) == synthetic_files(four.workspace));
}

TEST_CASE("cached priors do not change generated images") {
  PipelineConfig with = small_config("prior_cached", AttributeCategory::color);
  PipelineConfig without = small_config("prior_fresh", AttributeCategory::color);
  Pipeline a(with), b(without);
  run_through_filter(a);
  REQUIRE(b.init().ok());
  REQUIRE(b.prompts().ok());
  REQUIRE(b.maps().ok());
  REQUIRE(b.priors().ok());
  fs::remove_all(without.workspace / "priors");
  REQUIRE(b.generate().ok());
  REQUIRE(b.filter().ok());
  CHECK(synthetic_files(with.workspace) == synthetic_files(without.workspace));
  CHECK_FALSE(fs::exists(without.workspace / "priors"));
}

TEST_CASE("manual decisions file") {
  PipelineConfig cfg = small_config("decisions", AttributeCategory::color);
  cfg.decisions = "decisions.tsv";
  Pipeline p(cfg);
  p.init();
  CHECK(error_code_of([&] { p.prompts(); }) == Errc::missing_decision);
  REQUIRE(fs::exists(cfg.workspace / "decisions.tsv"));
  CHECK_FALSE(p.manifest().stage_completed(kStagePrompts));

  // Keep one keyword of class 0's feasible group: k = 2 is then unmet.
  std::istringstream in(read_file(cfg.workspace / "decisions.tsv"));
  std::ostringstream out;
  bool kept = false;
  int rejected = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("0\tcolor\tfeasible\t", 0) == 0) {
      if (kept) {
        line = line.substr(0, line.rfind('\t')) + "\treject";
        ++rejected;
      }
      kept = true;
    }
    out << line << "\n";
  }
  REQUIRE(rejected > 0);
  std::ofstream(cfg.workspace / "decisions.tsv") << out.str();

  const StageReport r = p.prompts();
  CHECK(r.failed == 1);
  const Manifest m = p.manifest();
  CHECK_FALSE(m.stage_completed(kStagePrompts));
  REQUIRE(m.failures.size() == 1);
  CHECK(m.failures[0].stage == kStagePrompts);
  const auto stats = PromptBank{m.prompts}.stats({0, AttributeCategory::color, Feasibility::feasible});
  CHECK(stats.manual_count == 1);
  CHECK(error_code_of([&] { p.maps(); }) == Errc::stage_order);
}

TEST_CASE("train, skip on rerun, evaluate") {
  PipelineConfig cfg = small_config("train_eval", AttributeCategory::color);
  Pipeline p(cfg);
  run_through_filter(p);
  for (auto f : {FeasibilityRegime::feasible, FeasibilityRegime::infeasible, FeasibilityRegime::mix})
    CHECK(p.train({DataRegime::mixed, f, std::nullopt}).done == 1);
  CHECK(p.train({DataRegime::mixed, FeasibilityRegime::feasible, std::nullopt}).skipped == 1);
  CHECK(p.train({DataRegime::real, FeasibilityRegime::feasible, std::nullopt}).done == 1);
  CHECK(fs::exists(cfg.workspace / "runs" / "mixed-F-all" / "adapters.json"));
  CHECK(run_name({DataRegime::syn, FeasibilityRegime::mix, AttributeCategory::texture}) == "syn-Mix-texture");
  CHECK(run_name({DataRegime::real, FeasibilityRegime::mix, AttributeCategory::texture}) == "real");

  const StageReport r = p.eval();
  CHECK(r.ok());
  CHECK(r.done == 5);  // zero-shot plus four runs
  const json report = json::parse(read_file(cfg.workspace / "eval" / "report.json"));
  REQUIRE(report.at("runs").size() == 5);
  REQUIRE(report.at("gaps").size() == 1);
  const auto& g = report.at("gaps")[0];
  CHECK(g.at("delta1").get<double>() ==
        doctest::Approx(round_one_decimal(g.at("F").get<double>() - g.at("IF").get<double>())));
  const auto& inc = report.at("overlap").at("inclusion");
  for (std::size_t i = 0; i < inc.size(); ++i)
    if (!inc[i][i].is_null()) CHECK(inc[i][i].get<double>() == 1.0);
  for (const auto& row : report.at("similarity")) {
    if (row.at("category") != "color") continue;
    CHECK(row.at("count").get<int>() > 0);
    CHECK(row.at("lpips").get<double>() > 0);
  }
  // Predictions agree with the reported accuracy.
  for (const auto& run : report.at("runs")) {
    const auto set = prediction_set_from_json(
        json::parse(read_file(cfg.workspace / "eval" / "predictions" / (run.at("name").get<std::string>() + ".json"))));
    CHECK(set.correct.size() == run.at("correct").get<std::size_t>());
    CHECK(run.at("accuracy").get<double>() == doctest::Approx(100.0 * set.correct.size() / 8.0));
  }
}

TEST_CASE("scaling curves and annotation export") {
  PipelineConfig cfg = small_config("scale", AttributeCategory::texture);
  cfg.scale_ratios = {1, 2};
  Pipeline p(cfg);
  run_through_filter(p);
  p.train({DataRegime::mixed, FeasibilityRegime::mix, std::nullopt});
  const StageReport r = p.scale();
  CHECK(r.done == 4);
  const json curves = json::parse(read_file(cfg.workspace / "scale" / "curves.json"));
  REQUIRE(curves.size() == 2);
  CHECK(curves[0].at("points").size() == 2);
  CHECK(fs::exists(cfg.workspace / "scale" / "scaling.svg"));

  const AnnotationSession session = p.annotation_session();
  CHECK(session.items().size() == 8);  // 4 per feasibility
  const AnnotationSession again = p.annotation_session();
  CHECK(again.to_json() == session.to_json());
  RatingStore store(p.ratings_path());
  session.rate({"ann", session.items()[0].image_id, true, 4, ""}, store);
  session.rate({"ann", session.items()[1].image_id, false, 2, ""}, store);
  CHECK(p.annotate_export().done == 2);
  const std::string tsv = read_file(cfg.workspace / "annotation" / "ratings.tsv");
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);
  CHECK(fs::exists(cfg.workspace / "annotation" / "aggregate.txt"));
}

TEST_CASE("toy dataset layout") {
  const fs::path root = vrtest::fresh_dir("toyset");
  ToyDatasetSpec spec;
  spec.classes = {"disc", "block", "triangle", "ring", "cross"};
  spec.train_per_class = 2;
  spec.test_per_class = 1;
  write_toy_dataset(root, spec);
  for (const auto& c : spec.classes) {
    CHECK(fs::exists(root / "real" / "train" / c / "1.png"));
    CHECK(fs::exists(root / "real" / "test" / c / "0.png"));
    const Image img = load_image(root / "real" / "train" / c / "0.png");
    CHECK(img.width == spec.width);
    CHECK(img.height == spec.height);
  }
  // Same seed, same bytes.
  const fs::path other = vrtest::fresh_dir("toyset2");
  write_toy_dataset(other, spec);
  CHECK(read_file(root / "real" / "train" / "ring" / "0.png") == read_file(other / "real" / "train" / "ring" / "0.png"));
  spec.width = 8;
  CHECK(error_code_of([&] { write_toy_dataset(other, spec); }) == Errc::invalid_argument);
}
