#include "varireal/pipeline.hpp"

#include "varireal/error.hpp"
#include "varireal/fid.hpp"
#include "varireal/hashing.hpp"
#include "varireal/http_backends.hpp"
#include "varireal/image_io.hpp"
#include "varireal/mock_generative.hpp"
#include "varireal/mock_vision.hpp"
#include "varireal/pairing.hpp"
#include "varireal/prompt_forge.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace varireal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string required_stage(const std::string& stage) {
  static const std::map<std::string, std::string> before{
      {kStageInit, ""},           {kStagePrompts, kStageInit},     {kStageMaps, kStagePrompts},
      {kStagePriors, kStageMaps}, {kStageGenerate, kStagePriors},  {kStageFilter, kStageGenerate},
      {kStageTrain, kStageFilter}, {kStageEval, kStageTrain}};
  auto it = before.find(stage);
  if (it == before.end()) throw Error(Errc::invalid_argument, "unknown stage " + stage);
  return it->second;
}

namespace {

// Runs work(i, worker) on `threads` workers and hands results to commit(i, r)
// strictly in index order, as soon as every earlier index has committed.
template <typename R>
void ordered_parallel(std::size_t n, int threads, const std::function<R(std::size_t, int)>& work,
                      const std::function<void(std::size_t, R&)>& commit) {
  std::vector<std::optional<R>> results(n);
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::size_t committed = 0;
  std::exception_ptr failure;
  auto run = [&](int worker) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      R r = work(i, worker);
      std::lock_guard lock(mutex);
      if (failure) return;
      results[i] = std::move(r);
      try {
        while (committed < n && results[committed]) {
          commit(committed, *results[committed]);
          results[committed].reset();
          ++committed;
        }
      } catch (...) {
        failure = std::current_exception();
        next = n;
        return;
      }
    }
  };
  const int count = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (count == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < count; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (directories ? e.is_directory() : (e.is_regular_file() && is_image_file(e.path()))) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

GenerationJob job_for(const ImageRecord& rec, const Manifest& m) {
  const PromptRecord* p = rec.prompt_id ? m.find_prompt(*rec.prompt_id) : nullptr;
  if (!p || !rec.parent_real_id) throw Error(Errc::schema_error, "synthetic record without prompt or parent: " + rec.image_id);
  GenerationJob job;
  job.job_id = rec.image_id;
  job.real_image_id = *rec.parent_real_id;
  job.prompt_id = p->prompt_id;
  job.category = p->category;
  job.feasibility = p->feasibility;
  job.attempt = rec.attempt;
  job.seed = static_cast<std::uint32_t>(rec.seed);
  return job;
}

std::string selection_hash(const TrainingSelection& sel) {
  std::string blob;
  for (const auto* pool : {&sel.real, &sel.syn})
    for (const auto& r : *pool)
      blob += r.image_id + '\t' + r.path + '\t' + std::to_string(r.attempt) + '\t' +
              std::string(to_string(r.filter_status)) + '\n';
  return hex64(fnv1a64(blob));
}

}  // namespace

// ---------------------------------------------------------------- toy data

void write_toy_dataset(const fs::path& root, const ToyDatasetSpec& spec) {
  if (spec.classes.empty()) throw Error(Errc::invalid_argument, "toy dataset needs classes");
  if (spec.width < 16 || spec.height < 16) throw Error(Errc::invalid_argument, "toy images must be at least 16x16");
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> light(170, 240), dark(20, 110), noise(-3, 3);
  const int side = std::min(spec.width, spec.height);
  std::uniform_real_distribution<double> radius(0.30 * side, 0.36 * side);
  std::uniform_real_distribution<double> jitter(-0.08, 0.08);
  for (const auto* split : {"train", "test"}) {
    const int per_class = std::string(split) == "train" ? spec.train_per_class : spec.test_per_class;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
      for (int n = 0; n < per_class; ++n) {
        const double r = radius(rng);
        const double cx = spec.width * (0.5 + jitter(rng)), cy = spec.height * (0.5 + jitter(rng));
        const int bg[3] = {light(rng), light(rng), light(rng)};
        const int fg[3] = {dark(rng), dark(rng), dark(rng)};
        Image img(spec.width, spec.height, 3);
        for (int y = 0; y < spec.height; ++y)
          for (int x = 0; x < spec.width; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double d = std::sqrt(dx * dx + dy * dy);
            bool inside = false;
            switch (c % 5) {
              case 0: inside = d <= r; break;
              case 1: inside = std::fabs(dx) <= 1.2 * r && std::fabs(dy) <= 0.45 * r; break;
              case 2: inside = dy >= -r && dy <= r && std::fabs(dx) <= (dy + r) * 0.5; break;
              case 3: inside = d <= r && d >= 0.55 * r; break;
              default:
                inside = std::fabs(dx) <= r && std::fabs(dy) <= r && (std::fabs(dx) <= r / 3 || std::fabs(dy) <= r / 3);
            }
            for (int ch = 0; ch < 3; ++ch)
              img.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp((inside ? fg[ch] : bg[ch]) + noise(rng), 0, 255));
          }
        save_image(img, root / "real" / split / spec.classes[c] / (std::to_string(n) + ".png"));
      }
    }
  }
}

PipelineConfig toy_pipeline_config(const fs::path& workspace) {
  PipelineConfig cfg;
  cfg.dataset_id = "toy";
  cfg.workspace = workspace;
  cfg.prompt_counts = {{AttributeCategory::background, {6, 6}},
                       {AttributeCategory::color, {5, 5}},
                       {AttributeCategory::texture, {5, 5}}};
  cfg.k = 4;
  cfg.backends.vqa_flip_rate = 0.1;
  cfg.train.total_iterations = 120;
  cfg.train.batch_size = 16;
  cfg.train.test_batch_size = 8;
  cfg.train.lr = 5e-3;
  cfg.train.validation_fraction = 0;  // three reals per class leave nothing to hold out; keep final weights
  cfg.scale_ratios = {1, 2, 3};
  cfg.annotation_per_group = 4;
  cfg.parallelism = 2;
  return cfg;
}

// ---------------------------------------------------------------- backends

BackendFactory::BackendFactory(const PipelineConfig& cfg) : cfg_(cfg), colors_(ColorBank::standard()) {
  if (!cfg.color_bank.empty()) colors_.merge(ColorBank::load(cfg.resolve(cfg.color_bank)));
  templates_ = cfg.filter_templates.empty() ? default_filter_templates()
                                            : load_filter_templates(cfg.resolve(cfg.filter_templates));
  icl_ = cfg.icl_template.empty() ? default_icl_template() : load_icl_template(cfg.resolve(cfg.icl_template));
}

std::unique_ptr<LlmBackend> BackendFactory::llm() const {
  if (cfg_.backends.llm == "http") return std::make_unique<HttpLlm>(cfg_.backends.llm_url);
  return std::make_unique<CannedLlm>(cfg_.backends.llm_drop_every);
}

std::unique_ptr<DetectorBackend> BackendFactory::detector() const {
  return std::make_unique<BorderContrastDetector>(cfg_.backends.contrast_tolerance);
}

std::unique_ptr<SegmenterBackend> BackendFactory::segmenter() const {
  if (cfg_.backends.segmenter == "box") return std::make_unique<BoxSegmenter>();
  return std::make_unique<ContrastSegmenter>(cfg_.backends.contrast_tolerance);
}

std::unique_ptr<MattingBackend> BackendFactory::matting() const {
  return std::make_unique<ContrastMatting>(cfg_.backends.contrast_tolerance);
}

std::unique_ptr<DiffusionBackend> BackendFactory::diffusion() const { return std::make_unique<ProceduralDiffusion>(); }

std::unique_ptr<InpaintBackend> BackendFactory::inpaint() const {
  if (cfg_.backends.inpaint == "echo") return std::make_unique<EchoInpaint>();
  return std::make_unique<NoiseInpaint>();
}

std::unique_ptr<StructureControlBackend> BackendFactory::control() const { return std::make_unique<BlendControl>(); }

std::unique_ptr<VqaBackend> BackendFactory::vqa(const std::vector<FilterQuestion>& questions) const {
  if (cfg_.backends.vqa == "http") return std::make_unique<HttpVqa>(cfg_.backends.vqa_url);
  auto oracle = std::make_unique<OracleVqa>(cfg_.backends.vqa_flip_rate, cfg_.seed);
  for (const auto& q : questions) oracle->expect(q);
  return oracle;
}

std::string run_name(const TrainRequest& req) {
  if (req.regime == DataRegime::real) return "real";
  return std::string(to_string(req.regime)) + "-" + std::string(to_string(req.feasibility)) + "-" +
         (req.category ? std::string(to_string(*req.category)) : "all");
}

// ---------------------------------------------------------------- pipeline

Pipeline::Pipeline(PipelineConfig cfg) : cfg_((validate(cfg), std::move(cfg))), factory_(cfg_) {
  if (fs::exists(cfg_.manifest_path())) {
    store_.emplace(ManifestStore::open(cfg_.manifest_path()));
    const Manifest m = store_->snapshot();
    if (m.dataset_id != cfg_.dataset_id)
      throw Error(Errc::config_error, "manifest belongs to dataset '" + m.dataset_id + "', config says '" +
                                          cfg_.dataset_id + "'");
    if (m.pipeline_config_hash != cfg_.hash()) {
      spdlog::info("config hash {} -> {}", m.pipeline_config_hash, cfg_.hash());
      store_->set_config_hash(cfg_.hash());
    }
  }
}

bool Pipeline::initialized() const { return store_.has_value(); }

ManifestStore& Pipeline::store() {
  if (!store_) throw Error(Errc::stage_order, "no manifest at " + cfg_.manifest_path().string() + "; run init first");
  return *store_;
}

Manifest Pipeline::manifest() const {
  if (!store_) throw Error(Errc::stage_order, "no manifest at " + cfg_.manifest_path().string() + "; run init first");
  return store_->snapshot();
}

void Pipeline::require(const std::string& stage) {
  const std::string before = required_stage(stage);
  if (before.empty()) return;
  if (!store().snapshot().stage_completed(before))
    throw Error(Errc::stage_order, "'" + stage + "' needs a completed '" + before + "' stage");
}

void Pipeline::complete(const std::string& stage, const StageReport& report) {
  spdlog::info("{}: {} done, {} skipped, {} failed", stage, report.done, report.skipped, report.failed);
  if (!report.ok()) return;
  if (!store().snapshot().stage_completed(stage)) store().append(StageRecord{stage, true});
}

StageReport Pipeline::init() {
  StageReport report{kStageInit};
  const fs::path real_root = cfg_.workspace / "real";
  std::set<std::string> names;
  for (const auto* split : {"train", "test"})
    for (const auto& d : sorted_entries(real_root / split, true)) names.insert(d.filename().string());
  if (names.empty()) throw Error(Errc::empty_input, "no class folders under " + (real_root / "train").string());

  if (!store_) {
    Manifest m;
    m.dataset_id = cfg_.dataset_id;
    m.pipeline_config_hash = cfg_.hash();
    store_.emplace(ManifestStore::create(cfg_.manifest_path(), m));
  }
  Manifest m = store_->snapshot();
  std::map<std::string, int> class_ids;
  for (const auto& c : m.classes) class_ids[c.name] = c.class_id;
  int next_id = 0;
  for (const auto& c : m.classes) next_id = std::max(next_id, c.class_id + 1);
  for (const auto& name : names) {
    if (class_ids.count(name)) continue;
    class_ids[name] = next_id;
    store_->append(ClassEntry{next_id++, name, cfg_.dataset_id});
  }
  for (const auto* split : {"train", "test"}) {
    for (const auto& name : names) {
      for (const auto& file : sorted_entries(real_root / split / name, false)) {
        ImageRecord rec;
        rec.image_id = std::string(split) + "_" + sanitize(name) + "_" + sanitize(file.stem().string());
        if (m.find_image(rec.image_id)) {
          ++report.skipped;
          continue;
        }
        rec.class_id = class_ids[name];
        rec.path = fs::relative(file, cfg_.workspace).generic_string();
        rec.split = parse_split(split);
        rec.kind = ImageKind::real;
        store_->append(rec);
        ++report.done;
      }
    }
  }
  complete(kStageInit, report);
  return report;
}

StageReport Pipeline::prompts() {
  require(kStagePrompts);
  StageReport report{kStagePrompts};
  auto llm = factory_.llm();
  const Manifest start = store().snapshot();

  std::optional<DecisionTable> table;
  const bool accept_all = cfg_.decisions == "accept-all";
  const fs::path decisions_path = cfg_.resolve(cfg_.decisions);
  if (!accept_all && fs::exists(decisions_path)) table = DecisionTable::load(decisions_path);
  std::vector<PromptRecord> undecided_all;

  for (const auto& cls : start.classes) {
    for (auto cat : cfg_.categories) {
      for (auto f : kAllFeasibilities) {
        const GroupKey key{cls.class_id, cat, f};
        PromptBank bank{store().snapshot().prompts};
        std::vector<PromptRecord> group = bank.group(key);
        if (group.empty()) {
          const int n = cfg_.prompt_counts.at(cat)[f == Feasibility::feasible ? 0 : 1];
          const auto raw = generate_attributes(cls, cat, f, n, *llm, factory_.icl());
          const auto kept = self_filter(raw, cls, *llm, factory_.icl());
          std::set<std::string> kept_ids;
          for (const auto& k : kept) kept_ids.insert(k.prompt_id);
          for (const auto& r : raw)
            if (!kept_ids.count(r.prompt_id)) store().append(r);
          for (const auto& k : kept) store().append(k);
          group = PromptBank{store().snapshot().prompts}.group(key);
          ++report.done;
        } else {
          ++report.skipped;
        }
        std::vector<PromptRecord> undecided;
        for (const auto& r : group)
          if (r.status == PromptStatus::self_filtered) undecided.push_back(r);
        if (undecided.empty()) continue;
        std::map<std::string, bool> decisions;
        if (accept_all) {
          for (const auto& r : undecided) decisions[r.keyword] = true;
        } else if (table) {
          decisions = table->for_group(cls.class_id, cat, f);
        } else {
          undecided_all.insert(undecided_all.end(), undecided.begin(), undecided.end());
          continue;
        }
        for (const auto& r : apply_manual_filter(undecided, decisions)) store().append(r);
      }
    }
  }

  if (!undecided_all.empty()) {
    write_text(decisions_path, DecisionTable::template_for(undecided_all));
    throw Error(Errc::missing_decision, "review " + decisions_path.string() +
                                            " (pre-filled with accept) and rerun prompts");
  }

  const Manifest m = store().snapshot();
  const PromptBank bank{m.prompts};
  for (const auto& cls : m.classes)
    for (auto cat : cfg_.categories)
      for (auto f : kAllFeasibilities) {
        const auto stats = bank.stats({cls.class_id, cat, f});
        if (stats.manual_count < cfg_.k) {
          store().append(FailureRecord{prompt_group_prefix(cls.class_id, cat, f), 1, kStagePrompts,
                                       std::to_string(stats.manual_count) + " accepted prompts, k = " +
                                           std::to_string(cfg_.k)});
          ++report.failed;
        }
      }
  complete(kStagePrompts, report);
  return report;
}

std::vector<ImageRecord> Pipeline::masked_train_reals(const Manifest& m) const {
  std::vector<ImageRecord> out;
  const Workspace ws = workspace();
  for (const auto& img : m.images)
    if (img.kind == ImageKind::real && img.split == Split::train &&
        fs::exists(ws.resolve(Workspace::mask_rel(img.image_id))))
      out.push_back(img);
  return out;
}

StageReport Pipeline::maps() {
  require(kStageMaps);
  StageReport report{kStageMaps};
  const Manifest m = store().snapshot();
  const Workspace ws = workspace();
  const EditConfig base = cfg_.edit_table().resolve(cfg_.dataset_id, AttributeCategory::color, Feasibility::feasible);
  std::vector<ImageRecord> reals;
  for (const auto& img : m.images)
    if (img.kind == ImageKind::real && img.split == Split::train) reals.push_back(img);

  struct Tools {
    std::unique_ptr<DetectorBackend> det;
    std::unique_ptr<SegmenterBackend> seg;
    std::unique_ptr<MattingBackend> mat;
  };
  std::vector<Tools> tools;
  for (int w = 0; w < cfg_.parallelism; ++w) tools.push_back({factory_.detector(), factory_.segmenter(), factory_.matting()});

  struct Outcome {
    bool skipped = false;
    std::optional<FailureRecord> failure;
  };
  ordered_parallel<Outcome>(
      reals.size(), cfg_.parallelism,
      [&](std::size_t i, int w) {
        const ImageRecord& img = reals[i];
        const fs::path mask_path = ws.resolve(Workspace::mask_rel(img.image_id));
        const fs::path canny_path = ws.resolve(Workspace::canny_rel(img.image_id));
        if (fs::exists(mask_path) && fs::exists(canny_path)) return Outcome{true, {}};
        try {
          const Image image = load_image(ws.resolve(img.path));
          const ClassEntry* cls = m.find_class(img.class_id);
          const auto fg = foreground_mask(image, cls ? cls->name : "", *tools[w].det, *tools[w].seg, *tools[w].mat);
          save_binary(canny_from_foreground(image, fg.mask, base.canny_low, base.canny_high), canny_path);
          save_binary(fg.mask, mask_path);  // written last: its presence marks the image done
          return Outcome{};
        } catch (const std::exception& e) {
          return Outcome{false, FailureRecord{img.image_id, 1, kStageMaps, e.what()}};
        }
      },
      [&](std::size_t, Outcome& o) {
        if (o.failure) {
          store().append(*o.failure);
          ++report.failed;
        } else if (o.skipped) {
          ++report.skipped;
        } else {
          ++report.done;
        }
      });
  complete(kStageMaps, report);
  return report;
}

std::vector<GenerationJob> Pipeline::planned_jobs(const Manifest& m) const {
  const auto reals = masked_train_reals(m);
  std::vector<GenerationJob> jobs;
  for (auto cat : cfg_.categories) {
    auto part = pair_real_with_prompts(reals, m.prompts, cfg_.k, cat);
    jobs.insert(jobs.end(), part.begin(), part.end());
  }
  return jobs;
}

StageReport Pipeline::priors() {
  require(kStagePriors);
  StageReport report{kStagePriors};
  const Manifest m = store().snapshot();
  const Workspace ws = workspace();
  const auto table = cfg_.edit_table();
  const auto jobs = planned_jobs(m);
  std::vector<std::unique_ptr<DiffusionBackend>> diffusion;
  for (int w = 0; w < cfg_.parallelism; ++w) diffusion.push_back(factory_.diffusion());

  struct Outcome {
    bool skipped = false;
    std::optional<FailureRecord> failure;
  };
  ordered_parallel<Outcome>(
      jobs.size(), cfg_.parallelism,
      [&](std::size_t i, int w) {
        const GenerationJob& job = jobs[i];
        if (m.find_image(job.job_id) || fs::exists(ws.resolve(Workspace::prior_rel(job)))) return Outcome{true, {}};
        try {
          const GenerationBackends b{diffusion[w].get(), nullptr, nullptr, &factory_.colors()};
          job_raw_prior(job, m, ws, b, table.resolve(cfg_.dataset_id, job.category, job.feasibility), true);
          return Outcome{};
        } catch (const std::exception& e) {
          return Outcome{false, FailureRecord{job.job_id, job.attempt, kStagePriors, e.what()}};
        }
      },
      [&](std::size_t, Outcome& o) {
        if (o.failure) {
          store().append(*o.failure);
          ++report.failed;
        } else {
          ++(o.skipped ? report.skipped : report.done);
        }
      });
  complete(kStagePriors, report);
  return report;
}

namespace {

struct GenerationWorker {
  std::unique_ptr<DiffusionBackend> diffusion;
  std::unique_ptr<InpaintBackend> inpaint;
  std::unique_ptr<StructureControlBackend> control;
  GenerationBackends view(const ColorBank& colors) const {
    return {diffusion.get(), inpaint.get(), control.get(), &colors};
  }
};

}  // namespace

StageReport Pipeline::generate() {
  require(kStageGenerate);
  StageReport report{kStageGenerate};
  const Manifest m = store().snapshot();
  const Workspace ws = workspace();
  const auto table = cfg_.edit_table();
  const auto jobs = planned_jobs(m);
  std::vector<GenerationWorker> workers;
  for (int w = 0; w < cfg_.parallelism; ++w)
    workers.push_back({factory_.diffusion(), factory_.inpaint(), factory_.control()});

  struct Outcome {
    std::optional<ImageRecord> record;
    std::optional<FailureRecord> failure;
  };
  ordered_parallel<Outcome>(
      jobs.size(), cfg_.parallelism,
      [&](std::size_t i, int w) {
        const GenerationJob& job = jobs[i];
        const ImageRecord* done = m.find_image(job.job_id);
        if (done && fs::exists(ws.resolve(done->path))) return Outcome{};
        try {
          return Outcome{run_generation_job(job, m, ws, workers[w].view(factory_.colors()),
                                            table.resolve(cfg_.dataset_id, job.category, job.feasibility)),
                         std::nullopt};
        } catch (const std::exception& e) {
          return Outcome{std::nullopt, FailureRecord{job.job_id, job.attempt, kStageGenerate, e.what()}};
        }
      },
      [&](std::size_t, Outcome& o) {
        if (o.record) {
          store().append(*o.record);
          ++report.done;
        } else if (o.failure) {
          store().append(*o.failure);
          ++report.failed;
        } else {
          ++report.skipped;
        }
      });
  complete(kStageGenerate, report);
  return report;
}

StageReport Pipeline::filter() {
  require(kStageFilter);
  StageReport report{kStageFilter};
  const Manifest m = store().snapshot();
  const Workspace ws = workspace();
  const auto table = cfg_.edit_table();
  std::vector<ImageRecord> pending;
  for (const auto& img : m.images) {
    if (img.kind != ImageKind::synthetic) continue;
    if (img.filter_status == FilterStatus::unfiltered) {
      pending.push_back(img);
    } else {
      ++report.skipped;
    }
  }
  std::vector<GenerationWorker> workers;
  for (int w = 0; w < cfg_.parallelism; ++w)
    workers.push_back({factory_.diffusion(), factory_.inpaint(), factory_.control()});

  struct Outcome {
    std::optional<FilterOutcome> outcome;
    std::optional<FailureRecord> failure;
  };
  ordered_parallel<Outcome>(
      pending.size(), cfg_.parallelism,
      [&](std::size_t i, int w) {
        const ImageRecord& first = pending[i];
        try {
          const GenerationJob job = job_for(first, m);
          const PromptRecord* p = m.find_prompt(job.prompt_id);
          const ClassEntry* cls = m.find_class(first.class_id);
          if (!cls) throw Error(Errc::schema_error, "unknown class for " + first.image_id);
          const auto questions = build_questions(p->category, cls->name, p->keyword, p->feasibility,
                                                 factory_.filter_templates());
          const EditConfig ecfg = table.resolve(cfg_.dataset_id, job.category, job.feasibility);
          const auto vqa = factory_.vqa(questions);
          auto generate = [&](const GenerationJob& j) {
            if (j.attempt == first.attempt) return first;
            return run_generation_job(j, m, ws, workers[w].view(factory_.colors()), ecfg);
          };
          auto judge = [&](const ImageRecord& rec) {
            return filter_image(rec.image_id, rec.attempt, load_image(ws.resolve(rec.path)), questions, *vqa);
          };
          return Outcome{filter_and_retry(job, cfg_.retry, generate, judge), std::nullopt};
        } catch (const std::exception& e) {
          return Outcome{std::nullopt, FailureRecord{first.image_id, first.attempt, kStageFilter, e.what()}};
        }
      },
      [&](std::size_t, Outcome& o) {
        if (o.outcome) {
          store().append(o.outcome->verdict);
          store().append(o.outcome->record);
          ++report.done;
        } else {
          store().append(*o.failure);
          ++report.failed;
        }
      });
  complete(kStageFilter, report);
  return report;
}

std::string Pipeline::manifest_hash() const { return hex64(fnv1a64(serialize_manifest(manifest()))); }

RunResult Pipeline::evaluate(const std::string& name, const AdapterMap* adapters) {
  const Manifest m = manifest();
  ToyDualEncoder encoder(cfg_.encoder, cfg_.seed);
  if (adapters) encoder.adapters() = *adapters;
  TrainingSelection test;
  for (const auto& img : m.images)
    if (img.kind == ImageKind::real && img.split == Split::test) test.real.push_back(img);
  if (test.real.empty()) throw Error(Errc::empty_input, "no test images in the manifest");
  const TrainingData data = load_training_data(m, cfg_.workspace, test);
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (const auto& li : data.real) {
    images.push_back(li.image);
    labels.push_back(li.label);
    ids.push_back(li.image_id);
  }
  const auto predicted = predict(encoder, images, data.class_names, cfg_.train.test_batch_size);
  return {name, top1_accuracy(predicted, labels), prediction_set(name, ids, predicted, labels)};
}

StageReport Pipeline::train(const TrainRequest& req) {
  require(kStageTrain);
  StageReport report{kStageTrain};
  const Manifest m = store().snapshot();
  const TrainingSelection sel = select_training_records(m, req.feasibility, req.category);
  const std::string name = run_name(req);
  const fs::path ckpt_path = cfg_.workspace / "runs" / name / "adapters.json";
  const std::string data_hash = selection_hash(sel);
  if (fs::exists(ckpt_path)) {
    const auto old = load_checkpoint(ckpt_path);
    if (old.provenance.manifest_hash == data_hash && to_json(old.config) == to_json(cfg_.train)) {
      ++report.skipped;
      complete(kStageTrain, report);
      return report;
    }
  }
  const TrainingData data = load_training_data(m, cfg_.workspace, sel);
  ToyDualEncoder encoder(cfg_.encoder, cfg_.seed);
  TrainConfig tc = cfg_.train;
  if (tc.seed == 0) tc.seed = cfg_.seed;
  AdapterCheckpoint ck = varireal::train(encoder, data, req.regime, tc);
  ck.config = cfg_.train;
  ck.provenance = {data_hash, std::string(to_string(req.regime)), std::string(to_string(req.feasibility)),
                   req.category ? std::string(to_string(*req.category)) : "all"};
  save_checkpoint(ck, ckpt_path);
  if (ck.best_val_accuracy >= 0) {
    spdlog::info("trained {}: best validation {:.1f}% at step {}", name, ck.best_val_accuracy, ck.best_step);
  } else {
    spdlog::info("trained {}: {} steps, no validation split", name, ck.steps_run);
  }
  ++report.done;
  complete(kStageTrain, report);
  return report;
}

StageReport Pipeline::eval() {
  require(kStageEval);
  StageReport report{kStageEval};
  const Manifest m = store().snapshot();
  const Workspace ws = workspace();

  std::vector<RunResult> runs{evaluate("zero-shot", nullptr)};
  std::map<std::string, json> provenance;
  for (const auto& dir : sorted_entries(cfg_.workspace / "runs", true)) {
    const fs::path ckpt = dir / "adapters.json";
    if (!fs::exists(ckpt)) continue;
    const auto ck = load_checkpoint(ckpt);
    ToyDualEncoder probe(cfg_.encoder, cfg_.seed);
    if (ck.base_weight_hash != probe.base_weight_hash()) {
      store().append(FailureRecord{dir.filename().string(), 1, kStageEval, "checkpoint base weights differ"});
      ++report.failed;
      continue;
    }
    runs.push_back(evaluate(dir.filename().string(), &ck.adapters));
    provenance[runs.back().name] = {{"data_regime", ck.provenance.data_regime},
                                    {"feasibility_regime", ck.provenance.feasibility_regime},
                                    {"category", ck.provenance.category}};
  }
  report.done = runs.size();

  json j;
  std::ostringstream txt;
  char buf[200];
  txt << "run                        top-1 (%)\n";
  for (const auto& r : runs) {
    j["runs"].push_back({{"name", r.name}, {"accuracy", r.accuracy}, {"correct", r.correct.correct.size()}});
    write_text(cfg_.workspace / "eval" / "predictions" / (r.name + ".json"), to_json(r.correct).dump(2) + "\n");
    std::snprintf(buf, sizeof buf, "%-26s %9.2f\n", r.name.c_str(), r.accuracy);
    txt << buf;
  }

  // Gap metrics for every (regime, category) with all three feasibility runs.
  j["gaps"] = json::array();
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> triples;
  for (const auto& r : runs) {
    auto it = provenance.find(r.name);
    if (it == provenance.end()) continue;
    const auto& p = it->second;
    triples[{p["data_regime"], p["category"]}][p["feasibility_regime"]] = r.accuracy;
  }
  bool header = false;
  for (const auto& [key, acc] : triples) {
    if (!acc.count("F") || !acc.count("IF") || !acc.count("Mix")) continue;
    const double d1 = delta1(acc.at("F"), acc.at("IF"));
    const double d2 = delta2(acc.at("Mix"), acc.at("F"), acc.at("IF"));
    j["gaps"].push_back({{"regime", key.first},
                         {"category", key.second},
                         {"F", acc.at("F")},
                         {"IF", acc.at("IF")},
                         {"Mix", acc.at("Mix")},
                         {"delta1", round_one_decimal(d1)},
                         {"delta2", round_one_decimal(d2)}});
    if (!header) {
      txt << "\nregime   category        F      IF     Mix      D1      D2\n";
      header = true;
    }
    std::snprintf(buf, sizeof buf, "%-8s %-10s %7.1f %7.1f %7.1f %+7.1f %+7.1f\n", key.first.c_str(),
                  key.second.c_str(), acc.at("F"), acc.at("IF"), acc.at("Mix"), round_one_decimal(d1),
                  round_one_decimal(d2));
    txt << buf;
  }

  // Overlap of correctly predicted test samples between runs.
  std::vector<PredictionSet> sets;
  for (const auto& r : runs) sets.push_back(r.correct);
  json inc = json::array(), jac = json::array();
  for (const auto& a : sets) {
    json ri = json::array(), rj = json::array();
    for (const auto& b : sets) {
      ri.push_back(a.correct.empty() ? json(nullptr) : json(inclusion_coefficient(a.correct, b.correct)));
      rj.push_back(a.correct.empty() && b.correct.empty() ? json(nullptr) : json(jaccard(a.correct, b.correct)));
    }
    inc.push_back(ri);
    jac.push_back(rj);
  }
  json labels = json::array();
  for (const auto& s : sets) labels.push_back(s.label);
  j["overlap"] = {{"labels", labels}, {"inclusion", inc}, {"jaccard", jac}};

  // Similarity of accepted synthetic images to their parents.
  const ToyLinearEmbedder embedder(4, 16, cfg_.seed);
  const ToyPerceptual perceptual;
  std::map<std::string, Image> real_cache;
  auto real_image = [&](const std::string& id) -> const Image& {
    auto it = real_cache.find(id);
    if (it == real_cache.end()) it = real_cache.emplace(id, load_image(ws.resolve(m.find_image(id)->path))).first;
    return it->second;
  };
  std::vector<Image> all_real;
  for (const auto& img : m.images)
    if (img.kind == ImageKind::real && img.split == Split::train) all_real.push_back(real_image(img.image_id));
  j["similarity"] = json::array();
  txt << "\ncategory   feas   n   cosine   lpips      fid\n";
  for (auto cat : cfg_.categories) {
    for (auto f : kAllFeasibilities) {
      std::vector<Image> syn, parents;
      for (const auto& img : m.images) {
        if (img.kind != ImageKind::synthetic || img.filter_status != FilterStatus::accepted) continue;
        const PromptRecord* p = m.find_prompt(*img.prompt_id);
        if (!p || p->category != cat || p->feasibility != f) continue;
        syn.push_back(load_image(ws.resolve(img.path)));
        parents.push_back(real_image(*img.parent_real_id));
      }
      json row{{"category", to_string(cat)}, {"feasibility", to_string(f)}, {"count", syn.size()}};
      double cos = NAN, lp = NAN, fd = NAN;
      if (!syn.empty()) {
        try {
          cos = pairwise_cosine_score(embedder, syn, parents);
        } catch (const Error& e) {
          spdlog::warn("cosine score skipped: {}", e.what());
        }
        lp = lpips_score(perceptual, syn, parents);
      }
      if (syn.size() >= 2 && all_real.size() >= 2)
        fd = fid(FeatureCloud{embedder.embed(syn).transpose(), "toy-linear"},
                 FeatureCloud{embedder.embed(all_real).transpose(), "toy-linear"});
      row["cosine"] = std::isnan(cos) ? json(nullptr) : json(cos);
      row["lpips"] = std::isnan(lp) ? json(nullptr) : json(lp);
      row["fid"] = std::isnan(fd) ? json(nullptr) : json(fd);
      j["similarity"].push_back(row);
      std::snprintf(buf, sizeof buf, "%-10s %-4s %3zu %8.3f %7.3f %8.3f\n", std::string(to_string(cat)).c_str(),
                    f == Feasibility::feasible ? "F" : "IF", syn.size(), cos, lp, fd);
      txt << buf;
    }
  }

  write_text(cfg_.workspace / "eval" / "report.json", j.dump(2) + "\n");
  write_text(cfg_.workspace / "eval" / "report.txt", txt.str());
  complete(kStageEval, report);
  return report;
}

StageReport Pipeline::scale(std::optional<AttributeCategory> category) {
  require(kStageTrain);  // same precondition as training
  StageReport report{"scale"};
  const Manifest m = store().snapshot();
  std::vector<AttributeCategory> cats;
  if (category) {
    cats.push_back(*category);
  } else {
    cats = cfg_.categories;
  }
  TrainConfig tc = cfg_.train;
  if (tc.seed == 0) tc.seed = cfg_.seed;
  const auto curves = scaling_run(
      m, cfg_.scale_ratios,
      [&](const TrainingSelection& sel) {
        const TrainingData data = load_training_data(m, cfg_.workspace, sel);
        ToyDualEncoder encoder(cfg_.encoder, cfg_.seed);
        const AdapterCheckpoint ck = varireal::train(encoder, data, DataRegime::mixed, tc);
        ++report.done;
        return evaluate("scale", &ck.adapters).accuracy;
      },
      cfg_.seed, cats);
  json out = json::array();
  for (const auto& c : curves) out.push_back(to_json(c));
  write_text(cfg_.workspace / "scale" / "curves.json", out.dump(2) + "\n");
  write_scaling_svg(curves, "accuracy vs synthetic:real ratio (" + cfg_.dataset_id + ")",
                    cfg_.workspace / "scale" / "scaling.svg");
  spdlog::info("scale: {} training runs, {} curves", report.done, curves.size());
  return report;
}

fs::path Pipeline::ratings_path() const { return cfg_.workspace / "annotation" / "ratings.jsonl"; }

AnnotationSession Pipeline::annotation_session() {
  const fs::path path = cfg_.workspace / "annotation" / "session.json";
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      return AnnotationSession::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(Errc::parse_error, path.string() + ": " + e.what());
    }
  }
  require(kStageTrain);  // needs filtered images
  AnnotationSession session(sample_annotation_items(manifest(), cfg_.annotation_per_group, cfg_.seed), cfg_.seed);
  if (session.items().empty()) throw Error(Errc::empty_input, "no accepted synthetic images to annotate");
  write_text(path, session.to_json().dump(2) + "\n");
  return session;
}

StageReport Pipeline::annotate_export() {
  StageReport report{"annotate-export"};
  const AnnotationSession session = annotation_session();
  const RatingStore store(ratings_path());
  const auto ratings = store.all();
  report.done = ratings.size();
  write_text(cfg_.workspace / "annotation" / "ratings.tsv", export_ratings_tsv(ratings, session.items()));
  if (!ratings.empty()) {
    const auto rows = aggregate_ratings(ratings, session.items());
    write_text(cfg_.workspace / "annotation" / "aggregate.json", to_json(rows).dump(2) + "\n");
    write_text(cfg_.workspace / "annotation" / "aggregate.txt", format_aggregate_table(rows));
  }
  return report;
}

}  // namespace varireal
