#include "varireal/trainer.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"
#include "varireal/image_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace varireal {

using nlohmann::json;

std::string_view to_string(DataRegime r) {
  switch (r) {
    case DataRegime::real: return "real";
    case DataRegime::syn: return "syn";
    case DataRegime::mixed: return "mixed";
  }
  return "?";
}

std::string_view to_string(FeasibilityRegime r) {
  switch (r) {
    case FeasibilityRegime::feasible: return "F";
    case FeasibilityRegime::infeasible: return "IF";
    case FeasibilityRegime::mix: return "Mix";
  }
  return "?";
}

DataRegime parse_data_regime(std::string_view s) {
  if (s == "real") return DataRegime::real;
  if (s == "syn") return DataRegime::syn;
  if (s == "mixed" || s == "real+syn") return DataRegime::mixed;
  throw Error(Errc::invalid_argument, "unknown data regime '" + std::string(s) + "'");
}

FeasibilityRegime parse_feasibility_regime(std::string_view s) {
  if (s == "F" || s == "feasible") return FeasibilityRegime::feasible;
  if (s == "IF" || s == "infeasible") return FeasibilityRegime::infeasible;
  if (s == "Mix" || s == "mix") return FeasibilityRegime::mix;
  throw Error(Errc::invalid_argument, "unknown feasibility regime '" + std::string(s) + "'");
}

int TrainConfig::effective_validation_interval() const {
  if (validation_interval > 0) return validation_interval;
  return std::max(1, total_iterations / 70);
}

TrainConfig TrainConfig::full_scale(const std::string& dataset_id) {
  TrainConfig cfg;
  if (dataset_id == "pets")
    cfg.total_iterations = 20700;
  else if (dataset_id == "airc")
    cfg.total_iterations = 72000;
  else if (dataset_id == "cars")
    cfg.total_iterations = 91840;
  else
    throw Error(Errc::config_error, "no full-scale training budget for '" + dataset_id + "'");
  return cfg;
}

json to_json(const TrainConfig& c) {
  return json{{"lambda_mix", c.lambda_mix},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"lr_grid", c.lr_grid},
              {"wd_grid", c.wd_grid},
              {"batch_size", c.batch_size},
              {"test_batch_size", c.test_batch_size},
              {"total_iterations", c.total_iterations},
              {"warmup_fraction", c.warmup_fraction},
              {"min_lr", c.min_lr},
              {"validation_interval", c.validation_interval},
              {"validation_fraction", c.validation_fraction},
              {"augmentations", c.augmentations},
              {"single_mixed_batch", c.single_mixed_batch},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  auto read = [&](const char* k, auto& v) {
    if (auto it = j.find(k); it != j.end()) v = it->get<std::decay_t<decltype(v)>>();
  };
  try {
    read("lambda_mix", c.lambda_mix);
    read("lr", c.lr);
    read("weight_decay", c.weight_decay);
    read("lr_grid", c.lr_grid);
    read("wd_grid", c.wd_grid);
    read("batch_size", c.batch_size);
    read("test_batch_size", c.test_batch_size);
    read("total_iterations", c.total_iterations);
    read("warmup_fraction", c.warmup_fraction);
    read("min_lr", c.min_lr);
    read("validation_interval", c.validation_interval);
    read("validation_fraction", c.validation_fraction);
    read("augmentations", c.augmentations);
    read("single_mixed_batch", c.single_mixed_batch);
    read("beta1", c.beta1);
    read("beta2", c.beta2);
    read("epsilon", c.epsilon);
    read("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, std::string("train config: ") + e.what());
  }
  return c;
}

double mixed_loss(double ce_real, double ce_syn, double lambda_mix) {
  if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0)) throw Error(Errc::invalid_argument, "lambda must be in [0,1]");
  return lambda_mix * ce_real + (1.0 - lambda_mix) * ce_syn;
}

double learning_rate_at(int step, double lr, const TrainConfig& cfg) {
  const int total = std::max(1, cfg.total_iterations);
  const int warmup = static_cast<int>(std::lround(cfg.warmup_fraction * total));
  if (step <= warmup) return lr * step / warmup;
  const double progress = static_cast<double>(step - warmup) / std::max(1, total - warmup);
  return cfg.min_lr + 0.5 * (lr - cfg.min_lr) * (1.0 + std::cos(M_PI * progress));
}

TrainingSelection select_training_records(const Manifest& manifest, FeasibilityRegime feasibility,
                                          std::optional<AttributeCategory> category) {
  TrainingSelection sel;
  for (const auto& img : manifest.images) {
    if (img.split != Split::train) continue;
    if (img.kind == ImageKind::real) {
      sel.real.push_back(img);
      continue;
    }
    if (img.filter_status != FilterStatus::accepted || !img.prompt_id) continue;
    const PromptRecord* p = manifest.find_prompt(*img.prompt_id);
    if (!p) continue;
    if (category && p->category != *category) continue;
    if (feasibility == FeasibilityRegime::feasible && p->feasibility != Feasibility::feasible) continue;
    if (feasibility == FeasibilityRegime::infeasible && p->feasibility != Feasibility::infeasible) continue;
    sel.syn.push_back(img);
  }
  return sel;
}

TrainingData load_training_data(const Manifest& manifest, const std::filesystem::path& root,
                                const TrainingSelection& selection) {
  TrainingData data;
  auto classes = manifest.classes;
  std::sort(classes.begin(), classes.end(), [](auto& a, auto& b) { return a.class_id < b.class_id; });
  std::map<int, int> label_of;
  for (const auto& c : classes) {
    label_of[c.class_id] = static_cast<int>(data.class_names.size());
    data.class_names.push_back(c.name);
  }
  auto load = [&](const std::vector<ImageRecord>& recs, std::vector<LabeledImage>& out) {
    for (const auto& r : recs) out.push_back({r.image_id, load_image(root / r.path), label_of.at(r.class_id)});
  };
  load(selection.real, data.real);
  load(selection.syn, data.syn);
  return data;
}

namespace {

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

MatrixXd matrix_from_json(const json& j) {
  MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != m.rows()) throw Error(Errc::parse_error, "matrix row count mismatch");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (static_cast<Eigen::Index>(data[r].size()) != m.cols()) throw Error(Errc::parse_error, "matrix column count mismatch");
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[r][c].get<double>();
  }
  return m;
}

}  // namespace

json to_json(const AdapterCheckpoint& ck) {
  json adapters = json::object();
  for (const auto& [name, a] : ck.adapters)
    adapters[name] = {{"A", matrix_json(a.A)}, {"B", matrix_json(a.B)}, {"alpha", a.alpha}, {"scaled", a.scaled}};
  json log = json::array();
  for (const auto& e : ck.log) {
    json row{{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}};
    if (e.val_accuracy) row["val_accuracy"] = *e.val_accuracy;
    log.push_back(std::move(row));
  }
  return json{{"format", "varireal-adapters"},
              {"version", 1},
              {"adapters", std::move(adapters)},
              {"config", to_json(ck.config)},
              {"best_val_accuracy", ck.best_val_accuracy},
              {"best_step", ck.best_step},
              {"steps_run", ck.steps_run},
              {"base_weight_hash", hex64(ck.base_weight_hash)},
              {"provenance",
               {{"manifest_hash", ck.provenance.manifest_hash},
                {"data_regime", ck.provenance.data_regime},
                {"feasibility_regime", ck.provenance.feasibility_regime},
                {"category", ck.provenance.category}}},
              {"log", std::move(log)}};
}

AdapterCheckpoint checkpoint_from_json(const json& j) {
  AdapterCheckpoint ck;
  try {
    if (j.at("format") != "varireal-adapters") throw Error(Errc::parse_error, "not an adapter checkpoint");
    if (j.at("version") != 1) throw Error(Errc::schema_version_mismatch, "unsupported checkpoint version");
    for (auto it = j.at("adapters").begin(); it != j.at("adapters").end(); ++it) {
      LowRankAdapter a;
      a.A = matrix_from_json(it->at("A"));
      a.B = matrix_from_json(it->at("B"));
      a.alpha = it->at("alpha").get<double>();
      a.scaled = it->at("scaled").get<bool>();
      ck.adapters[it.key()] = std::move(a);
    }
    ck.config = train_config_from_json(j.at("config"));
    ck.best_val_accuracy = j.at("best_val_accuracy").get<double>();
    ck.best_step = j.at("best_step").get<int>();
    ck.steps_run = j.at("steps_run").get<int>();
    ck.base_weight_hash = std::stoull(j.at("base_weight_hash").get<std::string>(), nullptr, 16);
    const auto& p = j.at("provenance");
    ck.provenance = {p.at("manifest_hash"), p.at("data_regime"), p.at("feasibility_regime"), p.at("category")};
    for (const auto& e : j.at("log")) {
      TrainLogEntry entry{e.at("step"), e.at("loss"), e.at("lr"), std::nullopt};
      if (e.contains("val_accuracy")) entry.val_accuracy = e.at("val_accuracy").get<double>();
      ck.log.push_back(entry);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const AdapterCheckpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp);
    out << to_json(ckpt).dump();
    if (!out) throw Error(Errc::io_error, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

AdapterCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, std::string("checkpoint: ") + e.what());
  }
}

std::vector<int> predict(const EncoderBackend& encoder, const std::vector<Image>& images,
                         const std::vector<std::string>& class_names, int test_batch_size) {
  std::vector<std::string> prompts;
  for (const auto& n : class_names) prompts.push_back(class_prompt(n));
  const MatrixXd text = encoder.encode_texts(prompts);
  std::vector<int> out;
  const std::size_t step = static_cast<std::size_t>(std::max(1, test_batch_size));
  for (std::size_t i = 0; i < images.size(); i += step) {
    std::vector<Image> chunk(images.begin() + static_cast<std::ptrdiff_t>(i),
                             images.begin() + static_cast<std::ptrdiff_t>(std::min(images.size(), i + step)));
    const auto pred = argmax_rows(classify(encoder.encode_images(chunk), text, 1.0 / encoder.logit_scale()));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw Error(Errc::dimension_mismatch, "prediction/label counts differ");
  if (truth.empty()) throw Error(Errc::empty_input, "accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace {

// Epoch-wise sampling without replacement; one independent stream per pool.
class PoolSampler {
 public:
  PoolSampler(const std::vector<const LabeledImage*>& pool, std::uint64_t seed) : pool_(pool), rng_(seed) {}

  void next(int n, const AugmentConfig& aug, std::vector<Image>& images, std::vector<int>& labels) {
    images.clear();
    labels.clear();
    for (int i = 0; i < n; ++i) {
      if (pos_ == order_.size()) {
        order_.resize(pool_.size());
        std::iota(order_.begin(), order_.end(), 0);
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      const LabeledImage& item = *pool_[order_[pos_++]];
      images.push_back(augment(item.image, aug, rng_));
      labels.push_back(item.label);
    }
  }

 private:
  std::vector<const LabeledImage*> pool_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct AdamState {
  MatrixXd mA, vA, mB, vB;
};

}  // namespace

AdapterCheckpoint train(EncoderBackend& encoder, const TrainingData& data, DataRegime regime, const TrainConfig& cfg,
                        const std::function<void(const TrainLogEntry&)>& on_log) {
  if (cfg.total_iterations < 1) throw Error(Errc::config_error, "total_iterations must be >= 1");
  if (cfg.batch_size < 1) throw Error(Errc::config_error, "batch_size must be >= 1");
  if (!(cfg.lambda_mix >= 0 && cfg.lambda_mix <= 1)) throw Error(Errc::config_error, "lambda_mix must be in [0,1]");
  if (data.class_names.empty()) throw Error(Errc::empty_pool, "no classes");

  // Held-out validation slice of the real pool.
  std::vector<const LabeledImage*> real_pool, val_pool;
  {
    std::vector<std::size_t> idx(data.real.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 split_rng(mix64(cfg.seed ^ 0x76616c69ULL));
    std::shuffle(idx.begin(), idx.end(), split_rng);
    std::size_t n_val = data.real.size() >= 2
                            ? std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.validation_fraction * data.real.size())))
                            : 0;
    if (cfg.validation_fraction <= 0) n_val = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_val ? val_pool : real_pool).push_back(&data.real[idx[i]]);
  }
  std::vector<const LabeledImage*> syn_pool;
  for (const auto& s : data.syn) syn_pool.push_back(&s);

  const bool use_real = regime != DataRegime::syn;
  const bool use_syn = regime != DataRegime::real;
  if (use_real && real_pool.empty()) throw Error(Errc::empty_pool, "real pool is empty");
  if (use_syn && syn_pool.empty()) throw Error(Errc::empty_pool, "synthetic pool is empty");

  const AugmentConfig aug = AugmentConfig::from_names(cfg.augmentations);
  PoolSampler real_sampler(real_pool, mix64(cfg.seed ^ 0x7265616cULL));
  PoolSampler syn_sampler(syn_pool, mix64(cfg.seed ^ 0x73796e00ULL));

  std::vector<std::string> prompts;
  for (const auto& n : data.class_names) prompts.push_back(class_prompt(n));
  std::vector<Image> val_images;
  std::vector<int> val_labels;
  for (const auto* v : val_pool) {
    val_images.push_back(v->image);
    val_labels.push_back(v->label);
  }

  AdapterCheckpoint ck;
  ck.config = cfg;
  ck.base_weight_hash = encoder.base_weight_hash();
  ck.adapters = encoder.adapters();

  std::map<std::string, AdamState> adam;
  for (const auto& [name, a] : encoder.adapters())
    adam[name] = {MatrixXd::Zero(a.A.rows(), a.A.cols()), MatrixXd::Zero(a.A.rows(), a.A.cols()),
                  MatrixXd::Zero(a.B.rows(), a.B.cols()), MatrixXd::Zero(a.B.rows(), a.B.cols())};

  int real_n = cfg.batch_size, syn_n = cfg.batch_size;
  if (regime == DataRegime::mixed && cfg.single_mixed_batch) {
    real_n = std::max(1, cfg.batch_size / 2);
    syn_n = std::max(1, cfg.batch_size - real_n);
  }
  const int interval = cfg.effective_validation_interval();
  std::vector<Image> images;
  std::vector<int> labels;

  for (int step = 1; step <= cfg.total_iterations; ++step) {
    GradMap grads;
    double loss = 0;
    if (regime == DataRegime::mixed) {
      real_sampler.next(real_n, aug, images, labels);
      const double ce_real = encoder.loss_and_gradients(images, labels, prompts, cfg.lambda_mix, grads);
      syn_sampler.next(syn_n, aug, images, labels);
      const double ce_syn = encoder.loss_and_gradients(images, labels, prompts, 1.0 - cfg.lambda_mix, grads);
      loss = mixed_loss(ce_real, ce_syn, cfg.lambda_mix);
    } else {
      (use_real ? real_sampler : syn_sampler).next(cfg.batch_size, aug, images, labels);
      loss = encoder.loss_and_gradients(images, labels, prompts, 1.0, grads);
    }
    if (!std::isfinite(loss))
      throw Error(Errc::divergence, "loss became non-finite at step " + std::to_string(step) + " (lr " +
                                        std::to_string(cfg.lr) + ")");

    const double lr = learning_rate_at(step, cfg.lr, cfg);
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    for (auto& [name, a] : encoder.adapters()) {
      auto& st = adam.at(name);
      const auto& g = grads.at(name);
      auto update = [&](MatrixXd& p, MatrixXd& m, MatrixXd& v, const MatrixXd& grad) {
        m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
        v = cfg.beta2 * v + (1 - cfg.beta2) * grad.cwiseProduct(grad);
        p *= 1.0 - lr * cfg.weight_decay;
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
      };
      update(a.A, st.mA, st.vA, g.dA);
      update(a.B, st.mB, st.vB, g.dB);
    }

    TrainLogEntry entry{step, loss, lr, std::nullopt};
    if (!val_images.empty() && (step % interval == 0 || step == cfg.total_iterations)) {
      const double acc = accuracy_percent(predict(encoder, val_images, data.class_names, cfg.test_batch_size), val_labels);
      entry.val_accuracy = acc;
      if (acc > ck.best_val_accuracy) {
        ck.best_val_accuracy = acc;
        ck.best_step = step;
        ck.adapters = encoder.adapters();
      }
    }
    ck.log.push_back(entry);
    if (on_log) on_log(entry);
  }
  ck.steps_run = cfg.total_iterations;
  if (val_images.empty()) {
    ck.best_step = cfg.total_iterations;
    ck.adapters = encoder.adapters();
  }
  encoder.adapters() = ck.adapters;
  if (encoder.base_weight_hash() != ck.base_weight_hash)
    throw Error(Errc::precondition, "pretrained weights changed during training");
  spdlog::debug("trained {} steps, best val {:.2f}% at step {}", ck.steps_run, ck.best_val_accuracy, ck.best_step);
  return ck;
}

std::pair<double, double> select_hyperparameters(const std::vector<double>& lr_grid, const std::vector<double>& wd_grid,
                                                 const std::function<double(double, double)>& validation_fn) {
  if (lr_grid.empty() || wd_grid.empty()) throw Error(Errc::invalid_argument, "empty hyperparameter grid");
  std::optional<std::pair<double, double>> best;
  double best_score = 0;
  for (double lr : lr_grid)
    for (double wd : wd_grid) {
      const double score = validation_fn(lr, wd);
      const bool better = !best || score > best_score ||
                          (score == best_score && (lr < best->first || (lr == best->first && wd < best->second)));
      if (better) {
        best = {lr, wd};
        best_score = score;
      }
    }
  return *best;
}

}  // namespace varireal
