#include <doctest.h>

#include "test_support.hpp"
#include "varireal/error.hpp"
#include "varireal/trainer.hpp"

#include <set>

using namespace varireal;

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

TrainingData gradients(int per_class, std::uint32_t seed, int syn_per_class = 0) {
  std::mt19937 rng(seed);
  TrainingData d;
  d.class_names = {"top lit", "bottom lit"};
  for (int label = 0; label < 2; ++label) {
    for (int i = 0; i < per_class; ++i)
      d.real.push_back({"r" + std::to_string(label) + "_" + std::to_string(i), vrtest::gradient_image(rng, label), label});
    for (int i = 0; i < syn_per_class; ++i)
      d.syn.push_back({"s" + std::to_string(label) + "_" + std::to_string(i), vrtest::gradient_image(rng, label), label});
  }
  return d;
}

TrainConfig small_config(int iterations) {
  TrainConfig cfg;
  cfg.total_iterations = iterations;
  cfg.batch_size = 16;
  cfg.lr = 5e-3;
  cfg.weight_decay = 1e-4;
  cfg.validation_interval = 25;
  cfg.seed = 3;
  return cfg;
}

std::vector<Image> images_of(const std::vector<LabeledImage>& v) {
  std::vector<Image> out;
  for (const auto& x : v) out.push_back(x.image);
  return out;
}

std::vector<int> labels_of(const std::vector<LabeledImage>& v) {
  std::vector<int> out;
  for (const auto& x : v) out.push_back(x.label);
  return out;
}

ToyEncoderShape toy_shape() { return ToyEncoderShape{}; }

}  // namespace

TEST_CASE("adapted_forward identities") {
  std::mt19937_64 rng(1);
  const MatrixXd W0 = MatrixXd::Random(5, 7);
  const VectorXd x = VectorXd::Random(7);
  const auto zero_b = LowRankAdapter::create(5, 7, 2, 4, rng);
  CHECK(zero_b.B.isZero(0));
  CHECK(adapted_forward(W0, zero_b, x) == W0 * x);

  LowRankAdapter hand;
  hand.A = MatrixXd{{1, 0}};
  hand.B = MatrixXd{{1}, {0}};
  hand.alpha = 1;
  const VectorXd h = adapted_forward(MatrixXd::Identity(2, 2), hand, VectorXd{{1, 2}});
  CHECK(h(0) == 2);
  CHECK(h(1) == 2);

  auto rank16 = LowRankAdapter::create(64, 64, 16, 32, rng);
  CHECK(rank16.scale() == 2.0);
  rank16.scaled = false;
  CHECK(rank16.scale() == 1.0);

  CHECK(error_code_of([&] { adapted_forward(W0, zero_b, VectorXd(VectorXd::Random(6))); }) == Errc::shape_mismatch);
  LowRankAdapter bad = zero_b;
  bad.B = MatrixXd::Zero(4, 2);
  CHECK(error_code_of([&] { adapted_forward(W0, bad, x); }) == Errc::shape_mismatch);
}

TEST_CASE("classify") {
  const MatrixXd text{{1, 0, -1}, {0, 1, 0}};  // 3 classes in 2-d
  const MatrixXd img{{1, 0.6}, {0, 0.8}};      // 2 images
  const MatrixXd logits = classify(img, text, 0.5);
  CHECK(logits(0, 0) == doctest::Approx(2.0));
  CHECK(logits(0, 1) == doctest::Approx(0.0));
  CHECK(logits(0, 2) == doctest::Approx(-2.0));
  CHECK(logits(1, 0) == doctest::Approx(1.2));
  CHECK(logits(1, 1) == doctest::Approx(1.6));
  CHECK(argmax_rows(logits) == std::vector<int>{0, 1});
  CHECK(argmax_rows(classify(3 * img, text, 0.5)) == argmax_rows(logits));
  MatrixXd zero = img;
  zero.col(1).setZero();
  CHECK(error_code_of([&] { classify(zero, text, 1.0); }) == Errc::zero_norm);
}

TEST_CASE("mixed_loss and schedule") {
  CHECK(mixed_loss(1.2, 0.8, 0.5) == doctest::Approx(1.0));
  CHECK(mixed_loss(1.2, 0.8, 1.0) == 1.2);
  CHECK(mixed_loss(1.2, 0.8, 0.0) == 0.8);
  CHECK_THROWS_AS(mixed_loss(1, 1, 1.5), Error);

  TrainConfig cfg;
  cfg.total_iterations = 200;
  CHECK(learning_rate_at(1, 1e-3, cfg) == doctest::Approx(1e-4));
  CHECK(learning_rate_at(10, 1e-3, cfg) == doctest::Approx(1e-3));
  CHECK(learning_rate_at(200, 1e-3, cfg) == doctest::Approx(1e-8));
  for (int s = 11; s < 200; ++s) CHECK(learning_rate_at(s + 1, 1e-3, cfg) <= learning_rate_at(s, 1e-3, cfg));

  const auto pets = TrainConfig::full_scale("pets");
  CHECK(pets.total_iterations == 20700);
  CHECK(pets.effective_validation_interval() == 20700 / 70);
  CHECK(TrainConfig::full_scale("airc").total_iterations == 72000);
  CHECK(TrainConfig::full_scale("cars").total_iterations == 91840);
  CHECK(pets.batch_size == 64);
  CHECK(pets.test_batch_size == 8);
  CHECK(pets.lambda_mix == 0.5);
  CHECK(pets.warmup_fraction == 0.05);
  CHECK(train_config_from_json(to_json(pets)).total_iterations == 20700);
}

TEST_CASE("zero adapters reproduce the pretrained encoder") {
  ToyDualEncoder enc(toy_shape(), 9);
  std::mt19937 rng(2);
  std::vector<Image> imgs{vrtest::random_image(rng, 20, 20), vrtest::gradient_image(rng, 1)};
  MatrixXd X(enc.image_features(imgs[0]).size(), 2);
  X.col(0) = enc.image_features(imgs[0]);
  X.col(1) = enc.image_features(imgs[1]);
  const MatrixXd expected = enc.base("image.proj") * (enc.base("image.fc1") * X).array().tanh().matrix();
  CHECK(enc.encode_images(imgs) == expected);
  const MatrixXd t = enc.base("text.proj") * enc.text_features("a photo of cat");
  CHECK(enc.encode_texts({"a photo of cat"}) == t);
}

TEST_CASE("analytic adapter gradients match finite differences") {
  ToyEncoderShape shape;
  shape.hidden = 12;
  shape.embed = 6;
  shape.text_buckets = 32;
  shape.grid = 4;
  shape.rank = 2;
  ToyDualEncoder enc(shape, 4);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 0.3);
  for (auto& [name, a] : enc.adapters())
    for (Eigen::Index i = 0; i < a.B.size(); ++i) a.B.data()[i] = n(rng);

  std::mt19937 irng(6);
  const std::vector<Image> imgs{vrtest::random_image(irng, 12, 12), vrtest::random_image(irng, 12, 12),
                                vrtest::random_image(irng, 12, 12)};
  const std::vector<int> labels{0, 2, 1};
  const std::vector<std::string> prompts{"a photo of ant", "a photo of bee", "a photo of cat"};
  GradMap grads;
  enc.loss_and_gradients(imgs, labels, prompts, 1.0, grads);
  auto loss = [&] {
    GradMap scratch;
    return enc.loss_and_gradients(imgs, labels, prompts, 1.0, scratch);
  };
  int checked = 0;
  for (auto& [name, a] : enc.adapters()) {
    for (MatrixXd* m : {&a.A, &a.B}) {
      const MatrixXd& g = m == &a.A ? grads.at(name).dA : grads.at(name).dB;
      for (Eigen::Index i = 0; i < m->size(); i += 3) {
        const double orig = m->data()[i];
        const double h = 1e-5;
        m->data()[i] = orig + h;
        const double up = loss();
        m->data()[i] = orig - h;
        const double down = loss();
        m->data()[i] = orig;
        const double numeric = (up - down) / (2 * h);
        const double analytic = g.data()[i];
        CHECK(std::abs(numeric - analytic) <= 1e-4 * std::max(1.0, std::abs(numeric)) + 1e-8);
        ++checked;
      }
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("toy training overfits a two-class problem") {
  for (std::uint64_t seed : {11, 21, 31, 41}) {
    const TrainingData data = gradients(16, static_cast<std::uint32_t>(seed));
    ToyDualEncoder enc(toy_shape(), seed);
    const auto before = enc.base_weight_hash();
    auto cfg = small_config(300);
    cfg.seed = seed;
    const auto ck = train(enc, data, DataRegime::real, cfg);
    CHECK(ck.steps_run == 300);
    CHECK(ck.log.size() == 300);
    CHECK(enc.base_weight_hash() == before);
    const double acc = accuracy_percent(predict(enc, images_of(data.real), data.class_names), labels_of(data.real));
    MESSAGE("seed " << seed << " train accuracy " << acc << " best step " << ck.best_step);
    CHECK(acc >= 95.0);
  }
}

TEST_CASE("lambda 1 mixed run follows the real-only trajectory") {
  const TrainingData data = gradients(10, 8, 6);
  auto cfg = small_config(40);
  cfg.lambda_mix = 1.0;
  ToyDualEncoder a(toy_shape(), 12), b(toy_shape(), 12);
  const auto real_only = train(a, data, DataRegime::real, cfg);
  const auto mixed = train(b, data, DataRegime::mixed, cfg);
  REQUIRE(real_only.log.size() == mixed.log.size());
  for (std::size_t i = 0; i < real_only.log.size(); ++i) {
    CHECK(real_only.log[i].loss == mixed.log[i].loss);
    CHECK(real_only.log[i].val_accuracy == mixed.log[i].val_accuracy);
  }
  CHECK(real_only.adapters == mixed.adapters);

  cfg.lambda_mix = 0.0;
  ToyDualEncoder c(toy_shape(), 12), d(toy_shape(), 12);
  const auto syn_only = train(c, data, DataRegime::syn, cfg);
  const auto mixed0 = train(d, data, DataRegime::mixed, cfg);
  for (std::size_t i = 0; i < syn_only.log.size(); ++i) CHECK(syn_only.log[i].loss == mixed0.log[i].loss);
}

TEST_CASE("iteration budget is regime independent") {
  const TrainingData data = gradients(6, 9, 3);
  auto cfg = small_config(17);
  cfg.single_mixed_batch = true;
  for (auto regime : {DataRegime::real, DataRegime::syn, DataRegime::mixed}) {
    ToyDualEncoder enc(toy_shape(), 13);
    CHECK(train(enc, data, regime, cfg).steps_run == 17);
  }
}

TEST_CASE("training errors") {
  const TrainingData no_syn = gradients(4, 10);
  ToyDualEncoder enc(toy_shape(), 14);
  CHECK(error_code_of([&] { train(enc, no_syn, DataRegime::syn, small_config(5)); }) == Errc::empty_pool);
  CHECK(error_code_of([&] { train(enc, no_syn, DataRegime::mixed, small_config(5)); }) == Errc::empty_pool);
  auto wild = small_config(30);
  wild.lr = 1e300;
  wild.warmup_fraction = 0;
  CHECK(error_code_of([&] { train(enc, no_syn, DataRegime::real, wild); }) == Errc::divergence);
}

TEST_CASE("checkpoints reload to identical predictions") {
  const TrainingData data = gradients(8, 11);
  ToyDualEncoder enc(toy_shape(), 15);
  auto ck = train(enc, data, DataRegime::real, small_config(30));
  ck.provenance = {"abc", "real", "F", "background"};
  const auto dir = vrtest::fresh_dir("ckpt");
  save_checkpoint(ck, dir / "a.json");
  const auto loaded = load_checkpoint(dir / "a.json");
  CHECK(loaded.adapters == ck.adapters);
  CHECK(loaded.provenance.category == "background");
  CHECK(loaded.base_weight_hash == ck.base_weight_hash);
  ToyDualEncoder fresh(toy_shape(), 15);
  fresh.adapters() = loaded.adapters;
  const auto imgs = images_of(data.real);
  CHECK(fresh.encode_images(imgs) == enc.encode_images(imgs));
  CHECK(predict(fresh, imgs, data.class_names) == predict(enc, imgs, data.class_names));
  CHECK_FALSE(std::filesystem::exists(dir / "a.json.tmp"));
}

TEST_CASE("select_hyperparameters") {
  const TrainConfig cfg;
  int calls = 0;
  auto best = select_hyperparameters(cfg.lr_grid, cfg.wd_grid, [&](double lr, double wd) {
    ++calls;
    return lr == 1e-4 && wd == 5e-5 ? 90.0 : 80.0;
  });
  CHECK(calls == 15);
  CHECK(best == std::pair{1e-4, 5e-5});
  CHECK(select_hyperparameters({3e-4}, {1e-2}, [](double, double) { return 1.0; }) == std::pair{3e-4, 1e-2});
  // Ties go to the smaller lr, then the smaller wd.
  best = select_hyperparameters(cfg.lr_grid, cfg.wd_grid, [](double lr, double) { return lr >= 1e-4 ? 50.0 : 40.0; });
  CHECK(best == std::pair{1e-4, 5e-5});
  CHECK_THROWS_AS(select_hyperparameters({}, {1.0}, [](double, double) { return 0.0; }), Error);
}

TEST_CASE("training selection never includes rejected synthetic images") {
  std::mt19937 rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    Manifest m;
    m.classes = {{0, "a", "d"}, {1, "b", "d"}};
    for (int p = 0; p < 6; ++p) {
      auto rec = vrtest::accepted_prompt("p" + std::to_string(p), p % 2, kAllCategories[p % 3],
                                         p < 3 ? Feasibility::feasible : Feasibility::infeasible, "k");
      m.prompts.push_back(rec);
    }
    for (int r = 0; r < 4; ++r) m.images.push_back(vrtest::real_image("r" + std::to_string(r), r % 2));
    for (int s = 0; s < 20; ++s) {
      ImageRecord img;
      img.image_id = "s" + std::to_string(s);
      const auto& p = m.prompts[rng() % 6];
      img.class_id = p.class_id;
      img.kind = ImageKind::synthetic;
      img.parent_real_id = "r" + std::to_string(p.class_id);
      img.prompt_id = p.prompt_id;
      img.attempt = 1;
      img.filter_status = static_cast<FilterStatus>(rng() % 3);
      m.images.push_back(img);
    }
    for (auto fr : {FeasibilityRegime::feasible, FeasibilityRegime::infeasible, FeasibilityRegime::mix}) {
      const auto sel = select_training_records(m, fr);
      CHECK(sel.real.size() == 4);
      for (const auto& s : sel.syn) {
        CHECK(s.filter_status == FilterStatus::accepted);
        const auto f = m.find_prompt(*s.prompt_id)->feasibility;
        if (fr == FeasibilityRegime::feasible) CHECK(f == Feasibility::feasible);
        if (fr == FeasibilityRegime::infeasible) CHECK(f == Feasibility::infeasible);
      }
    }
    const auto bg = select_training_records(m, FeasibilityRegime::mix, AttributeCategory::background);
    for (const auto& s : bg.syn) CHECK(m.find_prompt(*s.prompt_id)->category == AttributeCategory::background);
  }
}

TEST_CASE("augment keeps size and is seed-deterministic") {
  std::mt19937 rng(17);
  const Image img = vrtest::random_image(rng, 24, 18);
  const auto cfg = AugmentConfig::from_names(TrainConfig{}.augmentations);
  std::mt19937_64 a(1), b(1);
  for (int i = 0; i < 20; ++i) {
    const Image x = augment(img, cfg, a);
    CHECK(same_size(x, img));
    CHECK(x == augment(img, cfg, b));
  }
  CHECK(augment(img, AugmentConfig{}, a) == img);
  CHECK_THROWS_AS(AugmentConfig::from_names({"mixup"}), Error);
}
