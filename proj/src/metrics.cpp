#include "varireal/metrics.hpp"

#include "varireal/error.hpp"
#include "varireal/toy_encoder.hpp"
#include "varireal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <random>

namespace varireal {

double top1_accuracy(const MatrixXd& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw Error(Errc::dimension_mismatch, "logit rows and labels differ");
  return accuracy_percent(argmax_rows(logits), labels);
}

double top1_accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  return accuracy_percent(predicted, labels);
}

double delta1(double f_acc, double if_acc) { return f_acc - if_acc; }

double delta2(double mix_acc, double f_acc, double if_acc) { return mix_acc - (f_acc + if_acc) / 2.0; }

long long tenths(double v) {
  const double scaled = std::fabs(v) * 10.0;
  const long long n = static_cast<long long>(std::floor(scaled + 0.5 + 1e-9));
  return v < 0 ? -n : n;
}

double round_one_decimal(double v) { return static_cast<double>(tenths(v)) / 10.0; }

PredictionSet prediction_set(const std::string& label, const std::vector<std::string>& ids,
                             const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (ids.size() != predicted.size() || ids.size() != labels.size())
    throw Error(Errc::dimension_mismatch, "ids, predictions and labels must be parallel");
  PredictionSet s{label, {}};
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (predicted[i] == labels[i]) s.correct.insert(ids[i]);
  return s;
}

namespace {

std::size_t intersection_size(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

}  // namespace

double inclusion_coefficient(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty()) throw Error(Errc::empty_input, "inclusion coefficient of an empty set");
  return static_cast<double>(intersection_size(a, b)) / static_cast<double>(a.size());
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) throw Error(Errc::empty_input, "jaccard of two empty sets");
  const std::size_t inter = intersection_size(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

MatrixXd inclusion_matrix(const std::vector<PredictionSet>& sets) {
  const auto n = static_cast<Eigen::Index>(sets.size());
  MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = inclusion_coefficient(sets[static_cast<std::size_t>(i)].correct, sets[static_cast<std::size_t>(j)].correct);
  return m;
}

MatrixXd jaccard_matrix(const std::vector<PredictionSet>& sets) {
  const auto n = static_cast<Eigen::Index>(sets.size());
  MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = jaccard(sets[static_cast<std::size_t>(i)].correct, sets[static_cast<std::size_t>(j)].correct);
  return m;
}

nlohmann::json to_json(const PredictionSet& s) {
  return {{"label", s.label}, {"correct", std::vector<std::string>(s.correct.begin(), s.correct.end())}};
}

PredictionSet prediction_set_from_json(const nlohmann::json& j) {
  try {
    PredictionSet s;
    s.label = j.at("label").get<std::string>();
    for (const auto& id : j.at("correct")) s.correct.insert(id.get<std::string>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema_error, std::string("prediction set: ") + e.what());
  }
}

ToyLinearEmbedder::ToyLinearEmbedder(int grid) : grid_(grid) {
  if (grid < 1) throw Error(Errc::invalid_argument, "embedder grid must be positive");
}

ToyLinearEmbedder::ToyLinearEmbedder(int grid, int dim, std::uint64_t seed) : ToyLinearEmbedder(grid) {
  if (dim < 1) throw Error(Errc::invalid_argument, "embedding dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  projection_.resize(dim, grid * grid * 3);
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = n(rng);
}

int ToyLinearEmbedder::dim() const {
  return projection_.size() == 0 ? grid_ * grid_ * 3 : static_cast<int>(projection_.rows());
}

MatrixXd ToyLinearEmbedder::embed(const std::vector<Image>& images) const {
  const int features = grid_ * grid_ * 3;
  MatrixXd cells = MatrixXd::Zero(features, static_cast<Eigen::Index>(images.size()));
  for (std::size_t k = 0; k < images.size(); ++k) {
    const Image& img = images[k];
    if (img.empty()) throw Error(Errc::invalid_argument, "cannot embed an empty image");
    std::vector<double> sum(static_cast<std::size_t>(features), 0.0);
    std::vector<int> count(static_cast<std::size_t>(grid_ * grid_), 0);
    for (int y = 0; y < img.height; ++y) {
      const int gy = y * grid_ / img.height;
      for (int x = 0; x < img.width; ++x) {
        const int cell = gy * grid_ + x * grid_ / img.width;
        ++count[static_cast<std::size_t>(cell)];
        for (int c = 0; c < 3; ++c) {
          const int src = img.channels == 3 ? c : 0;
          sum[static_cast<std::size_t>(cell * 3 + c)] += (img.at(x, y, src) - 128.0) / 127.0;
        }
      }
    }
    for (int f = 0; f < features; ++f) {
      const int n = count[static_cast<std::size_t>(f / 3)];
      cells(f, static_cast<Eigen::Index>(k)) = n > 0 ? sum[static_cast<std::size_t>(f)] / n : 0.0;
    }
  }
  if (projection_.size() == 0) return cells;
  return projection_ * cells;
}

double pairwise_cosine_score(const EmbeddingBackend& backend, const std::vector<Image>& synthetic,
                             const std::vector<Image>& real_parents) {
  if (synthetic.size() != real_parents.size())
    throw Error(Errc::dimension_mismatch, "every synthetic image needs its real parent");
  if (synthetic.empty()) throw Error(Errc::empty_input, "no image pairs");
  const MatrixXd a = backend.embed(synthetic);
  const MatrixXd b = backend.embed(real_parents);
  double total = 0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double na = a.col(i).norm();
    const double nb = b.col(i).norm();
    if (na == 0.0 || nb == 0.0) throw Error(Errc::zero_norm, "zero-norm embedding in pair " + std::to_string(i));
    total += a.col(i).dot(b.col(i)) / (na * nb);
  }
  return total / static_cast<double>(a.cols());
}

double ToyPerceptual::distance(const Image& a, const Image& b) const {
  if (!same_size(a, b) || a.channels != b.channels) throw Error(Errc::dimension_mismatch, "perceptual pair sizes differ");
  if (a.data.empty()) throw Error(Errc::empty_input, "empty image pair");
  double sq = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = (static_cast<double>(a.data[i]) - b.data[i]) / 255.0;
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(a.data.size()));
}

double lpips_score(const PerceptualBackend& backend, const std::vector<Image>& synthetic,
                   const std::vector<Image>& real_parents) {
  if (synthetic.size() != real_parents.size())
    throw Error(Errc::dimension_mismatch, "every synthetic image needs its real parent");
  if (synthetic.empty()) throw Error(Errc::empty_input, "no image pairs");
  double total = 0;
  for (std::size_t i = 0; i < synthetic.size(); ++i) total += backend.distance(synthetic[i], real_parents[i]);
  return total / static_cast<double>(synthetic.size());
}

}  // namespace varireal
