#pragma once

#include "varireal/lora.hpp"
#include "varireal/raster.hpp"

#include <json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace varireal {

// Percentage of rows whose arg-max (lowest index on ties) equals the label.
double top1_accuracy(const MatrixXd& logits, const std::vector<int>& labels);
double top1_accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

// Feasible minus infeasible accuracy.
double delta1(double f_acc, double if_acc);
// Gain of mixed-feasibility training over the mean of the two pure runs.
double delta2(double mix_acc, double f_acc, double if_acc);

// One decimal, halves rounded away from zero. A 1e-9 slack absorbs binary
// representation error, so 95.2 - 95.35 rounds to -0.2.
double round_one_decimal(double v);
long long tenths(double v);  // round_one_decimal(v) * 10 as an integer

struct PredictionSet {
  std::string label;
  std::set<std::string> correct;  // test-sample ids predicted correctly
};

// ids, predictions and labels are parallel.
PredictionSet prediction_set(const std::string& label, const std::vector<std::string>& ids,
                             const std::vector<int>& predicted, const std::vector<int>& labels);

// |A n B| / |A|. Throws empty_input when A is empty.
double inclusion_coefficient(const std::set<std::string>& a, const std::set<std::string>& b);
// |A n B| / |A u B|. Throws empty_input when both are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Row i, column j: inclusion_coefficient(sets[i], sets[j]) or jaccard.
MatrixXd inclusion_matrix(const std::vector<PredictionSet>& sets);
MatrixXd jaccard_matrix(const std::vector<PredictionSet>& sets);

nlohmann::json to_json(const PredictionSet& s);  // ids as a sorted list
PredictionSet prediction_set_from_json(const nlohmann::json& j);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual MatrixXd embed(const std::vector<Image>& images) const = 0;  // D x n
};

// Cell means on a grid x grid raster, centred so that 128 maps to 0, then an
// optional linear projection. Mid-grey images embed to the zero vector.
class ToyLinearEmbedder : public EmbeddingBackend {
 public:
  explicit ToyLinearEmbedder(int grid = 8);
  ToyLinearEmbedder(int grid, int dim, std::uint64_t seed);

  MatrixXd embed(const std::vector<Image>& images) const override;
  int dim() const;

 private:
  int grid_;
  MatrixXd projection_;  // empty: identity
};

// Mean cosine between embed(syn[i]) and embed(real[i]). Throws zero_norm.
double pairwise_cosine_score(const EmbeddingBackend& backend, const std::vector<Image>& synthetic,
                             const std::vector<Image>& real_parents);

class PerceptualBackend {
 public:
  virtual ~PerceptualBackend() = default;
  virtual double distance(const Image& a, const Image& b) const = 0;
};

// Root mean square of the per-sample difference scaled to [0,1].
class ToyPerceptual : public PerceptualBackend {
 public:
  double distance(const Image& a, const Image& b) const override;
};

double lpips_score(const PerceptualBackend& backend, const std::vector<Image>& synthetic,
                   const std::vector<Image>& real_parents);

}  // namespace varireal
