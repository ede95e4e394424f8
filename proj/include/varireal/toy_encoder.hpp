#pragma once

#include "varireal/lora.hpp"
#include "varireal/raster.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace varireal {

using AdapterMap = std::map<std::string, LowRankAdapter>;
using GradMap = std::map<std::string, AdapterGrad>;

// Dual image/text encoder with adapters on its projection matrices. Base
// weights are frozen; only the adapters train.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual MatrixXd encode_images(const std::vector<Image>& images) const = 0;  // D x n
  virtual MatrixXd encode_texts(const std::vector<std::string>& prompts) const = 0;  // D x c
  virtual double logit_scale() const = 0;

  virtual AdapterMap& adapters() = 0;
  virtual const AdapterMap& adapters() const = 0;
  virtual std::uint64_t base_weight_hash() const = 0;

  // Mean cross-entropy of the batch against the class prompts. Adapter
  // gradients of weight * loss are added into grads.
  virtual double loss_and_gradients(const std::vector<Image>& images, const std::vector<int>& labels,
                                    const std::vector<std::string>& class_prompts, double weight,
                                    GradMap& grads) const = 0;
};

std::string class_prompt(const std::string& class_name);  // "a photo of <name>"

// logits(i, c) = cos(image_i, text_c) / temperature. Throws zero_norm.
MatrixXd classify(const MatrixXd& image_embeddings, const MatrixXd& text_embeddings, double temperature);
std::vector<int> argmax_rows(const MatrixXd& logits);

struct ToyEncoderShape {
  int grid = 8;  // image features: grid x grid x 3 cell means
  int hidden = 64;
  int embed = 32;
  int text_buckets = 256;
  int rank = 4;
  double alpha = 8;
  bool scaled = true;
  double logit_scale = 20;
};

// image: cells -> tanh(W1 x) -> W2 ; text: trigram bag -> W3.
class ToyDualEncoder : public EncoderBackend {
 public:
  ToyDualEncoder(const ToyEncoderShape& shape, std::uint64_t seed);

  MatrixXd encode_images(const std::vector<Image>& images) const override;
  MatrixXd encode_texts(const std::vector<std::string>& prompts) const override;
  double logit_scale() const override { return shape_.logit_scale; }
  AdapterMap& adapters() override { return adapters_; }
  const AdapterMap& adapters() const override { return adapters_; }
  std::uint64_t base_weight_hash() const override;
  double loss_and_gradients(const std::vector<Image>& images, const std::vector<int>& labels,
                            const std::vector<std::string>& class_prompts, double weight,
                            GradMap& grads) const override;

  const ToyEncoderShape& shape() const { return shape_; }
  VectorXd image_features(const Image& image) const;
  VectorXd text_features(const std::string& prompt) const;

  // Test access to the frozen weights.
  MatrixXd& base(const std::string& name);

 private:
  MatrixXd features(const std::vector<Image>& images) const;
  MatrixXd text_matrix(const std::vector<std::string>& prompts) const;

  ToyEncoderShape shape_;
  MatrixXd w_fc1_, w_img_proj_, w_txt_proj_;
  AdapterMap adapters_;
};

}  // namespace varireal
