#include "varireal/toy_encoder.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"

#include <cctype>
#include <cmath>

namespace varireal {

namespace {

constexpr const char* kFc1 = "image.fc1";
constexpr const char* kImgProj = "image.proj";
constexpr const char* kTxtProj = "text.proj";

MatrixXd gaussian(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

VectorXd column_norms(const MatrixXd& m) {
  VectorXd n = m.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < n.size(); ++i) {
    if (!std::isfinite(n(i))) throw Error(Errc::divergence, "embedding " + std::to_string(i) + " is not finite");
    if (!(n(i) > 0.0)) throw Error(Errc::zero_norm, "embedding " + std::to_string(i) + " has zero norm");
  }
  return n;
}

}  // namespace

std::string class_prompt(const std::string& class_name) { return "a photo of " + class_name; }

MatrixXd classify(const MatrixXd& image_embeddings, const MatrixXd& text_embeddings, double temperature) {
  if (image_embeddings.rows() != text_embeddings.rows())
    throw Error(Errc::shape_mismatch, "image and text embeddings differ in dimension");
  if (!(temperature > 0)) throw Error(Errc::invalid_argument, "temperature must be > 0");
  const VectorXd ni = column_norms(image_embeddings);
  const VectorXd nt = column_norms(text_embeddings);
  MatrixXd logits = image_embeddings.transpose() * text_embeddings;  // n x c
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) logits(i, c) /= ni(i) * nt(c) * temperature;
  return logits;
}

std::vector<int> argmax_rows(const MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

ToyDualEncoder::ToyDualEncoder(const ToyEncoderShape& shape, std::uint64_t seed) : shape_(shape) {
  std::mt19937_64 rng(seed);
  const int features = shape.grid * shape.grid * 3;
  w_fc1_ = gaussian(shape.hidden, features, 2.0 / std::sqrt(static_cast<double>(features)), rng);
  w_img_proj_ = gaussian(shape.embed, shape.hidden, 1.0 / std::sqrt(static_cast<double>(shape.hidden)), rng);
  w_txt_proj_ = gaussian(shape.embed, shape.text_buckets, 1.0, rng);
  auto add = [&](const char* name, const MatrixXd& w) {
    auto a = LowRankAdapter::create(static_cast<int>(w.rows()), static_cast<int>(w.cols()), shape.rank, shape.alpha, rng);
    a.scaled = shape.scaled;
    adapters_[name] = std::move(a);
  };
  add(kFc1, w_fc1_);
  add(kImgProj, w_img_proj_);
  add(kTxtProj, w_txt_proj_);
}

MatrixXd& ToyDualEncoder::base(const std::string& name) {
  if (name == kFc1) return w_fc1_;
  if (name == kImgProj) return w_img_proj_;
  if (name == kTxtProj) return w_txt_proj_;
  throw Error(Errc::not_found, "no base weight " + name);
}

std::uint64_t ToyDualEncoder::base_weight_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const MatrixXd* m : {&w_fc1_, &w_img_proj_, &w_txt_proj_})
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(m->data()), sizeof(double) * m->size()), h);
  return h;
}

VectorXd ToyDualEncoder::image_features(const Image& image) const {
  if (image.empty()) throw Error(Errc::invalid_argument, "empty image");
  const int g = shape_.grid;
  VectorXd f(g * g * 3);
  for (int cy = 0; cy < g; ++cy) {
    const int y0 = cy * image.height / g, y1 = std::max(y0 + 1, (cy + 1) * image.height / g);
    for (int cx = 0; cx < g; ++cx) {
      const int x0 = cx * image.width / g, x1 = std::max(x0 + 1, (cx + 1) * image.width / g);
      for (int c = 0; c < 3; ++c) {
        const int ch = std::min(c, image.channels - 1);
        double sum = 0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) sum += image.at(x, y, ch);
        f((cy * g + cx) * 3 + c) = sum / ((y1 - y0) * (x1 - x0)) / 255.0 - 0.5;
      }
    }
  }
  return f;
}

VectorXd ToyDualEncoder::text_features(const std::string& prompt) const {
  std::string s = " ";
  for (char c : prompt) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  s += " ";
  VectorXd t = VectorXd::Zero(shape_.text_buckets);
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) t(static_cast<Eigen::Index>(fnv1a64(s.substr(i, 3)) % shape_.text_buckets)) += 1.0;
  const double n = t.norm();
  if (n > 0) t /= n;
  return t;
}

MatrixXd ToyDualEncoder::features(const std::vector<Image>& images) const {
  MatrixXd X(shape_.grid * shape_.grid * 3, static_cast<Eigen::Index>(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = image_features(images[i]);
  return X;
}

MatrixXd ToyDualEncoder::text_matrix(const std::vector<std::string>& prompts) const {
  MatrixXd T(shape_.text_buckets, static_cast<Eigen::Index>(prompts.size()));
  for (std::size_t i = 0; i < prompts.size(); ++i) T.col(static_cast<Eigen::Index>(i)) = text_features(prompts[i]);
  return T;
}

MatrixXd ToyDualEncoder::encode_images(const std::vector<Image>& images) const {
  const MatrixXd H = adapted_forward(w_fc1_, adapters_.at(kFc1), features(images)).array().tanh().matrix();
  return adapted_forward(w_img_proj_, adapters_.at(kImgProj), H);
}

MatrixXd ToyDualEncoder::encode_texts(const std::vector<std::string>& prompts) const {
  return adapted_forward(w_txt_proj_, adapters_.at(kTxtProj), text_matrix(prompts));
}

double ToyDualEncoder::loss_and_gradients(const std::vector<Image>& images, const std::vector<int>& labels,
                                          const std::vector<std::string>& class_prompts, double weight,
                                          GradMap& grads) const {
  if (images.empty() || images.size() != labels.size())
    throw Error(Errc::invalid_argument, "batch needs matching, non-empty images and labels");
  const auto n = static_cast<Eigen::Index>(images.size());
  const auto C = static_cast<Eigen::Index>(class_prompts.size());
  for (int l : labels)
    if (l < 0 || l >= C) throw Error(Errc::invalid_argument, "label out of range");
  for (const auto& [name, a] : adapters_)
    if (!grads.count(name)) grads.emplace(name, AdapterGrad::zeros_like(a));

  // Forward.
  const MatrixXd X = features(images);
  const MatrixXd Hpre = adapted_forward(w_fc1_, adapters_.at(kFc1), X);
  const MatrixXd H = Hpre.array().tanh().matrix();
  const MatrixXd U = adapted_forward(w_img_proj_, adapters_.at(kImgProj), H);
  const MatrixXd T = text_matrix(class_prompts);
  const MatrixXd V = adapted_forward(w_txt_proj_, adapters_.at(kTxtProj), T);
  const VectorXd nu = column_norms(U), nv = column_norms(V);
  const MatrixXd Uh = U * nu.cwiseInverse().asDiagonal();
  const MatrixXd Vh = V * nv.cwiseInverse().asDiagonal();
  const double s = shape_.logit_scale;
  const MatrixXd Z = s * Uh.transpose() * Vh;  // n x C

  double loss = 0;
  MatrixXd dZ(n, C);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = Z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (Z.row(i).array() - m).exp().matrix();
    const double sum = e.sum();
    loss += -(Z(i, labels[i]) - m - std::log(sum));
    dZ.row(i) = e / sum;
    dZ(i, labels[i]) -= 1.0;
  }
  loss /= static_cast<double>(n);
  dZ *= weight / static_cast<double>(n);

  // Backward through cosine similarity.
  const MatrixXd dUh = s * Vh * dZ.transpose();  // D x n
  const MatrixXd dVh = s * Uh * dZ;              // D x C
  auto through_norm = [](const MatrixXd& hat, const MatrixXd& dhat, const VectorXd& norms) {
    MatrixXd d(hat.rows(), hat.cols());
    for (Eigen::Index j = 0; j < hat.cols(); ++j)
      d.col(j) = (dhat.col(j) - hat.col(j) * hat.col(j).dot(dhat.col(j))) / norms(j);
    return d;
  };
  const MatrixXd dU = through_norm(Uh, dUh, nu);
  const MatrixXd dV = through_norm(Vh, dVh, nv);

  const MatrixXd dH = adapted_backward(w_img_proj_, adapters_.at(kImgProj), H, dU, grads.at(kImgProj));
  const MatrixXd dHpre = (dH.array() * (1.0 - H.array().square())).matrix();
  adapted_backward(w_fc1_, adapters_.at(kFc1), X, dHpre, grads.at(kFc1));
  adapted_backward(w_txt_proj_, adapters_.at(kTxtProj), T, dV, grads.at(kTxtProj));
  return loss;
}

}  // namespace varireal
