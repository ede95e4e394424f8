#include "varireal/lora.hpp"

#include "varireal/error.hpp"

#include <cmath>
#include <string>

namespace varireal {

namespace {

void check_shapes(const MatrixXd& W0, const LowRankAdapter& a, Eigen::Index x_rows) {
  auto dims = [](const MatrixXd& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); };
  if (a.A.cols() != W0.cols() || a.B.rows() != W0.rows() || a.B.cols() != a.A.rows() || x_rows != W0.cols())
    throw Error(Errc::shape_mismatch, "adapter shapes A " + dims(a.A) + ", B " + dims(a.B) + " do not fit W0 " +
                                          dims(W0) + " with input rows " + std::to_string(x_rows));
  if (a.A.rows() == 0) throw Error(Errc::shape_mismatch, "adapter rank is zero");
}

}  // namespace

LowRankAdapter LowRankAdapter::create(int d, int k, int r, double alpha, std::mt19937_64& rng) {
  if (d <= 0 || k <= 0 || r <= 0) throw Error(Errc::invalid_argument, "adapter dimensions must be positive");
  LowRankAdapter a;
  a.alpha = alpha;
  a.A.resize(r, k);
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < a.A.size(); ++i) a.A.data()[i] = u(rng);
  a.B = MatrixXd::Zero(d, r);
  return a;
}

VectorXd adapted_forward(const MatrixXd& W0, const LowRankAdapter& adapter, const VectorXd& x) {
  check_shapes(W0, adapter, x.rows());
  return W0 * x + adapter.scale() * (adapter.B * (adapter.A * x));
}

MatrixXd adapted_forward(const MatrixXd& W0, const LowRankAdapter& adapter, const MatrixXd& X) {
  check_shapes(W0, adapter, X.rows());
  return W0 * X + adapter.scale() * (adapter.B * (adapter.A * X));
}

MatrixXd adapted_backward(const MatrixXd& W0, const LowRankAdapter& adapter, const MatrixXd& X, const MatrixXd& dH,
                          AdapterGrad& grad) {
  check_shapes(W0, adapter, X.rows());
  if (dH.rows() != W0.rows() || dH.cols() != X.cols()) throw Error(Errc::shape_mismatch, "dH shape mismatch");
  const double s = adapter.scale();
  const MatrixXd AX = adapter.A * X;            // r x n
  const MatrixXd BtdH = adapter.B.transpose() * dH;  // r x n
  grad.dB.noalias() += s * dH * AX.transpose();
  grad.dA.noalias() += s * BtdH * X.transpose();
  return W0.transpose() * dH + s * adapter.A.transpose() * BtdH;
}

}  // namespace varireal
