#pragma once

#include <Eigen/Dense>

#include <random>

namespace varireal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Low-rank update W0 + s*B*A with A: r x k, B: d x r.
struct LowRankAdapter {
  MatrixXd A;
  MatrixXd B;
  double alpha = 1.0;
  bool scaled = true;  // s = alpha / r; false gives s = 1

  int rank() const { return static_cast<int>(A.rows()); }
  double scale() const { return scaled ? alpha / rank() : 1.0; }

  // A uniform in +-1/sqrt(k), B zero.
  static LowRankAdapter create(int d, int k, int r, double alpha, std::mt19937_64& rng);

  bool operator==(const LowRankAdapter& o) const {
    return A == o.A && B == o.B && alpha == o.alpha && scaled == o.scaled;
  }
};

struct AdapterGrad {
  MatrixXd dA;
  MatrixXd dB;

  static AdapterGrad zeros_like(const LowRankAdapter& a) {
    return {MatrixXd::Zero(a.A.rows(), a.A.cols()), MatrixXd::Zero(a.B.rows(), a.B.cols())};
  }
};

// h = W0 x + s B A x.
VectorXd adapted_forward(const MatrixXd& W0, const LowRankAdapter& adapter, const VectorXd& x);
// Column-batched: X is k x n.
MatrixXd adapted_forward(const MatrixXd& W0, const LowRankAdapter& adapter, const MatrixXd& X);

// Given dL/dH for H = adapted_forward(W0, adapter, X), accumulates the
// adapter gradients into grad and returns dL/dX.
MatrixXd adapted_backward(const MatrixXd& W0, const LowRankAdapter& adapter, const MatrixXd& X, const MatrixXd& dH,
                          AdapterGrad& grad);

}  // namespace varireal
