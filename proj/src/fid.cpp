#include "varireal/fid.hpp"

#include "varireal/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>

namespace varireal {

GaussianStats gaussian_stats(const FeatureCloud& cloud) {
  const MatrixXd& x = cloud.samples;
  if (x.rows() < 2) throw Error(Errc::empty_input, "feature cloud needs at least 2 samples");
  if (!x.allFinite()) throw Error(Errc::invalid_argument, "feature cloud has non-finite entries");
  GaussianStats s;
  s.mean = x.colwise().mean().transpose();
  const MatrixXd centred = x.rowwise() - s.mean.transpose();
  s.cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
  return s;
}

namespace {

double spectrum_tolerance(const VectorXd& eig) {
  return 1e-9 * std::max(1.0, eig.cwiseAbs().maxCoeff());
}

// Symmetric square root, or nullopt when the spectrum is significantly negative.
std::optional<MatrixXd> psd_sqrt(const MatrixXd& m) {
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) return std::nullopt;
  const VectorXd& eig = es.eigenvalues();
  if (eig.minCoeff() < -spectrum_tolerance(eig)) return std::nullopt;
  const VectorXd root = eig.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

std::optional<double> sqrt_product_trace(const MatrixXd& ca, const MatrixXd& cb) {
  const auto ra = psd_sqrt(ca);
  if (!ra) return std::nullopt;
  MatrixXd m = *ra * cb * *ra;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::nullopt;
  const VectorXd& eig = es.eigenvalues();
  if (eig.minCoeff() < -spectrum_tolerance(eig)) return std::nullopt;
  return eig.cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double fid_from_stats(const GaussianStats& a, const GaussianStats& b) {
  const auto d = a.mean.size();
  if (b.mean.size() != d || a.cov.rows() != d || a.cov.cols() != d || b.cov.rows() != d || b.cov.cols() != d)
    throw Error(Errc::dimension_mismatch, "feature dimensions differ");
  if (!a.cov.allFinite() || !b.cov.allFinite() || !a.mean.allFinite() || !b.mean.allFinite())
    throw Error(Errc::invalid_argument, "non-finite statistics");
  MatrixXd ca = a.cov;
  MatrixXd cb = b.cov;
  auto tr = sqrt_product_trace(ca, cb);
  if (!tr) {
    ca.diagonal().array() += 1e-6;
    cb.diagonal().array() += 1e-6;
    tr = sqrt_product_trace(ca, cb);
    if (!tr) throw Error(Errc::non_psd, "covariance square root failed after regularization");
  }
  const double value = (a.mean - b.mean).squaredNorm() + ca.trace() + cb.trace() - 2.0 * *tr;
  return std::max(0.0, value);
}

double fid(const FeatureCloud& a, const FeatureCloud& b) {
  if (a.samples.cols() != b.samples.cols()) throw Error(Errc::dimension_mismatch, "feature dimensions differ");
  return fid_from_stats(gaussian_stats(a), gaussian_stats(b));
}

}  // namespace varireal
