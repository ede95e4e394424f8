#pragma once

#include "varireal/lora.hpp"

#include <string>

namespace varireal {

struct FeatureCloud {
  MatrixXd samples;  // n x d, one row per image
  std::string extractor;
};

struct GaussianStats {
  VectorXd mean;
  MatrixXd cov;
};

// Sample mean and unbiased covariance. Needs n >= 2 finite rows.
GaussianStats gaussian_stats(const FeatureCloud& cloud);

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The square-root trace
// is taken on the symmetric product sqrt(S_a) S_b sqrt(S_a) with eigenvalues
// clipped at 0; covariances whose spectrum is significantly negative get one
// retry with 1e-6 added to the diagonal before non_psd is raised.
double fid_from_stats(const GaussianStats& a, const GaussianStats& b);
double fid(const FeatureCloud& a, const FeatureCloud& b);

}  // namespace varireal
