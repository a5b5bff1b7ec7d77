#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <utility>

namespace dlrm::stats {

/// Inverse standard normal CDF. Accurate to ~1e-14 over (1e-300, 1-1e-16).
double normal_quantile(double p);

/// Standard normal CDF.
double normal_cdf(double x);

/// Wilson 95% score interval for k successes out of n trials.
std::pair<double, double> wilson_interval(std::int64_t k, std::int64_t n);

/// Deterministic Gaussian source: mt19937_64 + Box-Muller, pinned so that
/// identical seeds give identical streams on any platform.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}
  double next();
  Eigen::VectorXd vector(int n);

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Samples x ~ N(0, Sigma) via a Cholesky-type factor. Semidefinite matrices
/// are handled with a small diagonal ridge.
class MvnSampler {
 public:
  explicit MvnSampler(const Eigen::MatrixXd& sigma);
  Eigen::VectorXd draw(GaussianSource& src) const;
  const Eigen::MatrixXd& factor() const { return chol_; }

 private:
  Eigen::MatrixXd chol_;  // lower triangular
};

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// below -tol raise, tiny ones are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double tol = 1e-10);

bool is_psd(const Eigen::MatrixXd& m, double tol = 1e-10);

}  // namespace dlrm::stats
