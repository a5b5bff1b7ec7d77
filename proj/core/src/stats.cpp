#include "dlrm/stats.hpp"

#include <cmath>

#include "dlrm/errors.hpp"

namespace dlrm::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Acklam's rational approximation, then two Newton polish steps on the CDF.
double quantile_seed(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) {
    double q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(errc::non_physical_input, "normal_quantile: p outside (0,1)");
  double x = quantile_seed(p);
  for (int i = 0; i < 2; ++i) {
    double e = normal_cdf(x) - p;
    double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf <= 0) break;
    x -= e / pdf;
  }
  return x;
}

std::pair<double, double> wilson_interval(std::int64_t k, std::int64_t n) {
  if (n <= 0) return {0.0, 1.0};
  const double z = 1.959963984540054;  // 97.5% normal quantile
  double phat = double(k) / double(n);
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double centre = phat + z2 / (2.0 * n);
  double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  return {(centre - half) / denom, (centre + half) / denom};
}

double GaussianSource::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on uniform doubles drawn from fixed 53-bit conversion.
  double u1 = 0.0;
  do {
    u1 = double(rng_() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  double u2 = double(rng_() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double th = 2.0 * M_PI * u2;
  spare_ = r * std::sin(th);
  have_spare_ = true;
  return r * std::cos(th);
}

Eigen::VectorXd GaussianSource::vector(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = next();
  return v;
}

MvnSampler::MvnSampler(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols())
    fail(errc::index_mismatch, "MvnSampler: covariance not square");
  Eigen::MatrixXd s = 0.5 * (sigma + sigma.transpose());
  if (s.size() == 0 || s.cwiseAbs().maxCoeff() == 0.0) {
    chol_ = Eigen::MatrixXd::Zero(s.rows(), s.cols());
    return;
  }
  double scale = std::max(1.0, s.diagonal().maxCoeff());
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    s.diagonal().array() += 1e-12 * scale;
    llt.compute(s);
    if (llt.info() != Eigen::Success)
      fail(errc::validation_error, "MvnSampler: covariance not positive semidefinite");
  }
  chol_ = llt.matrixL();
}

Eigen::VectorXd MvnSampler::draw(GaussianSource& src) const {
  return chol_ * src.vector(int(chol_.rows()));
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tol * scale)
      fail(errc::validation_error, "psd_sqrt: matrix has negative eigenvalue");
    ev[i] = std::sqrt(std::max(0.0, ev[i]));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool is_psd(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

}  // namespace dlrm::stats
