#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlrm/grid.hpp"
#include "dlrm/thermal.hpp"

namespace dlrm::uncert {

inline constexpr int kVarsPerSite = 3;  // wind speed, wind direction, ambient temperature

/// Covariance of all ambient forecast-error variables plus the site layout.
struct AmbientErrorModel {
  Eigen::MatrixXd sigma_varsigma;     // (kVarsPerSite * n_sites)^2, PSD
  std::map<std::string, int> site_index;  // site id -> block offset

  int dim() const { return int(sigma_varsigma.rows()); }
  int block(const std::string& site) const;  // IndexMismatch when unknown
};

AmbientErrorModel build_ambient_model(const grid::UncertaintySpec& spec);

/// Gradients of wind power, steady rating and evolution coefficients with
/// respect to the stacked ambient error vector. Computed by central finite
/// differences; columns for sites a quantity does not live on are zero.
struct SensitivitySet {
  Eigen::MatrixXd gamma_w;                // dim x n_farms (MW per ambient unit)
  Eigen::MatrixXd gamma_f;                // dim x n_edges
  std::vector<Eigen::MatrixXd> gamma_mu;  // n_edges entries: dim x 4 (mu_a..mu_d)
  std::vector<bool> edge_has_dlr;
};

/// Per-edge thermal environment for one period.
struct LineEnv {
  thermal::ConductorSpec spec;
  thermal::WeatherSample weather;
};

double wind_power_mw(double rho_kg_m3, double area_m2, double v_m_s,
                     double capacity_mw = std::numeric_limits<double>::infinity());

/// Wind speed implied by a forecast on the cubic law (inverse of wind_power_mw
/// below the capacity clip).
double wind_speed_from_power(double rho_kg_m3, double area_m2, double power_mw);

SensitivitySet sensitivities(const grid::SystemCase& cs, const AmbientErrorModel& model,
                             const std::vector<std::optional<LineEnv>>& lines,
                             const std::vector<double>& farm_wind_speed, double dt_s);

/// Assembled joint second moments for one period.
struct JointCovariance {
  Eigen::MatrixXd sigma_omega;  // n_farms^2, wind power error covariance (MW^2)
  double sigma_Omega = 0.0;     // total system imbalance variance
  std::vector<Eigen::VectorXd> b_omega_xi;     // per edge: Cov(omega, xi_e), n_farms
  std::vector<double> sigma_le;                // per edge: rating error std (MW)
  std::vector<Eigen::MatrixXd> b_omega_site;   // per edge: Cov(omega, varsigma_site(e))
  std::vector<Eigen::MatrixXd> sigma_site;     // per edge: site block of sigma_varsigma
  Eigen::MatrixXd sigma_omega_xi;              // joint over (omega_1..n, xi_1..m)
  Eigen::MatrixXd sigma_omega_varsigma;        // Cov(omega, all line-site variables)
  std::vector<bool> edge_has_dlr;

  int n_farms() const { return int(sigma_omega.rows()); }
};

JointCovariance assemble_covariance(const AmbientErrorModel& model, const SensitivitySet& sens,
                                    const grid::SystemCase& cs);

/// Dominance of the intrinsic rating variance over the wind-induced part.
struct DominanceLine {
  std::string edge_id;
  bool applicable = false;
  bool ok = true;
  double induced = 0.0;    // b' Sigma_omega^{-1} b
  double intrinsic = 0.0;  // sigma_le^2
};

struct DominanceReport {
  std::vector<DominanceLine> lines;
  bool all_ok = true;
  bool ridge_applied = false;
};

/// Single-period check b' Sigma_w^{-1} b <= sigma_le^2 per line. A 1e-10 ridge
/// is added when Sigma_omega is singular.
DominanceReport validate_dominance(const JointCovariance& jc);

/// Multi-period check for one edge given the mapped parameter-error direction
/// g (site variables -> temperature deviation): (B g)' Sigma_w^{-1} (B g) <=
/// g' Sigma_site g.
bool dominance_multi_ok(const JointCovariance& jc, int edge, const Eigen::VectorXd& g,
                        double* induced = nullptr, double* intrinsic = nullptr);

/// Inverse of sigma_omega with the same ridge policy as validate_dominance.
Eigen::MatrixXd sigma_omega_inverse(const JointCovariance& jc, bool* ridged = nullptr);

}  // namespace dlrm::uncert
