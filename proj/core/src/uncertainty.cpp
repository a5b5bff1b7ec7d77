#include "dlrm/uncertainty.hpp"

#include <cmath>

#include "dlrm/errors.hpp"
#include "dlrm/stats.hpp"

namespace dlrm::uncert {

int AmbientErrorModel::block(const std::string& site) const {
  auto it = site_index.find(site);
  if (it == site_index.end()) fail(errc::index_mismatch, "unknown ambient site " + site);
  return it->second;
}

AmbientErrorModel build_ambient_model(const grid::UncertaintySpec& spec) {
  AmbientErrorModel model;
  const int n = int(spec.sites.size());
  for (int i = 0; i < n; ++i) {
    const auto& s = spec.sites[size_t(i)];
    if (model.site_index.count(s.id)) fail(errc::validation_error, "duplicate site id " + s.id);
    if (s.sigma_wind < 0 || s.sigma_dir < 0 || s.sigma_temp < 0)
      fail(errc::validation_error, "site " + s.id + ": negative sigma");
    model.site_index[s.id] = kVarsPerSite * i;
  }

  const int dim = kVarsPerSite * n;
  if (spec.dense.size() > 0) {
    if (spec.dense.rows() != dim || spec.dense.cols() != dim)
      fail(errc::validation_error, "uncertainty: dense covariance size mismatch");
    model.sigma_varsigma = 0.5 * (spec.dense + spec.dense.transpose());
  } else {
    model.sigma_varsigma = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
      const auto& s = spec.sites[size_t(i)];
      int o = kVarsPerSite * i;
      model.sigma_varsigma(o, o) = s.sigma_wind * s.sigma_wind;
      model.sigma_varsigma(o + 1, o + 1) = s.sigma_dir * s.sigma_dir;
      model.sigma_varsigma(o + 2, o + 2) = s.sigma_temp * s.sigma_temp;
    }
    for (const auto& c : spec.correlations) {
      int oa = model.block(c.a), ob = model.block(c.b);
      if (std::abs(c.rho) > 1.0)
        fail(errc::validation_error, "correlation " + c.a + "/" + c.b + " outside [-1,1]");
      for (int k = 0; k < kVarsPerSite; ++k) {
        double cov = c.rho * std::sqrt(model.sigma_varsigma(oa + k, oa + k) *
                                       model.sigma_varsigma(ob + k, ob + k));
        model.sigma_varsigma(oa + k, ob + k) = cov;
        model.sigma_varsigma(ob + k, oa + k) = cov;
      }
    }
  }
  if (dim > 0 && !stats::is_psd(model.sigma_varsigma, 1e-10))
    fail(errc::validation_error, "uncertainty: covariance is not positive semidefinite");
  return model;
}

double wind_power_mw(double rho_kg_m3, double area_m2, double v_m_s, double capacity_mw) {
  if (rho_kg_m3 <= 0 || area_m2 <= 0)
    fail(errc::non_physical_input, "wind_power: nonpositive density or area");
  double v = std::max(v_m_s, 0.0);
  double p = 0.5 * rho_kg_m3 * area_m2 * v * v * v * 1e-6;
  return std::min(p, capacity_mw);
}

double wind_speed_from_power(double rho_kg_m3, double area_m2, double power_mw) {
  if (rho_kg_m3 <= 0 || area_m2 <= 0)
    fail(errc::non_physical_input, "wind_speed_from_power: nonpositive density or area");
  return std::cbrt(2.0 * std::max(power_mw, 0.0) * 1e6 / (rho_kg_m3 * area_m2));
}

namespace {

double fd_step(double x) { return std::max(1e-4, 1e-4 * std::abs(x)); }

thermal::WeatherSample perturbed(const thermal::WeatherSample& w, int var, double delta) {
  thermal::WeatherSample p = w;
  switch (var) {
    case 0: p.wind_speed_m_s = std::max(0.0, p.wind_speed_m_s + delta); break;
    case 1: p.wind_dir_deg += delta; break;
    case 2: p.ambient_temp_C += delta; break;
  }
  return p;
}

}  // namespace

SensitivitySet sensitivities(const grid::SystemCase& cs, const AmbientErrorModel& model,
                             const std::vector<std::optional<LineEnv>>& lines,
                             const std::vector<double>& farm_wind_speed, double dt_s) {
  const int dim = model.dim();
  const int n_farms = int(cs.wind_farms.size());
  const int n_edges = int(cs.edges.size());
  if (int(lines.size()) != n_edges)
    fail(errc::index_mismatch, "sensitivities: line environment count mismatch");
  if (int(farm_wind_speed.size()) != n_farms)
    fail(errc::index_mismatch, "sensitivities: farm wind speed count mismatch");

  SensitivitySet out;
  out.gamma_w = Eigen::MatrixXd::Zero(dim, n_farms);
  out.gamma_f = Eigen::MatrixXd::Zero(dim, n_edges);
  out.gamma_mu.assign(size_t(n_edges), Eigen::MatrixXd::Zero(dim, 4));
  out.edge_has_dlr.assign(size_t(n_edges), false);

  // Wind farms: the cubic law depends on wind speed only; gradients are taken
  // on the unclipped curve.
  for (int k = 0; k < n_farms; ++k) {
    const auto& farm = cs.wind_farms[size_t(k)];
    if (farm.site.empty()) continue;
    int o = model.block(farm.site);
    double v = farm_wind_speed[size_t(k)];
    double h = fd_step(v);
    double lo = std::max(v - h, 0.0);
    double up = v + h;
    double d = (wind_power_mw(farm.air_density, farm.rotor_area_m2, up) -
                wind_power_mw(farm.air_density, farm.rotor_area_m2, lo)) /
               (up - lo);
    out.gamma_w(o, k) = d;
  }

  // Lines with a thermal model: steady rating and evolution-coefficient
  // gradients over (wind speed, direction, ambient temperature).
  for (int e = 0; e < n_edges; ++e) {
    if (!lines[size_t(e)].has_value()) continue;
    const auto& env = *lines[size_t(e)];
    const auto& edge = cs.edges[size_t(e)];
    if (edge.site.empty()) continue;
    out.edge_has_dlr[size_t(e)] = true;
    int o = model.block(edge.site);

    for (int var = 0; var < kVarsPerSite; ++var) {
      double base = var == 0   ? env.weather.wind_speed_m_s
                    : var == 1 ? env.weather.wind_dir_deg
                               : env.weather.ambient_temp_C;
      double h = fd_step(base);
      thermal::WeatherSample wlo = perturbed(env.weather, var, -h);
      thermal::WeatherSample whi = perturbed(env.weather, var, +h);
      double span = (var == 0) ? (whi.wind_speed_m_s - wlo.wind_speed_m_s) : 2 * h;
      if (span <= 0) continue;

      double r_lo = thermal::steady_state_rating(env.spec, wlo, env.spec.max_temp_C);
      double r_hi = thermal::steady_state_rating(env.spec, whi, env.spec.max_temp_C);
      out.gamma_f(o + var, e) = (r_hi - r_lo) / span;

      auto mu_lo = thermal::evolution_coefficients(env.spec, wlo, dt_s);
      auto mu_hi = thermal::evolution_coefficients(env.spec, whi, dt_s);
      out.gamma_mu[size_t(e)](o + var, 0) = (mu_hi.mu_a - mu_lo.mu_a) / span;
      out.gamma_mu[size_t(e)](o + var, 1) = (mu_hi.mu_b - mu_lo.mu_b) / span;
      out.gamma_mu[size_t(e)](o + var, 2) = (mu_hi.mu_c - mu_lo.mu_c) / span;
      out.gamma_mu[size_t(e)](o + var, 3) = (mu_hi.mu_d - mu_lo.mu_d) / span;
    }
  }
  return out;
}

JointCovariance assemble_covariance(const AmbientErrorModel& model, const SensitivitySet& sens,
                                    const grid::SystemCase& cs) {
  const int dim = model.dim();
  const int n_farms = int(cs.wind_farms.size());
  const int n_edges = int(cs.edges.size());
  if (sens.gamma_w.rows() != dim || sens.gamma_w.cols() != n_farms)
    fail(errc::index_mismatch, "assemble_covariance: gamma_w shape mismatch");
  if (sens.gamma_f.rows() != dim || sens.gamma_f.cols() != n_edges)
    fail(errc::index_mismatch, "assemble_covariance: gamma_f shape mismatch");

  const Eigen::MatrixXd& Sv = model.sigma_varsigma;

  JointCovariance jc;
  jc.edge_has_dlr = sens.edge_has_dlr;
  jc.sigma_omega = sens.gamma_w.transpose() * Sv * sens.gamma_w;
  jc.sigma_omega = 0.5 * (jc.sigma_omega + jc.sigma_omega.transpose());
  jc.sigma_Omega = jc.sigma_omega.sum();

  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(dim, n_farms + n_edges);
  if (n_farms > 0) joint.leftCols(n_farms) = sens.gamma_w;
  if (n_edges > 0) joint.rightCols(n_edges) = sens.gamma_f;
  jc.sigma_omega_xi = joint.transpose() * Sv * joint;
  jc.sigma_omega_xi = 0.5 * (jc.sigma_omega_xi + jc.sigma_omega_xi.transpose());

  jc.sigma_omega_varsigma = sens.gamma_w.transpose() * Sv;

  jc.b_omega_xi.assign(size_t(n_edges), Eigen::VectorXd::Zero(n_farms));
  jc.sigma_le.assign(size_t(n_edges), 0.0);
  jc.b_omega_site.assign(size_t(n_edges), Eigen::MatrixXd::Zero(n_farms, kVarsPerSite));
  jc.sigma_site.assign(size_t(n_edges), Eigen::MatrixXd::Zero(kVarsPerSite, kVarsPerSite));

  for (int e = 0; e < n_edges; ++e) {
    if (!sens.edge_has_dlr[size_t(e)]) continue;
    const auto& edge = cs.edges[size_t(e)];
    jc.b_omega_xi[size_t(e)] = sens.gamma_w.transpose() * Sv * sens.gamma_f.col(e);
    double var_le = sens.gamma_f.col(e).dot(Sv * sens.gamma_f.col(e));
    auto ov = cs.uncertainty.sigma_le_override.find(edge.id);
    jc.sigma_le[size_t(e)] =
        ov != cs.uncertainty.sigma_le_override.end() ? ov->second : std::sqrt(std::max(0.0, var_le));
    int o = model.block(edge.site);
    jc.b_omega_site[size_t(e)] = sens.gamma_w.transpose() * Sv.middleCols(o, kVarsPerSite);
    jc.sigma_site[size_t(e)] = Sv.block(o, o, kVarsPerSite, kVarsPerSite);
  }

  if (n_farms > 0 && !stats::is_psd(jc.sigma_omega, 1e-10))
    fail(errc::validation_error, "assemble_covariance: sigma_omega not PSD");
  if (!stats::is_psd(jc.sigma_omega_xi, 1e-10))
    fail(errc::validation_error, "assemble_covariance: joint covariance not PSD");
  return jc;
}

Eigen::MatrixXd sigma_omega_inverse(const JointCovariance& jc, bool* ridged) {
  Eigen::MatrixXd s = jc.sigma_omega;
  if (ridged) *ridged = false;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
            ldlt.vectorD().minCoeff() > 1e-12 * std::max(1.0, s.diagonal().maxCoeff());
  if (!ok) {
    s.diagonal().array() += 1e-10;
    ldlt.compute(s);
    if (ridged) *ridged = true;
    if (ldlt.info() != Eigen::Success)
      fail(errc::numerical_failure, "sigma_omega inversion failed");
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
}

DominanceReport validate_dominance(const JointCovariance& jc) {
  DominanceReport rep;
  bool ridged = false;
  Eigen::MatrixXd inv;
  if (jc.n_farms() > 0) inv = sigma_omega_inverse(jc, &ridged);
  rep.ridge_applied = ridged;
  for (size_t e = 0; e < jc.edge_has_dlr.size(); ++e) {
    DominanceLine line;
    line.edge_id = "edge[" + std::to_string(e) + "]";
    line.applicable = jc.edge_has_dlr[e];
    if (line.applicable && jc.n_farms() > 0) {
      line.induced = jc.b_omega_xi[e].dot(inv * jc.b_omega_xi[e]);
      line.intrinsic = jc.sigma_le[e] * jc.sigma_le[e];
      line.ok = line.induced <= line.intrinsic + 1e-12 * std::max(1.0, line.intrinsic);
    }
    rep.all_ok = rep.all_ok && line.ok;
    rep.lines.push_back(std::move(line));
  }
  return rep;
}

bool dominance_multi_ok(const JointCovariance& jc, int edge, const Eigen::VectorXd& g,
                        double* induced, double* intrinsic) {
  if (edge < 0 || edge >= int(jc.edge_has_dlr.size()))
    fail(errc::index_mismatch, "dominance_multi_ok: edge out of range");
  if (!jc.edge_has_dlr[size_t(edge)]) return true;
  Eigen::VectorXd btilde = jc.b_omega_site[size_t(edge)] * g;
  double lhs = 0.0;
  if (jc.n_farms() > 0) {
    Eigen::MatrixXd inv = sigma_omega_inverse(jc);
    lhs = btilde.dot(inv * btilde);
  }
  double rhs = g.dot(jc.sigma_site[size_t(edge)] * g);
  if (induced) *induced = lhs;
  if (intrinsic) *intrinsic = rhs;
  return lhs <= rhs + 1e-12 * std::max(1.0, rhs);
}

}  // namespace dlrm::uncert
