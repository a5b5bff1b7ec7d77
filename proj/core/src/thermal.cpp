#include "dlrm/thermal.hpp"

#include <algorithm>
#include <cmath>

#include "dlrm/errors.hpp"

namespace dlrm::thermal {

namespace {

// IEEE-style air film properties at film temperature (C).
double air_viscosity(double t_film) {
  return 1.458e-6 * std::pow(t_film + 273.0, 1.5) / (t_film + 383.4);
}

double air_conductivity(double t_film) {
  return 2.424e-2 + 7.477e-5 * t_film - 4.407e-9 * t_film * t_film;
}

// Wind attack-angle factor, folded to [0, 90] degrees.
double angle_factor(double dir_deg) {
  double a = std::fmod(std::abs(dir_deg), 180.0);
  if (a > 90.0) a = 180.0 - a;
  double phi = a * M_PI / 180.0;
  return 1.194 - std::cos(phi) + 0.194 * std::cos(2 * phi) + 0.368 * std::sin(2 * phi);
}

}  // namespace

void ConductorSpec::validate(const std::string& id) const {
  auto need = [&](bool ok, const char* what) {
    if (!ok) fail(errc::validation_error, id + ": " + what);
  };
  need(diameter_m > 0, "diameter_m must be positive");
  need(solar_absorptivity > 0 && solar_absorptivity <= 1, "solar_absorptivity must be in (0,1]");
  need(emissivity > 0 && emissivity <= 1, "emissivity must be in (0,1]");
  need(resistance_ref_ohm_per_m > 0, "resistance_ref_ohm_per_m must be positive");
  need(resistance_ambient_ohm_per_m > 0, "resistance_ambient_ohm_per_m must be positive");
  need(temp_coeff_resistance_per_C > 0, "temp_coeff_resistance_per_C must be positive");
  need(heat_capacity_J_per_m_C > 0, "heat_capacity_J_per_m_C must be positive");
  need(max_temp_C > kResistanceAnchorC, "max_temp_C implausibly low");
  need(voltage_kV > 0, "voltage_kV must be positive");
}

void WeatherSample::validate() const {
  if (wind_speed_m_s < 0) fail(errc::non_physical_input, "weather: wind_speed < 0");
  if (solar_W_m2 < 0) fail(errc::non_physical_input, "weather: solar_W_m2 < 0");
  if (air_density_kg_m3 <= 0) fail(errc::non_physical_input, "weather: air_density <= 0");
}

double convective_coefficient(const ConductorSpec& spec, const WeatherSample& w) {
  w.validate();
  double ta = w.ambient_temp_C;
  double tx_design = std::max(spec.max_temp_C - ta, 1.0);
  double t_film = 0.5 * (spec.max_temp_C + ta);
  double mu = air_viscosity(t_film);
  double kf = air_conductivity(t_film);
  double re = spec.diameter_m * w.air_density_kg_m3 * w.wind_speed_m_s / mu;
  double ka = angle_factor(w.wind_dir_deg);
  double qc_low = ka * (1.01 + 1.35 * std::pow(re, 0.52)) * kf * tx_design;
  double qc_high = ka * 0.754 * std::pow(re, 0.6) * kf * tx_design;
  double qc_nat = 3.645 * std::sqrt(w.air_density_kg_m3) * std::pow(spec.diameter_m, 0.75) *
                  std::pow(tx_design, 1.25);
  double qc = std::max({qc_low, qc_high, qc_nat});
  return qc / (M_PI * spec.diameter_m * tx_design);
}

HeatTerms heat_terms(const ConductorSpec& spec, const WeatherSample& w, double conductor_temp_C,
                     double current_A) {
  w.validate();
  if (current_A < 0) fail(errc::non_physical_input, "heat_terms: current < 0");
  if (conductor_temp_C < w.ambient_temp_C - 50.0)
    fail(errc::non_physical_input, "heat_terms: conductor temperature far below ambient");

  const double d = spec.diameter_m;
  const double tx = conductor_temp_C - w.ambient_temp_C;
  const double t_abs = w.ambient_temp_C + kKelvinOffset;

  HeatTerms out;
  out.q_s = spec.solar_absorptivity * w.solar_W_m2 * d;

  double r_amb = spec.resistance_at(w.ambient_temp_C);
  out.q_J = r_amb * current_A * current_A +
            spec.temp_coeff_resistance_per_C * spec.resistance_ref_ohm_per_m * tx * current_A *
                current_A;

  double h_r = spec.emissivity * kStefanBoltzmann *
               (4 * t_abs * t_abs * t_abs + 6 * tx * t_abs * t_abs + 4 * tx * tx * t_abs +
                tx * tx * tx);
  out.q_r = M_PI * d * h_r * tx;

  out.h_c = convective_coefficient(spec, w);
  out.q_c = M_PI * d * out.h_c * tx;

  out.h_r0 = 4 * kStefanBoltzmann * spec.emissivity * t_abs * t_abs * t_abs;
  out.k1 = 6 * kStefanBoltzmann * spec.emissivity * t_abs * t_abs;
  return out;
}

double steady_state_current_A(const ConductorSpec& spec, const WeatherSample& w,
                              double max_temp_C) {
  HeatTerms ht = heat_terms(spec, w, max_temp_C, 0.0);
  double tx = max_temp_C - w.ambient_temp_C;
  double num = ht.q_c + ht.q_r - ht.q_s;
  double den = spec.resistance_at(w.ambient_temp_C) +
               spec.temp_coeff_resistance_per_C * spec.resistance_ref_ohm_per_m * tx;
  if (num <= 0)
    fail(errc::infeasible_rating, "steady_state_rating: solar gain exceeds cooling at the limit");
  if (den <= 0) fail(errc::infeasible_rating, "steady_state_rating: nonpositive resistance");
  return std::sqrt(num / den);
}

double steady_state_rating(const ConductorSpec& spec, const WeatherSample& w, double max_temp_C) {
  return spec.flow_MW(steady_state_current_A(spec, w, max_temp_C));
}

namespace detail {

double f1_weighted_sum(const ConditionInputs& in, double delta_r, double delta_s, double* df1_dr,
                       double* df1_ds, double* f1_value) {
  double md = in.m_cr + delta_r;
  double x = (in.r_max + delta_s) / md;
  double f1 = in.b1_tilde * x - in.b2_tilde * x * x - in.tx * delta_r;
  double d_dr = -in.b1_tilde * x / md + 2 * in.b2_tilde * x * x / md - in.tx;
  double d_ds = in.b1_tilde / md - 2 * in.b2_tilde * x / md;
  if (df1_dr) *df1_dr = d_dr;
  if (df1_ds) *df1_ds = d_ds;
  if (f1_value) *f1_value = f1;
  return delta_r * d_dr + delta_s * d_ds;
}

double f2_weighted_sum(const ConditionInputs& in, double delta_T, double delta_I, double* df2_dT,
                       double* df2_dI, double* f2_value) {
  double i_top = in.current_A + delta_I;
  double y = in.k2 * i_top * i_top - delta_T;
  double f2 = in.b1_hat * y - in.b2_hat * y * y;
  double d_dT = -in.b1_hat + 2 * in.b2_hat * y;
  double d_dI = 2 * in.k2 * i_top * (in.b1_hat - 2 * in.b2_hat * y);
  if (df2_dT) *df2_dT = d_dT;
  if (df2_dI) *df2_dI = d_dI;
  if (f2_value) *f2_value = f2;
  return delta_T * d_dT + delta_I * d_dI;
}

}  // namespace detail

ConditionReport check_conservativeness_conditions(const ConductorSpec& spec,
                                                  const WeatherSample& w, double conductor_temp_C,
                                                  double current_A) {
  HeatTerms ht = heat_terms(spec, w, conductor_temp_C, current_A);
  const double d = spec.diameter_m;
  const double tx = conductor_temp_C - w.ambient_temp_C;
  const double t_abs = w.ambient_temp_C + kKelvinOffset;
  const double tx_max = spec.max_temp_C - w.ambient_temp_C;

  ConditionReport rep;
  rep.m_cr = M_PI * d * (ht.h_c + ht.h_r0 + ht.k1 * tx_max);
  double r_max = spec.resistance_at(spec.max_temp_C);
  rep.k2 = r_max / rep.m_cr;
  rep.delta_r = M_PI * d * spec.emissivity * kStefanBoltzmann *
                (4 * tx * tx * t_abs + tx * tx * tx);
  rep.delta_T = spec.max_temp_C - conductor_temp_C;
  rep.delta_I = steady_state_current_A(spec, w, spec.max_temp_C) - current_A;
  rep.b1_tilde = spec.temp_coeff_resistance_per_C * spec.resistance_ref_ohm_per_m *
                 current_A * current_A * current_A * current_A;
  rep.b2_tilde = M_PI * d * ht.k1 * current_A * current_A * current_A * current_A;
  rep.b1_hat =
      spec.temp_coeff_resistance_per_C * spec.resistance_ref_ohm_per_m * current_A * current_A;
  rep.b2_hat = M_PI * d * ht.k1;

  if (current_A <= 0.0) {
    // delta_s undefined at zero current; the check is not applicable.
    rep.applicable = false;
    return rep;
  }
  rep.delta_s = ht.q_s / (current_A * current_A);

  detail::ConditionInputs in{tx,            r_max,        rep.m_cr,  rep.k2,   rep.b1_tilde,
                             rep.b2_tilde,  rep.b1_hat,   rep.b2_hat, current_A};
  rep.sum_static =
      detail::f1_weighted_sum(in, rep.delta_r, rep.delta_s, &rep.df1_dr, &rep.df1_ds, &rep.f1_value);
  rep.sum_transient = detail::f2_weighted_sum(in, rep.delta_T, rep.delta_I, &rep.df2_dT,
                                              &rep.df2_dI, &rep.f2_value);
  rep.condition_static_ok = rep.sum_static < 0.0;
  rep.condition_transient_ok = rep.sum_transient < 0.0;
  return rep;
}

EvolutionCoefficients evolution_coefficients(const ConductorSpec& spec, const WeatherSample& w,
                                             double dt_s) {
  if (dt_s <= 0) fail(errc::non_physical_input, "evolution_coefficients: dt_s <= 0");
  HeatTerms ht = heat_terms(spec, w, spec.max_temp_C, 0.0);
  const double d = spec.diameter_m;
  const double mc = spec.heat_capacity_J_per_m_C;

  double b_lin = M_PI * d * (ht.h_c + ht.h_r0);  // W/(m C)
  double tau = b_lin * dt_s / mc;
  if (1.0 - tau <= 0.0)
    fail(errc::unstable_step,
         "evolution_coefficients: step too large for constant-weather map (pi*D*(h_c+h_r0)*dt/mc >= 1)");

  double tx_max = spec.max_temp_C - w.ambient_temp_C;
  double m_cr = M_PI * d * (ht.h_c + ht.h_r0 + ht.k1 * tx_max);
  double k2 = spec.resistance_at(spec.max_temp_C) / m_cr;

  // Exact step of the bounding linear ODE mc*dT/dt = A + P(f) - b_lin*T:
  // conservative for every step length, first-order identical to the
  // explicit-Euler coefficients as dt -> 0.
  double decay = std::exp(-tau);
  double gain = (1.0 - decay) / b_lin;  // (1 - mu_b)/b_lin, units m C / W

  double heating_const = spec.solar_absorptivity * w.solar_W_m2 * d + b_lin * w.ambient_temp_C;
  double amps_per_mw = 1000.0 / spec.voltage_kV;
  double quartic_si = spec.temp_coeff_resistance_per_C * spec.resistance_ref_ohm_per_m * k2 -
                      M_PI * d * ht.k1 * k2 * k2;

  EvolutionCoefficients c;
  c.dt_s = dt_s;
  c.mu_b = decay;
  c.mu_a = gain * heating_const;
  c.mu_c = gain * spec.resistance_at(w.ambient_temp_C) * amps_per_mw * amps_per_mw;
  c.mu_d = gain * quartic_si * std::pow(amps_per_mw, 4);
  return c;
}

double step_temperature(const EvolutionCoefficients& c, double temp_C, double flow_MW) {
  double f2 = flow_MW * flow_MW;
  return c.mu_a + c.mu_b * temp_C + c.mu_c * f2 + c.mu_d * f2 * f2;
}

std::vector<double> integrate_transient(const ConductorSpec& spec,
                                        std::span<const WeatherSample> weather,
                                        std::span<const double> flows_MW, double initial_temp_C,
                                        double coarse_dt_s, double fine_dt_s) {
  if (weather.size() != flows_MW.size())
    fail(errc::index_mismatch, "integrate_transient: weather/flow length mismatch");
  if (fine_dt_s <= 0 || fine_dt_s > 60.0)
    fail(errc::non_physical_input, "integrate_transient: fine_dt_s must be in (0, 60]");
  if (coarse_dt_s < fine_dt_s)
    fail(errc::non_physical_input, "integrate_transient: coarse step below fine step");

  std::vector<double> temps;
  temps.reserve(flows_MW.size() + 1);
  temps.push_back(initial_temp_C);
  double t = initial_temp_C;
  const double mc = spec.heat_capacity_J_per_m_C;

  for (size_t k = 0; k < flows_MW.size(); ++k) {
    double i_amp = spec.current_A(std::abs(flows_MW[k]));
    double remaining = coarse_dt_s;
    while (remaining > 1e-9) {
      double h = std::min(fine_dt_s, remaining);
      HeatTerms ht = heat_terms(spec, weather[k], t, i_amp);
      double dT = (ht.q_s + ht.q_J - ht.q_c - ht.q_r) / mc * h;
      if (std::abs(dT) > 50.0)
        fail(errc::unstable_step, "integrate_transient: fine step moved temperature by > 50 C");
      t += dT;
      remaining -= h;
    }
    temps.push_back(t);
  }
  return temps;
}

double equilibrium_temperature(const ConductorSpec& spec, const WeatherSample& w,
                               double current_A) {
  // Net heating is strictly decreasing in temperature; bisection is safe.
  double lo = w.ambient_temp_C - 5.0;
  double hi = std::max(spec.max_temp_C, w.ambient_temp_C) + 400.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    HeatTerms ht = heat_terms(spec, w, mid, current_A);
    double net = ht.q_s + ht.q_J - ht.q_c - ht.q_r;
    (net > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace dlrm::thermal
