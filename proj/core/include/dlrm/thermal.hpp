#pragma once

#include <span>
#include <string>
#include <vector>

namespace dlrm::thermal {

inline constexpr double kStefanBoltzmann = 5.670374419e-8;  // W/(m^2 K^4)
inline constexpr double kKelvinOffset = 273.0;              // used by the radiation model
inline constexpr double kResistanceAnchorC = 25.0;          // ambient anchor for resistance_ambient

/// Physical conductor parameters feeding every heat-balance term.
/// Resistance is linear in temperature, anchored at 25 C:
///   R(T) = resistance_ambient + temp_coeff * resistance_ref * (T - 25).
struct ConductorSpec {
  double diameter_m = 0.0;
  double solar_absorptivity = 0.0;  // (0,1]
  double emissivity = 0.0;          // (0,1]
  double resistance_ref_ohm_per_m = 0.0;
  double temperature_ref_C = 0.0;
  double resistance_ambient_ohm_per_m = 0.0;  // at kResistanceAnchorC
  double temp_coeff_resistance_per_C = 0.0;
  double heat_capacity_J_per_m_C = 0.0;
  double max_temp_C = 0.0;
  double voltage_kV = 0.0;

  void validate(const std::string& id = "conductor") const;
  double resistance_at(double temp_C) const {
    return resistance_ambient_ohm_per_m +
           temp_coeff_resistance_per_C * resistance_ref_ohm_per_m * (temp_C - kResistanceAnchorC);
  }
  double current_A(double flow_MW) const { return 1000.0 * flow_MW / voltage_kV; }
  double flow_MW(double current_A) const { return voltage_kV * current_A / 1000.0; }
};

struct WeatherSample {
  double wind_speed_m_s = 0.0;
  double wind_dir_deg = 90.0;  // relative to the conductor axis
  double ambient_temp_C = 0.0;
  double solar_W_m2 = 0.0;
  double air_density_kg_m3 = 1.225;

  void validate() const;
};

/// The four heat-balance terms (W/m) plus the temperature-independent cooling
/// coefficients h_c, h_r0, k1 (W/(m^2 C^k)) used by the evolution model.
struct HeatTerms {
  double q_s = 0.0;
  double q_J = 0.0;
  double q_r = 0.0;
  double q_c = 0.0;
  double h_c = 0.0;
  double h_r0 = 0.0;
  double k1 = 0.0;
};

/// One-step conservative temperature map
///   T_next = mu_a + mu_b * T + mu_c * f^2 + mu_d * f^4  (f in MW).
struct EvolutionCoefficients {
  double mu_a = 0.0;  // C
  double mu_b = 1.0;  // in (0,1)
  double mu_c = 0.0;  // C/MW^2
  double mu_d = 0.0;  // C/MW^4
  double dt_s = 0.0;
  bool conditions_checked = false;  // caller ran the sufficient-condition check
};

/// Sufficient-condition report for the conservative evolution bound. The bound
/// drops four residual terms (delta_r, delta_s, delta_T, delta_I); each
/// condition holds iff the corresponding weighted derivative sum is strictly
/// negative.
struct ConditionReport {
  bool applicable = true;  // false when current is zero (delta_s undefined)
  double f1_value = 0.0;
  double f2_value = 0.0;
  double df1_dr = 0.0;
  double df1_ds = 0.0;
  double df2_dT = 0.0;
  double df2_dI = 0.0;
  double sum_static = 0.0;
  double sum_transient = 0.0;
  bool condition_static_ok = false;
  bool condition_transient_ok = false;
  // derivation internals
  double delta_r = 0.0;
  double delta_s = 0.0;
  double delta_T = 0.0;
  double delta_I = 0.0;
  double m_cr = 0.0;
  double k2 = 0.0;
  double b1_tilde = 0.0;
  double b2_tilde = 0.0;
  double b1_hat = 0.0;
  double b2_hat = 0.0;
};

/// Convective cooling coefficient h_c in W/(m^2 C). Max of the low/high
/// Reynolds forced-convection correlations (with wind attack-angle factor) and
/// the natural-convection floor; film properties are evaluated at the design
/// rise (max_temp - ambient) so h_c does not depend on conductor temperature.
double convective_coefficient(const ConductorSpec& spec, const WeatherSample& w);

HeatTerms heat_terms(const ConductorSpec& spec, const WeatherSample& w, double conductor_temp_C,
                     double current_A);

/// Steady-state current (A) that holds the conductor at max_temp_C.
double steady_state_current_A(const ConductorSpec& spec, const WeatherSample& w, double max_temp_C);

/// Steady-state dynamic rating in MW at the given temperature limit.
double steady_state_rating(const ConductorSpec& spec, const WeatherSample& w, double max_temp_C);

ConditionReport check_conservativeness_conditions(const ConductorSpec& spec,
                                                  const WeatherSample& w, double conductor_temp_C,
                                                  double current_A);

/// Coefficients of the conservative one-step map over dt_s seconds. Uses the
/// exact exponential step of the bounding linear ODE, so the map upper-bounds
/// the transient balance wherever the sufficient conditions hold. Raises
/// UnstableStep when pi*D*(h_c+h_r0)*dt/mc >= 1 (weather can no longer be
/// treated as constant across the step).
EvolutionCoefficients evolution_coefficients(const ConductorSpec& spec, const WeatherSample& w,
                                             double dt_s);

double step_temperature(const EvolutionCoefficients& c, double temp_C, double flow_MW);

/// Forward-integrates the full nonlinear transient balance with fine explicit
/// steps, holding weather and flow piecewise-constant per coarse period.
/// Returns the temperature at every coarse boundary (size flows.size()+1,
/// starting with initial_temp_C). The benchmark oracle for the one-step map.
std::vector<double> integrate_transient(const ConductorSpec& spec,
                                        std::span<const WeatherSample> weather,
                                        std::span<const double> flows_MW, double initial_temp_C,
                                        double coarse_dt_s, double fine_dt_s);

/// Equilibrium temperature of the steady balance at a fixed current.
double equilibrium_temperature(const ConductorSpec& spec, const WeatherSample& w,
                               double current_A = 0.0);

namespace detail {

/// Weighted derivative sums of the two residual expansions, exposed so tests
/// can probe them with explicit deltas.
struct ConditionInputs {
  double tx = 0.0;       // conductor rise above ambient
  double r_max = 0.0;    // resistance at max temperature
  double m_cr = 0.0;     // worst-case linear cooling coefficient
  double k2 = 0.0;       // r_max / m_cr
  double b1_tilde = 0.0;
  double b2_tilde = 0.0;
  double b1_hat = 0.0;
  double b2_hat = 0.0;
  double current_A = 0.0;
};

double f1_weighted_sum(const ConditionInputs& in, double delta_r, double delta_s, double* df1_dr,
                       double* df1_ds, double* f1_value);
double f2_weighted_sum(const ConditionInputs& in, double delta_T, double delta_I, double* df2_dT,
                       double* df2_dI, double* f2_value);

}  // namespace detail

}  // namespace dlrm::thermal
