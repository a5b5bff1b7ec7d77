#include "fixtures.hpp"

#include <cmath>

#include "dlrm/errors.hpp"

namespace fixtures {

using dlrm::grid::SystemCase;
using dlrm::thermal::ConductorSpec;
using dlrm::thermal::WeatherSample;

ConductorSpec drake_bundle() {
  ConductorSpec c;
  c.diameter_m = 0.02814;
  c.solar_absorptivity = 0.8;
  c.emissivity = 0.8;
  c.resistance_ambient_ohm_per_m = 7.283e-5;  // at 25 C
  c.resistance_ref_ohm_per_m = 8.688e-5;      // at 75 C
  c.temperature_ref_C = 75.0;
  c.temp_coeff_resistance_per_C =
      (c.resistance_ref_ohm_per_m - c.resistance_ambient_ohm_per_m) /
      (c.resistance_ref_ohm_per_m * 50.0);
  c.heat_capacity_J_per_m_C = 8000.0;
  c.max_temp_C = 100.0;
  c.voltage_kV = 138.0;
  return c;
}

WeatherSample weather(double v, double dir_deg, double ta, double qs, double rho) {
  WeatherSample w;
  w.wind_speed_m_s = v;
  w.wind_dir_deg = dir_deg;
  w.ambient_temp_C = ta;
  w.solar_W_m2 = qs;
  w.air_density_kg_m3 = rho;
  return w;
}

WeatherSample summer_noon() { return weather(0.61, 90.0, 40.0, 1000.0, 1.06); }

dlrm::io::Scenario three_bus() {
  dlrm::io::Scenario sc;
  SystemCase& cs = sc.cs;
  cs.name = "three_bus";
  cs.horizon = 4;
  cs.period_s = 900.0;

  cs.nodes.resize(3);
  cs.nodes[0] = {"n1", {0, 0, 0, 0}};
  cs.nodes[1] = {"n2", {30, 30, 30, 30}};
  cs.nodes[2] = {"n3", {230, 260, 270, 255}};
  cs.slack = 2;

  dlrm::grid::Edge e12;
  e12.id = "e12";
  e12.from = 0;
  e12.to = 1;
  e12.susceptance = 10.0;
  e12.static_rating_mw = 200.0;
  dlrm::grid::Edge e23 = e12;
  e23.id = "e23";
  e23.from = 1;
  e23.to = 2;
  dlrm::grid::Edge e13 = e12;
  e13.id = "e13";
  e13.from = 0;
  e13.to = 2;
  e13.static_rating_mw = 60.0;
  e13.conductor_id = "drake_bundle";
  e13.weather_series = "w13";
  e13.site = "s13";
  cs.edges = {e12, e23, e13};

  dlrm::grid::Generator g1;
  g1.id = "g1";
  g1.node = 0;
  g1.c1 = 15.0;
  g1.c2 = 0.02;
  g1.p_min = 0.0;
  g1.p_max = 300.0;
  g1.ramp_up = 120.0;
  g1.ramp_dn = 120.0;
  g1.emission_kg_per_kwh = 0.9;
  dlrm::grid::Generator g3;
  g3.id = "g3";
  g3.node = 2;
  g3.c1 = 45.0;
  g3.c2 = 0.05;
  g3.p_min = 0.0;
  g3.p_max = 250.0;
  g3.ramp_up = 120.0;
  g3.ramp_dn = 120.0;
  g3.emission_kg_per_kwh = 0.32;
  cs.generators = {g1, g3};

  dlrm::grid::WindFarm wf;
  wf.id = "wf1";
  wf.node = 0;
  wf.forecast_mw = {40, 44, 40, 36};
  wf.air_density = 1.225;
  wf.rotor_area_m2 = 5.0e4;
  wf.capacity_mw = 120.0;
  wf.site = "s1";
  cs.wind_farms = {wf};

  cs.uncertainty.sites = {{"s1", 0.5, 2.0, 0.5}, {"s13", 0.3, 5.0, 0.5}};
  cs.uncertainty.correlations = {{"s1", "s13", 0.5}};

  sc.conductors["drake_bundle"] = drake_bundle();
  sc.weather["w13"] = {
      weather(0.61, 90, 40.0, 1000, 1.06),
      weather(0.75, 90, 40.5, 1030, 1.06),
      weather(0.68, 90, 41.0, 1010, 1.06),
      weather(0.61, 90, 40.5, 980, 1.06),
  };
  return sc;
}

dlrm::io::Scenario three_bus_certain() {
  auto sc = three_bus();
  for (auto& s : sc.cs.uncertainty.sites) {
    s.sigma_wind = 0.0;
    s.sigma_dir = 0.0;
    s.sigma_temp = 0.0;
  }
  return sc;
}

std::vector<WeatherSample> seasonal_profile(const std::string& season) {
  double ta0, ta_amp, v0, v_amp, qs_peak, rho;
  if (season == "winter") {
    ta0 = -2.0;
    ta_amp = 4.0;
    v0 = 4.0;
    v_amp = 2.0;
    qs_peak = 250.0;
    rho = 1.29;
  } else if (season == "spring") {
    ta0 = 14.0;
    ta_amp = 6.0;
    v0 = 2.4;
    v_amp = 1.4;
    qs_peak = 650.0;
    rho = 1.18;
  } else if (season == "summer") {
    ta0 = 33.0;
    ta_amp = 6.0;
    v0 = 0.9;
    v_amp = 0.5;
    qs_peak = 1000.0;
    rho = 1.06;
  } else {
    dlrm::fail(dlrm::errc::validation_error, "unknown season " + season);
  }

  std::vector<WeatherSample> out;
  out.reserve(96);
  for (int k = 0; k < 96; ++k) {
    double hour = k * 0.25;
    double diurnal = std::sin(2.0 * M_PI * (hour - 9.0) / 24.0);
    double gust = std::sin(2.0 * M_PI * (hour + 3.0) / 11.0);
    double ta = ta0 + ta_amp * diurnal;
    double v = std::max(0.15, v0 + v_amp * gust);
    double qs = hour >= 6.0 && hour <= 18.0
                    ? qs_peak * std::sin(M_PI * (hour - 6.0) / 12.0)
                    : 0.0;
    double dir = 90.0 - 30.0 * std::sin(2.0 * M_PI * hour / 24.0);
    out.push_back(weather(v, dir, ta, qs, rho));
  }
  return out;
}

std::string fixture_dir() { return DLRM_FIXTURE_DIR; }

}  // namespace fixtures
