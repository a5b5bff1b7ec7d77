#include <benchmark/benchmark.h>

#include "dlrm/thermal.hpp"

namespace {

dlrm::thermal::ConductorSpec bench_conductor() {
  dlrm::thermal::ConductorSpec c;
  c.diameter_m = 0.02814;
  c.solar_absorptivity = 0.8;
  c.emissivity = 0.8;
  c.resistance_ambient_ohm_per_m = 7.283e-5;
  c.resistance_ref_ohm_per_m = 8.688e-5;
  c.temperature_ref_C = 75.0;
  c.temp_coeff_resistance_per_C = 3.234e-3;
  c.heat_capacity_J_per_m_C = 8000.0;
  c.max_temp_C = 100.0;
  c.voltage_kV = 138.0;
  return c;
}

dlrm::thermal::WeatherSample bench_weather() {
  dlrm::thermal::WeatherSample w;
  w.wind_speed_m_s = 1.4;
  w.wind_dir_deg = 70.0;
  w.ambient_temp_C = 32.0;
  w.solar_W_m2 = 850.0;
  w.air_density_kg_m3 = 1.08;
  return w;
}

void BM_SteadyRating(benchmark::State& state) {
  auto c = bench_conductor();
  auto w = bench_weather();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dlrm::thermal::steady_state_rating(c, w, c.max_temp_C));
  }
}
BENCHMARK(BM_SteadyRating);

void BM_EvolutionCoefficients(benchmark::State& state) {
  auto c = bench_conductor();
  auto w = bench_weather();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dlrm::thermal::evolution_coefficients(c, w, 900.0));
  }
}
BENCHMARK(BM_EvolutionCoefficients);

void BM_TransientDay(benchmark::State& state) {
  auto c = bench_conductor();
  std::vector<dlrm::thermal::WeatherSample> weather(96, bench_weather());
  std::vector<double> flows(96, 120.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dlrm::thermal::integrate_transient(c, weather, flows, 45.0, 900.0, 60.0));
  }
}
BENCHMARK(BM_TransientDay);

}  // namespace
