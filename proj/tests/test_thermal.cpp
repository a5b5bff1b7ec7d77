#include "dlrm/thermal.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dlrm/errors.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace dlrm;
using fixtures::drake_bundle;
using fixtures::summer_noon;
using fixtures::weather;

TEST(HeatTerms, ZeroRiseZeroSolarZeroCurrent) {
  auto c = drake_bundle();
  auto w = weather(0.61, 90, 40, 0, 1.06);
  auto ht = thermal::heat_terms(c, w, 40.0, 0.0);
  EXPECT_DOUBLE_EQ(ht.q_s, 0.0);
  EXPECT_DOUBLE_EQ(ht.q_J, 0.0);
  EXPECT_DOUBLE_EQ(ht.q_r, 0.0);
  EXPECT_DOUBLE_EQ(ht.q_c, 0.0);
}

TEST(HeatTerms, ZeroRiseLeavesOnlyAmbientJoule) {
  auto c = drake_bundle();
  auto w = weather(0.61, 90, 40, 0, 1.06);
  auto ht = thermal::heat_terms(c, w, 40.0, 500.0);
  EXPECT_NEAR(ht.q_J, c.resistance_at(40.0) * 500.0 * 500.0, 1e-12);
  EXPECT_DOUBLE_EQ(ht.q_r, 0.0);
  EXPECT_DOUBLE_EQ(ht.q_c, 0.0);
}

TEST(HeatTerms, SummerReferenceMatchesOracle) {
  auto c = drake_bundle();
  auto ht = thermal::heat_terms(c, summer_noon(), 100.0, 0.0);
  auto oc = oracle::heat_chain(c, 0.61, 90, 40, 1000, 1.06, 100.0, 0.0);
  EXPECT_NEAR(ht.q_s, oc.q_s, 1e-9);
  EXPECT_NEAR(ht.q_r, oc.q_r, 1e-9);
  EXPECT_NEAR(ht.q_c, oc.q_c, 1e-9);
  EXPECT_NEAR(ht.h_c, oc.h_c, 1e-9);
  // frozen values from the scalar evaluation of the chain
  EXPECT_NEAR(ht.q_s, 22.512, 1e-6);
  EXPECT_NEAR(ht.q_r, 39.1362262515, 1e-6);
  EXPECT_NEAR(ht.q_c, 83.3435432234, 1e-6);
  EXPECT_NEAR(ht.h_r0, 5.56409744913, 1e-8);
  EXPECT_NEAR(ht.k1, 0.0266650037498, 1e-10);

  auto ht500 = thermal::heat_terms(c, summer_noon(), 100.0, 500.0);
  EXPECT_NEAR(ht500.q_J, 23.47625, 1e-6);
}

TEST(HeatTerms, PreconditionsRejected) {
  auto c = drake_bundle();
  EXPECT_THROW(thermal::heat_terms(c, summer_noon(), -20.0, 0.0), Error);
  EXPECT_THROW(thermal::heat_terms(c, summer_noon(), 80.0, -1.0), Error);
  auto bad = summer_noon();
  bad.wind_speed_m_s = -0.1;
  EXPECT_THROW(thermal::heat_terms(c, bad, 80.0, 0.0), Error);
}

TEST(HeatTerms, ContinuityUnderTinyPerturbations) {
  auto c = drake_bundle();
  auto base = thermal::heat_terms(c, summer_noon(), 90.0, 700.0);
  auto compare = [&](const thermal::WeatherSample& w, double tc, double amp) {
    auto ht = thermal::heat_terms(c, w, tc, amp);
    auto rel = [](double a, double b) {
      return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
    };
    EXPECT_LT(rel(ht.q_s, base.q_s), 1e-6);
    EXPECT_LT(rel(ht.q_J, base.q_J), 1e-6);
    EXPECT_LT(rel(ht.q_r, base.q_r), 1e-6);
    EXPECT_LT(rel(ht.q_c, base.q_c), 1e-6);
  };
  auto w = summer_noon();
  w.wind_speed_m_s *= 1.0 + 1e-9;
  compare(w, 90.0, 700.0);
  w = summer_noon();
  w.ambient_temp_C *= 1.0 + 1e-9;
  compare(w, 90.0, 700.0);
  w = summer_noon();
  w.solar_W_m2 *= 1.0 + 1e-9;
  compare(w, 90.0, 700.0);
  compare(summer_noon(), 90.0 * (1.0 + 1e-9), 700.0);
  compare(summer_noon(), 90.0, 700.0 * (1.0 + 1e-9));
}

TEST(SteadyRating, SummerReferenceValue) {
  auto c = drake_bundle();
  double mw = thermal::steady_state_rating(c, summer_noon(), c.max_temp_C);
  EXPECT_NEAR(mw, 142.38516043, 1e-6);
  double amps = thermal::steady_state_current_A(c, summer_noon(), c.max_temp_C);
  EXPECT_NEAR(amps, oracle::rating_amps(c, 0.61, 90, 40, 1000, 1.06, 100.0), 1e-9);
}

TEST(SteadyRating, MonotoneInWindAndAmbient) {
  auto c = drake_bundle();
  double prev = 0.0;
  for (double v : {0.0, 0.3, 0.61, 1.0, 2.0, 4.0, 8.0}) {
    double r = thermal::steady_state_rating(c, weather(v, 90, 35, 800, 1.1), c.max_temp_C);
    EXPECT_GE(r, prev);
    prev = r;
  }
  prev = 1e9;
  for (double ta : {-10.0, 0.0, 10.0, 20.0, 30.0, 40.0}) {
    double r = thermal::steady_state_rating(c, weather(1.5, 90, ta, 800, 1.1), c.max_temp_C);
    EXPECT_LE(r, prev);
    prev = r;
  }
}

TEST(SteadyRating, SolarDominanceIsInfeasible) {
  auto c = drake_bundle();
  EXPECT_THROW(thermal::steady_state_rating(c, weather(0.0, 90, 96, 50000, 1.0), c.max_temp_C),
               Error);
}

TEST(Conditions, ZeroDeltasGiveZeroSums) {
  thermal::detail::ConditionInputs in;
  in.tx = 60.0;
  in.r_max = 9.4e-5;
  in.m_cr = 2.0;
  in.k2 = in.r_max / in.m_cr;
  in.b1_tilde = 1e5;
  in.b2_tilde = 1e9;
  in.b1_hat = 0.3;
  in.b2_hat = 2e-3;
  in.current_A = 900.0;
  EXPECT_DOUBLE_EQ(thermal::detail::f1_weighted_sum(in, 0.0, 0.0, nullptr, nullptr, nullptr), 0.0);
  EXPECT_DOUBLE_EQ(thermal::detail::f2_weighted_sum(in, 0.0, 0.0, nullptr, nullptr, nullptr), 0.0);
}

TEST(Conditions, ZeroCurrentIsNotApplicable) {
  auto rep =
      thermal::check_conservativeness_conditions(drake_bundle(), summer_noon(), 80.0, 0.0);
  EXPECT_FALSE(rep.applicable);
}

TEST(Conditions, HoldNearRatedCurrent) {
  auto c = drake_bundle();
  double imax = thermal::steady_state_current_A(c, summer_noon(), c.max_temp_C);
  auto rep = thermal::check_conservativeness_conditions(c, summer_noon(), 95.0, 0.97 * imax);
  ASSERT_TRUE(rep.applicable);
  EXPECT_TRUE(rep.condition_static_ok);
  EXPECT_TRUE(rep.condition_transient_ok);
  EXPECT_LT(rep.sum_static, 0.0);
  EXPECT_LT(rep.sum_transient, 0.0);
}

TEST(Conditions, TransientFailsWhenUnderLoaded) {
  auto c = drake_bundle();
  double imax = thermal::steady_state_current_A(c, summer_noon(), c.max_temp_C);
  auto rep = thermal::check_conservativeness_conditions(c, summer_noon(), 90.0, 0.87 * imax);
  ASSERT_TRUE(rep.applicable);
  EXPECT_FALSE(rep.condition_transient_ok);
}

TEST(Conditions, StaticFailsForLowEmissivitySolarHeavy) {
  auto c = drake_bundle();
  c.emissivity = 0.05;
  auto w = weather(0.61, 90, 40, 1400, 1.06);
  auto rep = thermal::check_conservativeness_conditions(c, w, 80.0, 300.0);
  ASSERT_TRUE(rep.applicable);
  EXPECT_FALSE(rep.condition_static_ok);
}

TEST(Evolution, VanishingStepIsIdentity) {
  auto c = drake_bundle();
  auto mu = thermal::evolution_coefficients(c, summer_noon(), 1e-4);
  EXPECT_NEAR(mu.mu_a, 0.0, 1e-5);
  EXPECT_NEAR(mu.mu_b, 1.0, 1e-7);
  EXPECT_NEAR(mu.mu_c, 0.0, 1e-9);
  EXPECT_NEAR(thermal::step_temperature(mu, 77.0, 120.0), 77.0, 1e-3);
}

TEST(Evolution, SummerReferenceCoefficients) {
  auto mu = thermal::evolution_coefficients(drake_bundle(), summer_noon(), 900.0);
  EXPECT_NEAR(mu.mu_a, 9.91127186517, 1e-8);
  EXPECT_NEAR(mu.mu_b, 0.809282798321, 1e-10);
  EXPECT_NEAR(mu.mu_c, 0.000410203098847, 1e-12);
  EXPECT_NEAR(mu.mu_d, 2.22687525347e-9, 1e-18);
  EXPECT_GT(mu.mu_b, 0.0);
  EXPECT_LT(mu.mu_b, 1.0);
}

TEST(Evolution, OversizedStepIsRejected) {
  EXPECT_THROW(thermal::evolution_coefficients(drake_bundle(), summer_noon(), 5000.0), Error);
}

TEST(Evolution, StepWithoutFlowIsAffine) {
  thermal::EvolutionCoefficients mu;
  mu.mu_a = 0.0;
  mu.mu_b = 0.8;
  EXPECT_DOUBLE_EQ(thermal::step_temperature(mu, 50.0, 0.0), 40.0);
}

TEST(Evolution, FixedPointAtRating) {
  auto c = drake_bundle();
  double rating = thermal::steady_state_rating(c, summer_noon(), c.max_temp_C);
  auto mu = thermal::evolution_coefficients(c, summer_noon(), 900.0);
  double next = thermal::step_temperature(mu, c.max_temp_C, rating);
  double tx = c.max_temp_C - summer_noon().ambient_temp_C;
  EXPECT_NEAR(next, c.max_temp_C, 0.02 * tx);
}

TEST(Evolution, StepDominatesFineIntegration) {
  auto c = drake_bundle();
  auto w = summer_noon();
  auto mu = thermal::evolution_coefficients(c, w, 900.0);
  double imax = thermal::steady_state_current_A(c, w, c.max_temp_C);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> utemp(55.0, 99.0);
  std::uniform_real_distribution<double> uflow(0.95, 1.3);
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    double t0 = utemp(rng);
    double amps = uflow(rng) * imax;
    auto rep = thermal::check_conservativeness_conditions(c, w, t0, amps);
    if (!rep.applicable || !rep.condition_static_ok || !rep.condition_transient_ok) continue;
    ++checked;
    double f = c.flow_MW(amps);
    double bound = thermal::step_temperature(mu, t0, f);
    double truth = oracle::integrate_fixed_weather(c, 0.61, 90, 40, 1000, 1.06, f, t0, 900.0, 1.0);
    EXPECT_GT(bound, truth) << "t0=" << t0 << " amps=" << amps;
  }
  EXPECT_GT(checked, 100);
}

TEST(Transient, EquilibriumStaysPut) {
  auto c = drake_bundle();
  auto w = weather(1.0, 90, 25, 0, 1.2);
  std::vector<thermal::WeatherSample> series(8, w);
  std::vector<double> flows(8, 0.0);
  auto temps = thermal::integrate_transient(c, series, flows, 25.0, 900.0, 30.0);
  for (double t : temps) EXPECT_NEAR(t, 25.0, 1e-9);
}

TEST(Transient, ConvergesMonotonicallyToSteadyState) {
  auto c = drake_bundle();
  auto w = summer_noon();
  double rating = thermal::steady_state_rating(c, w, c.max_temp_C);
  double flow = 0.8 * rating;
  std::vector<thermal::WeatherSample> series(40, w);
  std::vector<double> flows(40, flow);
  double t0 = thermal::equilibrium_temperature(c, w, 0.0);
  auto temps = thermal::integrate_transient(c, series, flows, t0, 900.0, 30.0);
  for (size_t i = 1; i < temps.size(); ++i) EXPECT_GE(temps[i], temps[i - 1] - 1e-9);
  double t_eq = thermal::equilibrium_temperature(c, w, c.current_A(flow));
  EXPECT_NEAR(temps.back(), t_eq, 0.05);
  EXPECT_LT(temps.back(), c.max_temp_C);
}

TEST(Transient, RunawayFineStepIsRejected) {
  auto c = drake_bundle();
  c.heat_capacity_J_per_m_C = 2.0;  // absurdly light conductor
  std::vector<thermal::WeatherSample> series(1, summer_noon());
  std::vector<double> flows(1, 400.0);
  EXPECT_THROW(thermal::integrate_transient(c, series, flows, 40.0, 900.0, 60.0), Error);
}

TEST(Transient, EquilibriumTemperatureSummerReference) {
  double t = thermal::equilibrium_temperature(drake_bundle(), summer_noon(), 0.0);
  EXPECT_NEAR(t, 51.7898, 1e-3);
}

TEST(ConductorSpec, ValidationNamesTheField) {
  auto c = drake_bundle();
  c.diameter_m = 0.0;
  try {
    c.validate("drake");
    FAIL() << "expected validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::validation_error);
    EXPECT_NE(std::string(e.what()).find("diameter_m"), std::string::npos);
  }
}
