#include "dlrm/uncertainty.hpp"

#include <gtest/gtest.h>

#include "dlrm/errors.hpp"
#include "dlrm/prepared.hpp"
#include "dlrm/stats.hpp"
#include "fixtures.hpp"

using namespace dlrm;

TEST(WindPower, CubicLaw) {
  EXPECT_DOUBLE_EQ(uncert::wind_power_mw(1.225, 1e4, 0.0), 0.0);
  double p1 = uncert::wind_power_mw(1.2, 2e4, 5.0);
  double p2 = uncert::wind_power_mw(1.2, 2e4, 10.0);
  EXPECT_NEAR(p2 / p1, 8.0, 1e-12);
  EXPECT_NEAR(uncert::wind_power_mw(1.225, 1e4, 8.0), 3.136, 1e-9);
  EXPECT_DOUBLE_EQ(uncert::wind_power_mw(1.225, 1e4, 8.0, 2.0), 2.0);  // capacity clip
}

TEST(WindPower, SpeedFromPowerRoundTrip) {
  double v = uncert::wind_speed_from_power(1.225, 5e4, 40.0);
  EXPECT_NEAR(uncert::wind_power_mw(1.225, 5e4, v), 40.0, 1e-9);
  EXPECT_NEAR(v, 10.931, 1e-3);
}

TEST(AmbientModel, BlockAssemblyAndCorrelation) {
  grid::UncertaintySpec spec;
  spec.sites = {{"a", 0.5, 2.0, 1.0}, {"b", 0.4, 3.0, 0.8}};
  spec.correlations = {{"a", "b", 0.6}};
  auto model = uncert::build_ambient_model(spec);
  ASSERT_EQ(model.dim(), 6);
  EXPECT_DOUBLE_EQ(model.sigma_varsigma(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(model.sigma_varsigma(3, 3), 0.16);
  EXPECT_NEAR(model.sigma_varsigma(0, 3), 0.6 * 0.5 * 0.4, 1e-15);
  EXPECT_NEAR(model.sigma_varsigma(2, 5), 0.6 * 1.0 * 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(model.sigma_varsigma(0, 4), 0.0);  // cross-variable terms stay zero
  EXPECT_TRUE(stats::is_psd(model.sigma_varsigma));
}

TEST(AmbientModel, RejectsBadInput) {
  grid::UncertaintySpec spec;
  spec.sites = {{"a", -0.1, 0, 0}};
  EXPECT_THROW(uncert::build_ambient_model(spec), Error);
  spec.sites = {{"a", 0.5, 0, 0}, {"b", 0.5, 0, 0}};
  spec.correlations = {{"a", "b", 1.5}};
  EXPECT_THROW(uncert::build_ambient_model(spec), Error);
  spec.correlations.clear();
  spec.dense = Eigen::MatrixXd::Identity(4, 4);  // wrong size for 2 sites
  EXPECT_THROW(uncert::build_ambient_model(spec), Error);
}

TEST(Sensitivities, WindGradientsMatchAnalyticDerivative) {
  auto prep = io::prepare(fixtures::three_bus());
  const auto& farm = prep.cs().wind_farms[0];
  int o = prep.ambient.block(farm.site);
  for (int t = 0; t < prep.horizon(); ++t) {
    double v = uncert::wind_speed_from_power(farm.air_density, farm.rotor_area_m2,
                                             farm.forecast_mw[size_t(t)]);
    double analytic = 1.5 * farm.air_density * farm.rotor_area_m2 * v * v * 1e-6;
    EXPECT_NEAR(prep.sens[size_t(t)].gamma_w(o, 0), analytic,
                1e-4 * std::abs(analytic));
    // power depends on wind speed only; direction and temperature columns stay zero
    EXPECT_DOUBLE_EQ(prep.sens[size_t(t)].gamma_w(o + 1, 0), 0.0);
    EXPECT_DOUBLE_EQ(prep.sens[size_t(t)].gamma_w(o + 2, 0), 0.0);
  }
}

TEST(Sensitivities, RatingGradientPositiveInWind) {
  auto prep = io::prepare(fixtures::three_bus());
  int e13 = prep.cs().edge_index("e13");
  int o = prep.ambient.block("s13");
  for (int t = 0; t < prep.horizon(); ++t) {
    EXPECT_GT(prep.sens[size_t(t)].gamma_f(o, e13), 0.0);
    // rating falls with ambient temperature
    EXPECT_LT(prep.sens[size_t(t)].gamma_f(o + 2, e13), 0.0);
  }
  // frozen reference: dRating/dv at the first-period weather
  EXPECT_NEAR(prep.sens[0].gamma_f(o, e13), 49.5129, 0.05);
}

TEST(Covariance, ZeroSigmaGivesZeroEverything) {
  auto prep = io::prepare(fixtures::three_bus_certain());
  const auto& jc = prep.jc[0];
  EXPECT_NEAR(jc.sigma_omega.norm(), 0.0, 1e-14);
  EXPECT_NEAR(jc.sigma_Omega, 0.0, 1e-14);
  EXPECT_NEAR(jc.sigma_omega_xi.norm(), 0.0, 1e-14);
  for (const auto& b : jc.b_omega_xi) EXPECT_NEAR(b.norm(), 0.0, 1e-14);
}

TEST(Covariance, SingleSiteBlockAlgebra) {
  auto prep = io::prepare(fixtures::three_bus());
  const auto& jc = prep.jc[0];
  const auto& sens = prep.sens[0];
  const auto& Sv = prep.ambient.sigma_varsigma;
  int e13 = prep.cs().edge_index("e13");
  double expected = (sens.gamma_w.col(0).transpose() * Sv * sens.gamma_f.col(e13))(0, 0);
  EXPECT_NEAR(jc.b_omega_xi[size_t(e13)][0], expected, 1e-12);
  EXPECT_NEAR(jc.sigma_omega(0, 0),
              (sens.gamma_w.col(0).transpose() * Sv * sens.gamma_w.col(0))(0, 0), 1e-12);
  EXPECT_TRUE(stats::is_psd(jc.sigma_omega_xi, 1e-10));
  // symmetric within factorization tolerance
  EXPECT_NEAR((jc.sigma_omega_xi - jc.sigma_omega_xi.transpose()).norm(), 0.0, 1e-12);
}

TEST(Covariance, MonteCarloReproducesAssembledMoments) {
  auto prep = io::prepare(fixtures::three_bus());
  const auto& jc = prep.jc[0];
  const auto& sens = prep.sens[0];
  stats::MvnSampler sampler(prep.ambient.sigma_varsigma);
  stats::GaussianSource src(12345);
  const int N = 100000;
  int e13 = prep.cs().edge_index("e13");
  double acc_ww = 0, acc_wxi = 0, acc_xixi = 0;
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd vs = sampler.draw(src);
    double w = sens.gamma_w.col(0).dot(vs);
    double xi = sens.gamma_f.col(e13).dot(vs);
    acc_ww += w * w;
    acc_wxi += w * xi;
    acc_xixi += xi * xi;
  }
  acc_ww /= N;
  acc_wxi /= N;
  acc_xixi /= N;
  EXPECT_NEAR(acc_ww, jc.sigma_omega(0, 0), 0.05 * jc.sigma_omega(0, 0));
  EXPECT_NEAR(acc_wxi, jc.b_omega_xi[size_t(e13)][0],
              0.05 * std::abs(jc.b_omega_xi[size_t(e13)][0]));
  EXPECT_NEAR(acc_xixi, jc.sigma_le[size_t(e13)] * jc.sigma_le[size_t(e13)],
              0.05 * acc_xixi);
}

TEST(Dominance, IndependentRatingErrorAlwaysValid) {
  auto sc = fixtures::three_bus();
  sc.cs.uncertainty.correlations.clear();  // b_omega_xi becomes zero
  auto prep = io::prepare(std::move(sc));
  auto rep = uncert::validate_dominance(prep.jc[0]);
  EXPECT_TRUE(rep.all_ok);
  for (const auto& l : rep.lines)
    if (l.applicable) EXPECT_NEAR(l.induced, 0.0, 1e-10);
}

TEST(Dominance, ZeroIntrinsicWithCorrelationViolates) {
  auto sc = fixtures::three_bus();
  sc.cs.uncertainty.sigma_le_override["e13"] = 0.0;
  auto prep = io::prepare(std::move(sc));
  auto rep = uncert::validate_dominance(prep.jc[0]);
  EXPECT_FALSE(rep.all_ok);
}

TEST(Dominance, DerivedModelKeepsRadicandNonnegative) {
  // sigma_le derived from the same gradients dominates the induced part, so
  // the cone tail stays real (Cauchy-Schwarz).
  auto prep = io::prepare(fixtures::three_bus());
  for (int t = 0; t < prep.horizon(); ++t) {
    auto rep = uncert::validate_dominance(prep.jc[size_t(t)]);
    EXPECT_TRUE(rep.all_ok) << t;
    for (const auto& l : rep.lines)
      if (l.applicable) EXPECT_LE(l.induced, l.intrinsic + 1e-9);
  }
}

TEST(Dominance, MultiPeriodCheckUsesSiteBlock) {
  auto prep = io::prepare(fixtures::three_bus());
  int e13 = prep.cs().edge_index("e13");
  Eigen::VectorXd g(3);
  g << 1.0, 0.2, -0.5;
  double induced = 0, intrinsic = 0;
  EXPECT_TRUE(uncert::dominance_multi_ok(prep.jc[0], e13, g, &induced, &intrinsic));
  EXPECT_GT(intrinsic, 0.0);
  EXPECT_GE(intrinsic, induced - 1e-12);
}
