#include "dlrm/market_single.hpp"

#include <gtest/gtest.h>

#include "dlrm/analysis.hpp"
#include "dlrm/errors.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace dlrm;
using market::RatingMode;
using market::SinglePeriodConfig;

namespace {

io::Prepared prep_three_bus() { return io::prepare(fixtures::three_bus()); }

market::SingleResult clear(const io::Prepared& prep, RatingMode mode, double eps = 0.05) {
  SinglePeriodConfig cfg;
  cfg.mode = mode;
  cfg.epsilon = eps;
  auto in = prep.single_inputs(0, mode);
  auto res = market::solve_single(in, cfg);
  if (res.status != socp::SolveStatus::optimal)
    throw std::runtime_error(std::string("clear failed: ") + socp::status_name(res.status));
  return res;
}

}  // namespace

TEST(MarketSingle, SingleBusMarginalPricing) {
  io::Scenario sc;
  sc.cs.name = "onebus";
  sc.cs.horizon = 1;
  sc.cs.nodes = {{"n", {100.0}}};
  sc.cs.slack = 0;
  grid::Generator g;
  g.id = "g";
  g.node = 0;
  g.c1 = 20.0;
  g.c2 = 0.01;
  g.p_max = 400.0;
  sc.cs.generators = {g};
  auto prep = io::prepare(std::move(sc));
  auto res = clear(prep, RatingMode::slr);
  EXPECT_NEAR(res.p[0], 100.0, 1e-6);
  EXPECT_NEAR(res.alpha[0], 1.0, 1e-7);
  EXPECT_NEAR(res.lmp[0], 20.0 + 2 * 0.01 * 100.0, 2e-5);
  EXPECT_NEAR(res.lmrp[0], 0.0, 1e-6);  // no wind uncertainty in this case
}

TEST(MarketSingle, SlrCongestionBindsTheBottleneck) {
  auto prep = prep_three_bus();
  auto res = clear(prep, RatingMode::slr);
  int e13 = prep.cs().edge_index("e13");
  EXPECT_NEAR(res.flows[e13], 60.0, 1e-5);
  EXPECT_GT(res.sol.dual_of("fmax[e13]"), 1.0);
  EXPECT_LT(res.sol.dual_of("fmax[e12]"), 1e-6);
  EXPECT_LT(res.sol.dual_of("fmin[e13]"), 1e-6);
  // importing node prices above the exporting one
  EXPECT_GT(res.lmp[2], res.lmp[0] + 5.0);
}

TEST(MarketSingle, SlrOptimumMatchesBruteForce) {
  auto prep = prep_three_bus();
  auto res = clear(prep, RatingMode::slr);
  const auto& cs = prep.cs();
  double wind = prep.wind_node.col(0).sum();
  double load = prep.load.col(0).sum();
  const auto& g1 = cs.generators[0];
  const auto& g3 = cs.generators[1];
  auto in = prep.single_inputs(0, RatingMode::slr);

  // One free dimension: g1 output (g3 balances). Flow caps via the PTDF row.
  auto cost = [&](double p1) {
    double p3 = load - wind - p1;
    if (p3 < g3.p_min || p3 > g3.p_max || p1 < g1.p_min || p1 > g1.p_max) return 1e12;
    for (int e = 0; e < 3; ++e) {
      Eigen::VectorXd coef;
      double c0 = 0.0;
      market::flow_expression(in, e, &coef, &c0);
      double f = coef[0] * p1 + coef[1] * p3 + c0;
      if (std::abs(f) > in.rating[e] + 1e-9) return 1e12;
    }
    return g1.c1 * p1 + g1.c2 * p1 * p1 + g3.c1 * p3 + g3.c2 * p3 * p3;
  };
  double best = oracle::grid_minimize_1d(0.0, 300.0, 600, cost);
  // Reserve terms are separable and near-zero cost; compare energy cost only.
  double sigma = prep.jc[0].sigma_Omega;
  double energy_cost = res.objective - g1.c2 * sigma * res.alpha[0] * res.alpha[0] -
                       g3.c2 * sigma * res.alpha[1] * res.alpha[1];
  EXPECT_NEAR(energy_cost, best, 1e-3 * best);
}

TEST(MarketSingle, CostOrderingAcrossModes) {
  auto prep = prep_three_bus();
  double slr = clear(prep, RatingMode::slr).objective;
  double dlr = clear(prep, RatingMode::dlr).objective;
  double cc = clear(prep, RatingMode::cc_dlr).objective;
  EXPECT_LE(dlr, slr + 1e-6);
  EXPECT_LE(dlr, cc + 1e-6);
  EXPECT_LE(cc, slr + 1e-6);
  EXPECT_LT(dlr, slr - 1.0);  // congestion genuinely relieved on this fixture
}

TEST(MarketSingle, ZeroUncertaintyCollapsesToDeterministic) {
  auto prep = io::prepare(fixtures::three_bus_certain());
  double dlr = clear(prep, RatingMode::dlr).objective;
  double cc = clear(prep, RatingMode::cc_dlr).objective;
  EXPECT_NEAR(dlr, cc, 1e-5 * std::max(1.0, dlr));
}

TEST(MarketSingle, LmpMatchesIndependentRecomputation) {
  auto prep = prep_three_bus();
  auto res = clear(prep, RatingMode::cc_dlr);
  const auto& cs = prep.cs();
  double lam_bal = res.sol.dual.at("bal");
  for (size_t i = 0; i < cs.nodes.size(); ++i) {
    double acc = lam_bal;
    for (size_t e = 0; e < cs.edges.size(); ++e) {
      const std::string id = cs.edges[e].id;
      acc -= (res.sol.dual.at("fmax[" + id + "]") - res.sol.dual.at("fmin[" + id + "]")) *
             prep.ptdf.S(int(e), int(i));
    }
    EXPECT_NEAR(res.lmp[int(i)], acc, 1e-9);
  }
}

TEST(MarketSingle, LmrpRoutesReconcileWithAmpleCapacity) {
  // Capacity is slack on this fixture, so reserves carry no scarcity price;
  // both routes must agree on (near) zero.
  auto prep = prep_three_bus();
  auto res = clear(prep, RatingMode::cc_dlr);
  for (int g = 0; g < res.lmrp.size(); ++g) {
    EXPECT_NEAR(res.lmrp[g], 0.0, 1e-5);
    EXPECT_NEAR(res.lmrp[g], res.lmrp_formula[g], 1e-5);
  }
}

TEST(MarketSingle, LmrpRoutesReconcileUnderScarcity) {
  auto sc = fixtures::three_bus();
  sc.cs.generators[0].p_max = 120.0;
  sc.cs.generators[1].p_max = 112.0;
  auto prep = io::prepare(std::move(sc));
  auto res = clear(prep, RatingMode::cc_dlr);
  bool any_positive = false;
  for (int g = 0; g < res.lmrp.size(); ++g) {
    EXPECT_NEAR(res.lmrp[g], res.lmrp_formula[g], 1e-5);
    any_positive = any_positive || res.lmrp[g] > 0.1;
  }
  EXPECT_TRUE(any_positive);
  EXPECT_FALSE(res.degenerate_duals);
}

TEST(MarketSingle, UncongestedNetworkHasFlatLmp) {
  auto sc = fixtures::three_bus();
  for (auto& e : sc.cs.edges) e.static_rating_mw = 2000.0;
  auto prep = io::prepare(std::move(sc));
  auto res = clear(prep, RatingMode::slr);
  double bal = res.sol.dual_of("bal");
  for (int i = 0; i < res.lmp.size(); ++i) EXPECT_NEAR(res.lmp[i], bal, 1e-7);
}

TEST(MarketSingle, ReservesPinnedToRecourseBound) {
  auto prep = prep_three_bus();
  auto res = clear(prep, RatingMode::cc_dlr);
  SinglePeriodConfig cfg;
  double need = std::sqrt(prep.jc[0].sigma_Omega) * cfg.delta();
  for (int g = 0; g < res.alpha.size(); ++g) {
    EXPECT_NEAR(res.r_up[g], need * res.alpha[g], 1e-5);
    EXPECT_NEAR(res.r_dn[g], need * res.alpha[g], 1e-5);
  }
}

TEST(MarketSingle, StationarityResidualsUnderGate) {
  auto prep = prep_three_bus();
  for (auto mode : {RatingMode::slr, RatingMode::dlr, RatingMode::cc_dlr}) {
    SinglePeriodConfig cfg;
    cfg.mode = mode;
    auto in = prep.single_inputs(0, mode);
    auto res = market::solve_single(in, cfg);
    ASSERT_EQ(res.status, socp::SolveStatus::optimal);
    auto rep = analysis::stationarity_single(prep, cfg, in, res);
    EXPECT_LE(rep.max_scaled_residual, 1e-6) << market::mode_name(mode);
  }
}

TEST(MarketSingle, CcTightensTheEffectiveCap) {
  auto prep = prep_three_bus();
  auto dlr = clear(prep, RatingMode::dlr);
  auto cc = clear(prep, RatingMode::cc_dlr);
  int e13 = prep.cs().edge_index("e13");
  EXPECT_LT(cc.flows[e13], dlr.flows[e13] - 1.0);  // security margin bites
  EXPECT_GT(cc.flows[e13], 60.0);                  // but beats the static limit
}

TEST(MarketSingle, DominanceViolationRefusesToBuild) {
  auto sc = fixtures::three_bus();
  sc.cs.uncertainty.sigma_le_override["e13"] = 0.0;
  auto prep = io::prepare(std::move(sc));
  SinglePeriodConfig cfg;
  cfg.mode = RatingMode::cc_dlr;
  auto in = prep.single_inputs(0, RatingMode::cc_dlr);
  EXPECT_THROW(market::build_single(in, cfg), Error);
}

TEST(MarketSingle, EpsilonNearHalfDegeneratesReserves) {
  auto prep = prep_three_bus();
  auto res = clear(prep, RatingMode::dlr, 0.4999999);
  for (int g = 0; g < res.r_up.size(); ++g) EXPECT_LT(res.r_up[g], 1e-3);
  for (int g = 0; g < res.lmrp.size(); ++g)
    EXPECT_NEAR(res.lmrp_formula[g], res.lmrp[g], 1e-9);
  SinglePeriodConfig bad;
  bad.epsilon = 0.6;
  EXPECT_THROW(bad.delta(), Error);
}

TEST(MarketSingle, MonteCarloRatesRespectEpsilon) {
  auto prep = prep_three_bus();
  SinglePeriodConfig cfg;
  cfg.mode = RatingMode::cc_dlr;
  auto in = prep.single_inputs(0, RatingMode::cc_dlr);
  auto res = market::solve_single(in, cfg);
  ASSERT_EQ(res.status, socp::SolveStatus::optimal);
  auto val = analysis::monte_carlo_validate_single(prep, 0, in, res, 4000, 99);
  EXPECT_LE(val.max_rate, cfg.epsilon + 0.012);
}
