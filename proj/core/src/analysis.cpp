#include "dlrm/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "dlrm/errors.hpp"
#include "dlrm/stats.hpp"

namespace dlrm::analysis {

namespace {

std::string idx(const std::string& base, const std::string& id, int t) {
  return base + "[" + id + "," + std::to_string(t) + "]";
}

double profit_terms(const grid::Generator& gen, double pi, double tau_up, double tau_dn,
                    double p, double ru, double rd) {
  return pi * p + tau_up * ru + tau_dn * rd - gen.c1 * p - gen.c2 * p * p;
}

}  // namespace

BestResponse best_response_single(const grid::Generator& gen, double pi, double tau_up,
                                  double tau_dn) {
  // With reserves priced at tau and saturating their band, the output choice
  // separates: profit(p) = (pi - c1 - tau_up + tau_dn)... the band terms are
  // tau_up*(pmax - p) + tau_dn*(p - pmin), so the effective energy price is
  // pi - tau_up + tau_dn.
  BestResponse br;
  br.p.resize(1);
  br.r_up.resize(1);
  br.r_dn.resize(1);

  double pi_eff = pi - std::max(tau_up, 0.0) + std::max(tau_dn, 0.0);
  double p;
  if (gen.c2 > 0)
    p = std::clamp((pi_eff - gen.c1) / (2 * gen.c2), gen.p_min, gen.p_max);
  else
    p = pi_eff > gen.c1 ? gen.p_max : gen.p_min;
  double ru = tau_up > 0 ? gen.p_max - p : 0.0;
  double rd = tau_dn > 0 ? p - gen.p_min : 0.0;
  br.p[0] = p;
  br.r_up[0] = ru;
  br.r_dn[0] = rd;
  br.profit = profit_terms(gen, pi, tau_up, tau_dn, p, ru, rd);
  // Interior stationarity of the separated problem; boundary cases are closed
  // by the binding-row multipliers.
  double grad = pi_eff - gen.c1 - 2 * gen.c2 * p;
  br.kkt_residual =
      (p > gen.p_min + 1e-12 && p < gen.p_max - 1e-12) ? std::abs(grad) : 0.0;
  return br;
}

BestResponse best_response_single(const grid::Generator& gen, double pi, double tau) {
  return best_response_single(gen, pi, tau, tau);
}

BestResponse best_response_multi(const grid::Generator& gen, const Eigen::VectorXd& pi,
                                 const Eigen::VectorXd& tau) {
  return best_response_multi(gen, pi, tau, tau);
}

BestResponse best_response_multi(const grid::Generator& gen, const Eigen::VectorXd& pi,
                                 const Eigen::VectorXd& tau_up, const Eigen::VectorXd& tau_dn) {
  const int T = int(pi.size());
  if (tau_up.size() != T || tau_dn.size() != T)
    fail(errc::index_mismatch, "best_response_multi: price series mismatch");

  socp::ConicProgram prog;
  std::vector<int> vp(static_cast<size_t>(T)), vru(static_cast<size_t>(T)), vrd(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    vp[size_t(t)] = prog.add_variable("p" + std::to_string(t));
    vru[size_t(t)] = prog.add_variable("ru" + std::to_string(t));
    vrd[size_t(t)] = prog.add_variable("rd" + std::to_string(t));
  }
  for (int t = 0; t < T; ++t) {
    prog.add_objective_term(vp[size_t(t)], gen.c1 - pi[t]);
    prog.add_objective_term(vru[size_t(t)], -tau_up[t]);
    prog.add_objective_term(vrd[size_t(t)], -tau_dn[t]);
    if (gen.c2 > 0)
      prog.add_quadratic_epigraph(vp[size_t(t)], gen.c2, 1.0, "epi" + std::to_string(t));

    socp::LinExpr pmax = socp::LinExpr::of(vp[size_t(t)], 1.0).add(vru[size_t(t)], 1.0);
    pmax.constant = -gen.p_max;
    prog.add_inequality(std::move(pmax), "pmax" + std::to_string(t));
    socp::LinExpr pmin = socp::LinExpr::of(vp[size_t(t)], -1.0).add(vrd[size_t(t)], 1.0);
    pmin.constant = gen.p_min;
    prog.add_inequality(std::move(pmin), "pmin" + std::to_string(t));
    prog.add_inequality(socp::LinExpr::of(vru[size_t(t)], -1.0), "runn" + std::to_string(t));
    prog.add_inequality(socp::LinExpr::of(vrd[size_t(t)], -1.0), "rdnn" + std::to_string(t));
  }
  for (int t = 0; t + 1 < T; ++t) {
    socp::LinExpr up = socp::LinExpr::of(vp[size_t(t) + 1], 1.0)
                           .add(vp[size_t(t)], -1.0)
                           .add(vru[size_t(t) + 1], 1.0)
                           .add(vrd[size_t(t)], 1.0);
    up.constant = -gen.ramp_up;
    prog.add_inequality(std::move(up), "rup" + std::to_string(t));
    socp::LinExpr dn = socp::LinExpr::of(vp[size_t(t) + 1], -1.0)
                           .add(vp[size_t(t)], 1.0)
                           .add(vrd[size_t(t) + 1], -1.0)
                           .add(vru[size_t(t)], -1.0);
    dn.constant = -gen.ramp_dn;
    prog.add_inequality(std::move(dn), "rdn" + std::to_string(t));
  }

  auto sol = socp::solve(prog);
  if (sol.status != socp::SolveStatus::optimal)
    fail(errc::numerical_failure, "best_response_multi: subproblem not optimal");

  BestResponse br;
  br.p.resize(T);
  br.r_up.resize(T);
  br.r_dn.resize(T);
  for (int t = 0; t < T; ++t) {
    br.p[t] = sol.x[vp[size_t(t)]];
    br.r_up[t] = sol.x[vru[size_t(t)]];
    br.r_dn[t] = sol.x[vrd[size_t(t)]];
    br.profit += profit_terms(gen, pi[t], tau_up[t], tau_dn[t], br.p[t], br.r_up[t], br.r_dn[t]);
  }
  br.kkt_residual = sol.dual_residual;
  return br;
}

EquilibriumReport verify_equilibrium_single(const io::Prepared& prep, int period,
                                            const market::SingleInputs& in,
                                            const market::SingleResult& res) {
  (void)period;
  const auto& cs = prep.cs();
  EquilibriumReport rep;
  double balance = res.p.sum() + in.wind_node.sum() - in.load.sum();
  rep.balance_residual = std::abs(balance);
  rep.alpha_residual = std::abs(res.alpha.sum() - 1.0);
  for (size_t g = 0; g < cs.generators.size(); ++g) {
    const auto& gen = cs.generators[g];
    double pi = res.lmp[gen.node];
    double tau_up = res.sol.dual_of("re_up[" + gen.id + "]");
    double tau_dn = res.sol.dual_of("re_dn[" + gen.id + "]");
    double dispatched = profit_terms(gen, pi, tau_up, tau_dn, res.p[int(g)], res.r_up[int(g)],
                                     res.r_dn[int(g)]);
    auto br = best_response_single(gen, pi, tau_up, tau_dn);
    GeneratorEquilibrium ge;
    ge.id = gen.id;
    ge.dispatched_profit = dispatched;
    ge.best_profit = br.profit;
    ge.rel_gap = (br.profit - dispatched) / std::max(1.0, std::abs(br.profit));
    rep.max_rel_gap = std::max(rep.max_rel_gap, ge.rel_gap);
    rep.generators.push_back(std::move(ge));
  }
  return rep;
}

EquilibriumReport verify_equilibrium_multi(const io::Prepared& prep,
                                           const market::MultiResult& res) {
  const auto& cs = prep.cs();
  const int T = prep.horizon();
  EquilibriumReport rep;
  for (int t = 0; t < T; ++t) {
    double balance =
        res.p.col(t).sum() + prep.wind_node.col(t).sum() - prep.load.col(t).sum();
    rep.balance_residual = std::max(rep.balance_residual, std::abs(balance));
    rep.alpha_residual = std::max(rep.alpha_residual, std::abs(res.alpha.col(t).sum() - 1.0));
  }
  for (size_t g = 0; g < cs.generators.size(); ++g) {
    const auto& gen = cs.generators[g];
    Eigen::VectorXd pi(T), tau_up(T), tau_dn(T);
    for (int t = 0; t < T; ++t) {
      pi[t] = res.lmp(gen.node, t);
      tau_up[t] = res.sol.dual_of("re_up[" + gen.id + "," + std::to_string(t) + "]");
      tau_dn[t] = res.sol.dual_of("re_dn[" + gen.id + "," + std::to_string(t) + "]");
    }
    double dispatched = 0.0;
    for (int t = 0; t < T; ++t)
      dispatched += profit_terms(gen, pi[t], tau_up[t], tau_dn[t], res.p(int(g), t),
                                 res.r_up(int(g), t), res.r_dn(int(g), t));
    auto br = best_response_multi(gen, pi, tau_up, tau_dn);
    GeneratorEquilibrium ge;
    ge.id = gen.id;
    ge.dispatched_profit = dispatched;
    ge.best_profit = br.profit;
    ge.rel_gap = (br.profit - dispatched) / std::max(1.0, std::abs(br.profit));
    rep.max_rel_gap = std::max(rep.max_rel_gap, ge.rel_gap);
    rep.generators.push_back(std::move(ge));
  }
  return rep;
}

const LmeEntry& LmeReport::at(const std::string& node, int period) const {
  for (const auto& e : entries)
    if (e.node == node && e.period == period) return e;
  fail(errc::index_mismatch, "lme: no entry for " + node);
}

namespace {

LmeReport lme_impl(const io::Prepared& prep, const Eigen::MatrixXd& p, const Eigen::MatrixXd& r_up,
                   const Eigen::MatrixXd& r_dn, const Eigen::MatrixXd& lmp) {
  const auto& cs = prep.cs();
  const int T = int(p.cols());
  LmeReport rep;
  for (int t = 0; t < T; ++t) {
    // System marginal set: strictly inside the band net of reserves.
    std::vector<int> marginal;
    for (size_t g = 0; g < cs.generators.size(); ++g) {
      const auto& gen = cs.generators[g];
      double tol = 1e-4 * std::max(1.0, gen.p_max);
      bool upper_slack = p(int(g), t) + r_up(int(g), t) < gen.p_max - tol;
      bool lower_slack = p(int(g), t) - r_dn(int(g), t) > gen.p_min + tol;
      if (upper_slack && lower_slack) marginal.push_back(int(g));
    }
    for (size_t i = 0; i < cs.nodes.size(); ++i) {
      LmeEntry e;
      e.node = cs.nodes[i].id;
      e.period = t;
      double wsum = 0.0, esum = 0.0;
      for (int g : marginal) {
        if (cs.generators[size_t(g)].node != int(i)) continue;
        double w = std::max(p(g, t), 1e-6);
        wsum += w;
        esum += w * cs.generators[size_t(g)].emission_kg_per_kwh;
        e.marginal_units.push_back(cs.generators[size_t(g)].id);
      }
      if (wsum == 0.0) {
        // No local marginal unit: match the system marginal unit pricing this
        // node (its marginal cost equals the nodal price away from bounds).
        for (int g : marginal) {
          const auto& gen = cs.generators[size_t(g)];
          double mc = gen.c1 + 2 * gen.c2 * p(g, t);
          if (std::abs(mc - lmp(int(i), t)) <= 1e-3 * std::max(1.0, std::abs(mc))) {
            double w = std::max(p(g, t), 1e-6);
            wsum += w;
            esum += w * gen.emission_kg_per_kwh;
            e.marginal_units.push_back(gen.id);
          }
        }
      }
      if (wsum > 0.0) {
        e.lme_kg_per_kwh = esum / wsum;
      } else {
        e.lme_kg_per_kwh = 0.0;
        e.no_marginal_unit = true;
      }
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

}  // namespace

LmeReport lme_single(const io::Prepared& prep, const market::SingleResult& res) {
  return lme_impl(prep, res.p, res.r_up, res.r_dn, res.lmp);
}

LmeReport lme_multi(const io::Prepared& prep, const market::MultiResult& res) {
  return lme_impl(prep, res.p, res.r_up, res.r_dn, res.lmp);
}

// ---------------------------------------------------------------------------
// Monte-Carlo validation
// ---------------------------------------------------------------------------

namespace {

struct RateCounter {
  std::string name;
  std::int64_t hits = 0;
};

ValidationReport finish(std::vector<RateCounter> counters, std::int64_t n) {
  ValidationReport rep;
  for (auto& c : counters) {
    ViolationRow row;
    row.constraint = std::move(c.name);
    row.violations = c.hits;
    row.samples = n;
    row.rate = n > 0 ? double(c.hits) / double(n) : 0.0;
    auto [lo, hi] = stats::wilson_interval(c.hits, n);
    row.wilson_lo = lo;
    row.wilson_hi = hi;
    rep.max_rate = std::max(rep.max_rate, row.rate);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace

ValidationReport monte_carlo_validate_single(const io::Prepared& prep, int period,
                                             const market::SingleInputs& in,
                                             const market::SingleResult& res, int n_samples,
                                             std::uint64_t seed) {
  const auto& cs = prep.cs();
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const int nf = int(cs.wind_farms.size());
  const auto& sens = prep.sens[size_t(period)];

  std::vector<RateCounter> counters;
  for (int g = 0; g < ng; ++g) counters.push_back({"re_up[" + cs.generators[size_t(g)].id + "]"});
  for (int g = 0; g < ng; ++g) counters.push_back({"re_dn[" + cs.generators[size_t(g)].id + "]"});
  for (int e = 0; e < ne; ++e) counters.push_back({"fmax[" + cs.edges[size_t(e)].id + "]"});
  for (int e = 0; e < ne; ++e) counters.push_back({"fmin[" + cs.edges[size_t(e)].id + "]"});

  if (prep.ambient.dim() == 0 || nf == 0) return finish(std::move(counters), n_samples);

  stats::GaussianSource src(seed);
  stats::MvnSampler sampler(prep.ambient.sigma_varsigma);

  Eigen::VectorXd gen_alpha_ptdf(ne);
  Eigen::MatrixXd farm_ptdf(ne, nf);
  for (int e = 0; e < ne; ++e) {
    double acc = 0.0;
    for (int g = 0; g < ng; ++g)
      acc += prep.ptdf.S(e, cs.generators[size_t(g)].node) * res.alpha[g];
    gen_alpha_ptdf[e] = acc;
    for (int k = 0; k < nf; ++k) farm_ptdf(e, k) = prep.ptdf.S(e, cs.wind_farms[size_t(k)].node);
  }

  const double tol = 1e-5;
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd vs = sampler.draw(src);
    Eigen::VectorXd omega = sens.gamma_w.transpose() * vs;  // per-farm error, MW
    double Omega = omega.sum();
    for (int g = 0; g < ng; ++g) {
      double adj = -res.alpha[g] * Omega;
      if (adj > res.r_up[g] + tol) ++counters[size_t(g)].hits;
      if (-adj > res.r_dn[g] + tol) ++counters[size_t(ng + g)].hits;
    }
    for (int e = 0; e < ne; ++e) {
      double dev = 0.0;
      for (int k = 0; k < nf; ++k) dev += (farm_ptdf(e, k) - gen_alpha_ptdf[e]) * omega[k];
      double xi = sens.gamma_f.col(e).dot(vs);
      double f_real = res.flows[e] + dev;
      double cap = in.rating[e];
      if (f_real > cap + xi + tol) ++counters[size_t(2 * ng + e)].hits;
      if (f_real < -(cap + xi) - tol) ++counters[size_t(2 * ng + ne + e)].hits;
    }
  }
  return finish(std::move(counters), n_samples);
}

ValidationReport monte_carlo_validate_multi(const io::Prepared& prep,
                                            const market::MultiPeriodConfig& cfg,
                                            const market::MultiResult& res, int n_samples,
                                            std::uint64_t seed, double fine_dt_s) {
  const auto& cs = prep.cs();
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const int nf = int(cs.wind_farms.size());
  const int T = prep.horizon();

  std::vector<RateCounter> counters;
  auto cid = [&](const std::string& b, const std::string& id, int t) {
    return b + "[" + id + "," + std::to_string(t) + "]";
  };
  int base_re = 0;
  for (int t = 0; t < T; ++t)
    for (int g = 0; g < ng; ++g) {
      counters.push_back({cid("re_up", cs.generators[size_t(g)].id, t)});
      counters.push_back({cid("re_dn", cs.generators[size_t(g)].id, t)});
    }
  int base_rth = int(counters.size());
  std::vector<std::pair<int, int>> rth_rows;  // (edge, t)
  bool stochastic = cfg.mode == market::RatingMode::cc_dlr;
  if (stochastic) {
    for (int e = 0; e < ne; ++e) {
      if (!prep.edge_dlr[size_t(e)]) continue;
      for (int t = 0; t < T; ++t) {
        counters.push_back({cid("rth", cs.edges[size_t(e)].id, t)});
        rth_rows.emplace_back(e, t);
      }
    }
  }
  int base_temp = int(counters.size());
  std::vector<int> temp_edges;
  for (int e = 0; e < ne; ++e) {
    if (!prep.edge_dlr[size_t(e)]) continue;
    for (int j = 1; j <= T; ++j)
      counters.push_back({cid("temp", cs.edges[size_t(e)].id, j)});
    temp_edges.push_back(e);
  }

  if (prep.ambient.dim() == 0) return finish(std::move(counters), n_samples);

  stats::GaussianSource src(seed);
  stats::MvnSampler sampler(prep.ambient.sigma_varsigma);
  const double tol = 1e-5;

  Eigen::MatrixXd farm_ptdf(ne, nf);
  for (int e = 0; e < ne; ++e)
    for (int k = 0; k < nf; ++k) farm_ptdf(e, k) = prep.ptdf.S(e, cs.wind_farms[size_t(k)].node);

  for (int s = 0; s < n_samples; ++s) {
    std::vector<Eigen::VectorXd> vs(static_cast<size_t>(T));
    std::vector<Eigen::VectorXd> omega(static_cast<size_t>(T));
    std::vector<double> Omega(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
      vs[size_t(t)] = sampler.draw(src);
      omega[size_t(t)] = prep.sens[size_t(t)].gamma_w.transpose() * vs[size_t(t)];
      Omega[size_t(t)] = omega[size_t(t)].sum();
    }

    int c = base_re;
    for (int t = 0; t < T; ++t)
      for (int g = 0; g < ng; ++g) {
        double adj = -res.alpha(g, t) * Omega[size_t(t)];
        if (adj > res.r_up(g, t) + tol) ++counters[size_t(c)].hits;
        if (-adj > res.r_dn(g, t) + tol) ++counters[size_t(c) + 1].hits;
        c += 2;
      }

    // Linear thermal-reserve recursion.
    if (stochastic) {
      for (size_t r = 0; r < rth_rows.size(); ++r) {
        auto [e, t] = rth_rows[r];
        const auto& kap = res.kappas.k[size_t(e)][size_t(t)];
        double alpha_ptdf = 0.0;
        for (int g = 0; g < ng; ++g)
          alpha_ptdf += prep.ptdf.S(e, cs.generators[size_t(g)].node) * res.alpha(g, t);
        double dev = 0.0;
        for (int k = 0; k < nf; ++k)
          dev += (farm_ptdf(e, k) - alpha_ptdf) * omega[size_t(t)][k];
        Eigen::VectorXd g_site = market::parameter_error_direction(prep, res.kappas, e, t);
        int off = prep.ambient.block(cs.edges[size_t(e)].site);
        double param_dev = g_site.dot(vs[size_t(t)].segment(off, uncert::kVarsPerSite));
        double z = kap.c * dev + param_dev;
        double lhs = kap.b * res.r_th(e, t) + z;
        if (res.r_th(e, t + 1) < lhs - tol) ++counters[size_t(base_rth) + r].hits;
      }
    }

    // Nonlinear re-simulation through the transient integrator.
    int row = base_temp;
    for (int e : temp_edges) {
      const auto& edge = cs.edges[size_t(e)];
      int off = prep.ambient.block(edge.site);
      std::vector<thermal::WeatherSample> weather(static_cast<size_t>(T));
      std::vector<double> flows(static_cast<size_t>(T));
      double alpha_ptdf = 0.0;
      for (int t = 0; t < T; ++t) {
        const auto& w = prep.env[size_t(t)][size_t(e)]->weather;
        thermal::WeatherSample realized = w;
        realized.wind_speed_m_s =
            std::max(0.0, w.wind_speed_m_s + vs[size_t(t)][off]);
        realized.wind_dir_deg = w.wind_dir_deg + vs[size_t(t)][off + 1];
        realized.ambient_temp_C = w.ambient_temp_C + vs[size_t(t)][off + 2];
        weather[size_t(t)] = realized;
        alpha_ptdf = 0.0;
        for (int g = 0; g < ng; ++g)
          alpha_ptdf += prep.ptdf.S(e, cs.generators[size_t(g)].node) * res.alpha(g, t);
        double dev = 0.0;
        for (int k = 0; k < nf; ++k)
          dev += (farm_ptdf(e, k) - alpha_ptdf) * omega[size_t(t)][k];
        flows[size_t(t)] = res.flows(e, t) + dev;
      }
      auto temps = thermal::integrate_transient(prep.env[0][size_t(e)]->spec, weather, flows,
                                                prep.t_init[size_t(e)], cs.period_s, fine_dt_s);
      double tmax = prep.env[0][size_t(e)]->spec.max_temp_C;
      for (int j = 1; j <= T; ++j) {
        if (temps[size_t(j)] > tmax + tol) ++counters[size_t(row)].hits;
        ++row;
      }
      row -= T;
      row += T;
    }
  }
  return finish(std::move(counters), n_samples);
}

// ---------------------------------------------------------------------------
// Stationarity residuals
// ---------------------------------------------------------------------------

namespace {

double scaled(double residual, std::initializer_list<double> terms) {
  double scale = 1.0;
  for (double t : terms) scale = std::max(scale, std::abs(t));
  return std::abs(residual) / scale;
}

}  // namespace

StationarityReport stationarity_single(const io::Prepared& prep,
                                       const market::SinglePeriodConfig& cfg,
                                       const market::SingleInputs& in,
                                       const market::SingleResult& res) {
  const auto& cs = prep.cs();
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const double delta = res.delta;
  double sigma_Omega = in.jc ? in.jc->sigma_Omega : 0.0;
  double sqrt_sO = std::sqrt(std::max(0.0, sigma_Omega));

  StationarityReport rep;
  auto push = [&](const std::string& name, double r) {
    rep.residuals.emplace_back(name, r);
    rep.max_scaled_residual = std::max(rep.max_scaled_residual, r);
  };

  double lam_bal = res.sol.dual_of("bal");
  double lam_alpha = res.sol.dual_of("alpha_sum");

  for (int g = 0; g < ng; ++g) {
    const auto& gen = cs.generators[size_t(g)];
    double lp_up = res.sol.dual_of("pmax[" + gen.id + "]");
    double lp_dn = res.sol.dual_of("pmin[" + gen.id + "]");
    double lre_up = res.sol.dual_of("re_up[" + gen.id + "]");
    double lre_dn = res.sol.dual_of("re_dn[" + gen.id + "]");

    double cong = 0.0;
    for (int e = 0; e < ne; ++e) {
      double lf_up = res.sol.dual_of("fmax[" + cs.edges[size_t(e)].id + "]");
      double lf_dn = res.sol.dual_of("fmin[" + cs.edges[size_t(e)].id + "]");
      cong += (lf_up - lf_dn) * prep.ptdf.S(e, gen.node);
    }
    double mc = gen.c1 + 2 * gen.c2 * res.p[g];
    double r_p = mc + lp_up - lp_dn - lam_bal + cong;
    push("p[" + gen.id + "]", scaled(r_p, {mc, lp_up, lp_dn, lam_bal, cong}));

    double delivery = 0.0;
    if (cfg.mode == market::RatingMode::cc_dlr) {
      for (int e = 0; e < ne; ++e) {
        const std::string& eid = cs.edges[size_t(e)].id;
        double lf_up = res.sol.dual_of("fmax[" + eid + "]");
        double lf_dn = res.sol.dual_of("fmin[" + eid + "]");
        if (lf_up > 1e-12)
          delivery +=
              lf_up * delta * market::flow_cone_alpha_gradient(in, cfg, e, true, res.alpha)[g];
        if (lf_dn > 1e-12)
          delivery +=
              lf_dn * delta * market::flow_cone_alpha_gradient(in, cfg, e, false, res.alpha)[g];
      }
    }
    double quad = 2 * gen.c2 * sigma_Omega * res.alpha[g];
    double resv = (lre_up + lre_dn) * sqrt_sO * delta;
    double ann = res.sol.dual_of("alpha_nn[" + gen.id + "]");
    double r_a = delivery + quad + resv - lam_alpha - ann;
    push("alpha[" + gen.id + "]", scaled(r_a, {delivery, quad, resv, lam_alpha, ann}));

    push("r_up[" + gen.id + "]", scaled(lp_up - lre_up, {lp_up, lre_up}));
    push("r_dn[" + gen.id + "]", scaled(lp_dn - lre_dn, {lp_dn, lre_dn}));
  }
  return rep;
}

StationarityReport stationarity_multi(const io::Prepared& prep,
                                      const market::MultiPeriodConfig& cfg,
                                      const market::MultiResult& res) {
  const auto& cs = prep.cs();
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const int T = prep.horizon();
  const double delta = res.delta;
  const bool thermal = cfg.mode != market::RatingMode::slr;
  const bool stochastic = cfg.mode == market::RatingMode::cc_dlr;

  StationarityReport rep;
  auto push = [&](const std::string& name, double r) {
    rep.residuals.emplace_back(name, r);
    rep.max_scaled_residual = std::max(rep.max_scaled_residual, r);
  };
  auto dual0 = [&](const std::string& tag) {
    return res.sol.dual.count(tag) ? res.sol.dual.at(tag) : 0.0;
  };

  for (int t = 0; t < T; ++t) {
    double lam_bal = res.sol.dual_of("bal[" + std::to_string(t) + "]");
    double lam_alpha = res.sol.dual_of("alpha_sum[" + std::to_string(t) + "]");
    double sigma_Omega = prep.jc[size_t(t)].sigma_Omega;
    double sqrt_sO = std::sqrt(std::max(0.0, sigma_Omega));

    Eigen::VectorXd delivery = Eigen::VectorXd::Zero(ng);
    if (stochastic) {
      for (int e = 0; e < ne; ++e) {
        const auto& eid = cs.edges[size_t(e)].id;
        if (thermal && prep.edge_dlr[size_t(e)]) {
          double lam = dual0(idx("rth", eid, t));
          if (lam > 1e-12)
            delivery += lam * delta *
                        market::thermal_cone_alpha_gradient(prep, cfg, res.kappas, e, t,
                                                            res.alpha.col(t));
        } else if (res.sol.cone_dual.count(idx("fmax", eid, t))) {
          const auto& jc = prep.jc[size_t(t)];
          Eigen::MatrixXd sq = stats::psd_sqrt(jc.sigma_omega);
          Eigen::VectorXd farm(jc.n_farms()), gens(ng);
          for (int k = 0; k < farm.size(); ++k)
            farm[k] = prep.ptdf.S(e, cs.wind_farms[size_t(k)].node);
          for (int g = 0; g < ng; ++g) gens[g] = prep.ptdf.S(e, cs.generators[size_t(g)].node);
          Eigen::VectorXd ones = Eigen::VectorXd::Ones(jc.n_farms());
          for (bool upper : {true, false}) {
            double lam = dual0(idx(upper ? "fmax" : "fmin", eid, t));
            if (lam <= 1e-12) continue;
            Eigen::VectorXd u = sq * (farm - ones * gens.dot(res.alpha.col(t)));
            double norm = u.norm();
            if (norm < 1e-14) continue;
            delivery += lam * delta * (-gens) * (u.dot(sq * ones) / norm);
          }
        }
      }
    }

    for (int g = 0; g < ng; ++g) {
      const auto& gen = cs.generators[size_t(g)];
      double lp_up = res.sol.dual_of(idx("pmax", gen.id, t));
      double lp_dn = res.sol.dual_of(idx("pmin", gen.id, t));
      double lre_up = res.sol.dual_of(idx("re_up", gen.id, t));
      double lre_dn = res.sol.dual_of(idx("re_dn", gen.id, t));
      double ru_t = t + 1 < T ? dual0(idx("ramp_up", gen.id, t)) : 0.0;
      double rd_t = t + 1 < T ? dual0(idx("ramp_dn", gen.id, t)) : 0.0;
      double ru_p = t > 0 ? dual0(idx("ramp_up", gen.id, t - 1)) : 0.0;
      double rd_p = t > 0 ? dual0(idx("ramp_dn", gen.id, t - 1)) : 0.0;

      double cong = 0.0;
      for (int e = 0; e < ne; ++e)
        cong += prep.ptdf.S(e, gen.node) * res.sol.dual_of(idx("flowdef", cs.edges[size_t(e)].id, t));

      double mc = gen.c1 + 2 * gen.c2 * res.p(g, t);
      double r_p = mc - lam_bal + lp_up - lp_dn - ru_t + rd_t + ru_p - rd_p + cong;
      push(idx("p", gen.id, t), scaled(r_p, {mc, lam_bal, lp_up, lp_dn, ru_t, rd_t, ru_p, rd_p, cong}));

      double quad = 2 * gen.c2 * sigma_Omega * res.alpha(g, t);
      double resv = (lre_up + lre_dn) * sqrt_sO * delta;
      double ann = res.sol.dual_of(idx("alpha_nn", gen.id, t));
      double r_a = quad + resv - lam_alpha + delivery[g] - ann;
      push(idx("alpha", gen.id, t), scaled(r_a, {quad, resv, lam_alpha, delivery[g], ann}));

      push(idx("r_up", gen.id, t), scaled(lp_up + ru_p - lre_up, {lp_up, ru_p, lre_up}));
      push(idx("r_dn", gen.id, t), scaled(lp_dn + rd_p - lre_dn, {lp_dn, rd_p, lre_dn}));
    }

    // Flow and temperature rows of the thermally modeled edges.
    for (int e = 0; e < ne; ++e) {
      const auto& eid = cs.edges[size_t(e)].id;
      double lam_f = res.sol.dual_of(idx("flowdef", eid, t));
      if (thermal && prep.edge_dlr[size_t(e)]) {
        double kc = res.kappas.k[size_t(e)][size_t(t)].c;
        double lam_T = res.sol.dual_of(idx("trec", eid, t));
        double r_f = -lam_f + kc * lam_T;
        push(idx("f", eid, t), scaled(r_f, {lam_f, kc * lam_T}));
      } else {
        double lf_up = dual0(idx("fmax", eid, t));
        double lf_dn = dual0(idx("fmin", eid, t));
        double r_f = -lam_f + lf_up - lf_dn;
        push(idx("f", eid, t), scaled(r_f, {lam_f, lf_up, lf_dn}));
      }
    }
  }

  if (thermal) {
    for (int e = 0; e < ne; ++e) {
      if (!prep.edge_dlr[size_t(e)]) continue;
      const auto& eid = cs.edges[size_t(e)].id;
      for (int j = 1; j <= T; ++j) {
        double lam_prev = res.sol.dual_of(idx("trec", eid, j - 1));
        double lam_cap = res.sol.dual_of(idx("tcap", eid, j));
        double r;
        if (j < T) {
          double kb = res.kappas.k[size_t(e)][size_t(j)].b;
          double lam_next = res.sol.dual_of(idx("trec", eid, j));
          r = -lam_prev + kb * lam_next + lam_cap;
          push(idx("T", eid, j), scaled(r, {lam_prev, kb * lam_next, lam_cap}));
        } else {
          r = -lam_prev + lam_cap;
          push(idx("T", eid, j), scaled(r, {lam_prev, lam_cap}));
        }
      }
    }
  }
  return rep;
}

}  // namespace dlrm::analysis
