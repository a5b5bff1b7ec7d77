#include "dlrm/market_multi.hpp"

#include <cmath>

#include "dlrm/errors.hpp"
#include "dlrm/stats.hpp"

namespace dlrm::market {

namespace {

std::string idx(const std::string& base, const std::string& id, int t) {
  return base + "[" + id + "," + std::to_string(t) + "]";
}

}  // namespace

double MultiPeriodConfig::delta() const {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    fail(errc::validation_error, "epsilon must lie in (0, 0.5)");
  return stats::normal_quantile(1.0 - epsilon);
}

KappaSet linearize_evolution(const io::Prepared& prep, const LinearizationPoint& point) {
  const auto& cs = prep.cs();
  const int ne = int(cs.edges.size());
  const int T = prep.horizon();
  KappaSet set;
  set.k.resize(size_t(ne));
  for (int e = 0; e < ne; ++e) {
    if (!prep.edge_dlr[size_t(e)]) continue;
    if (int(point.temps[size_t(e)].size()) != T + 1 || int(point.flows[size_t(e)].size()) != T)
      fail(errc::index_mismatch, "linearize_evolution: reference trajectory length mismatch");
    set.k[size_t(e)].resize(size_t(T));
    for (int t = 0; t < T; ++t) {
      const auto& mu = prep.mu[size_t(e)][size_t(t)];
      double Tt = point.temps[size_t(e)][size_t(t)];
      double Tn = point.temps[size_t(e)][size_t(t) + 1];
      double f = point.flows[size_t(e)][size_t(t)];
      double predicted = thermal::step_temperature(mu, Tt, f);
      if (std::abs(predicted - Tn) > 1e-8 * std::max(1.0, std::abs(Tn)))
        fail(errc::validation_error,
             "linearize_evolution: reference point violates the step map at " +
                 cs.edges[size_t(e)].id + ",t=" + std::to_string(t));
      Kappa k;
      k.b = mu.mu_b;
      k.c = 2.0 * mu.mu_c * f + 4.0 * mu.mu_d * f * f * f;
      k.mu << 1.0, Tt, f * f, f * f * f * f;
      k.a = Tn - k.b * Tt - k.c * f -
            (k.mu[0] * mu.mu_a + k.mu[1] * mu.mu_b + k.mu[2] * mu.mu_c + k.mu[3] * mu.mu_d);
      set.k[size_t(e)][size_t(t)] = k;
    }
  }
  return set;
}

Eigen::VectorXd parameter_error_direction(const io::Prepared& prep, const KappaSet& kap, int edge,
                                          int t) {
  const auto& edge_ref = prep.cs().edges[size_t(edge)];
  int off = prep.ambient.block(edge_ref.site);
  const Eigen::MatrixXd& gm = prep.sens[size_t(t)].gamma_mu[size_t(edge)];
  return gm.middleRows(off, uncert::kVarsPerSite) * kap.k[size_t(edge)][size_t(t)].mu;
}

namespace {

// Shared per-period cone algebra.
struct PeriodCones {
  Eigen::MatrixXd sqrt_sigma;   // n_farms^2
  Eigen::MatrixXd inv_sigma;
  Eigen::VectorXd farm_ptdf_row(const io::Prepared& prep, int edge) const {
    const auto& cs = prep.cs();
    Eigen::VectorXd v(int(cs.wind_farms.size()));
    for (int k = 0; k < v.size(); ++k) v[k] = prep.ptdf.S(edge, cs.wind_farms[size_t(k)].node);
    return v;
  }
};

Eigen::VectorXd gen_ptdf_row(const io::Prepared& prep, int edge) {
  const auto& cs = prep.cs();
  Eigen::VectorXd v(int(cs.generators.size()));
  for (int g = 0; g < v.size(); ++g) v[g] = prep.ptdf.S(edge, cs.generators[size_t(g)].node);
  return v;
}

struct ThermalConeData {
  Eigen::VectorXd u_const;   // rows at alpha = 0 (without delta)
  Eigen::VectorXd u_alpha;   // row scale multiplying (gen_ptdf' alpha)
  double tail = 0.0;
  double kappa_c = 0.0;
  Eigen::VectorXd btilde;
  double intrinsic = 0.0;
};

ThermalConeData thermal_cone_data(const io::Prepared& prep, const KappaSet& kap,
                                  const PeriodCones& pc, int edge, int t) {
  const auto& jc = prep.jc[size_t(t)];
  ThermalConeData cd;
  const Kappa& k = kap.k[size_t(edge)][size_t(t)];
  cd.kappa_c = k.c;
  Eigen::VectorXd g_site = parameter_error_direction(prep, kap, edge, t);
  cd.btilde = jc.b_omega_site[size_t(edge)] * g_site;
  cd.intrinsic = g_site.dot(jc.sigma_site[size_t(edge)] * g_site);
  double induced = jc.n_farms() > 0 ? cd.btilde.dot(pc.inv_sigma * cd.btilde) : 0.0;
  double tail_sq = cd.intrinsic - induced;
  if (tail_sq < -1e-9)
    fail(errc::dominance_violated,
         "thermal reserve cone " + prep.cs().edges[size_t(edge)].id + ",t=" + std::to_string(t) +
             ": wind-induced parameter variance exceeds intrinsic");
  cd.tail = std::sqrt(std::max(0.0, tail_sq));
  Eigen::VectorXd farm = pc.farm_ptdf_row(prep, edge);
  cd.u_const = cd.kappa_c * (pc.sqrt_sigma * farm);
  if (jc.n_farms() > 0) cd.u_const += pc.sqrt_sigma * (pc.inv_sigma * cd.btilde);
  cd.u_alpha = cd.kappa_c * (pc.sqrt_sigma * Eigen::VectorXd::Ones(jc.n_farms()));
  return cd;
}

}  // namespace

Eigen::VectorXd thermal_cone_alpha_gradient(const io::Prepared& prep,
                                            const MultiPeriodConfig& cfg, const KappaSet& kap,
                                            int edge, int t, const Eigen::VectorXd& alpha) {
  (void)cfg;
  const auto& jc = prep.jc[size_t(t)];
  PeriodCones pc;
  pc.sqrt_sigma = stats::psd_sqrt(jc.sigma_omega);
  pc.inv_sigma = uncert::sigma_omega_inverse(jc);
  ThermalConeData cd = thermal_cone_data(prep, kap, pc, edge, t);
  Eigen::VectorXd gens = gen_ptdf_row(prep, edge);
  Eigen::VectorXd u = cd.u_const - cd.u_alpha * gens.dot(alpha);
  double norm = std::hypot(u.norm(), cd.tail);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(gens.size());
  if (norm < 1e-14) return grad;
  // d||u||/d alpha_i = -S_gen_i * kappa_c * u' (sqrt_sigma * 1) / ||u||.
  double scale = u.dot(cd.u_alpha) / norm;
  return -gens * scale;
}

socp::ConicProgram build_multi(const io::Prepared& prep, const MultiPeriodConfig& cfg,
                               const KappaSet& kap, MultiFlowModel flow_model) {
  const auto& cs = prep.cs();
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const int T = prep.horizon();
  const double delta = cfg.delta();
  const bool stochastic = cfg.mode == RatingMode::cc_dlr;
  const bool thermal = flow_model == MultiFlowModel::thermal;

  socp::ConicProgram prog;
  auto var2 = [&](std::vector<std::vector<int>>& store, const std::string& base,
                  const std::string& id, int t) {
    int v = prog.add_variable(idx(base, id, t));
    store[size_t(t)].push_back(v);
    return v;
  };
  (void)var2;

  const auto st = static_cast<size_t>(T);
  std::vector<std::vector<int>> vp(st), va(st), vru(st), vrd(st), vf(st);
  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < ng; ++g) {
      const auto& id = cs.generators[size_t(g)].id;
      vp[size_t(t)].push_back(prog.add_variable(idx("p", id, t)));
      va[size_t(t)].push_back(prog.add_variable(idx("alpha", id, t)));
      vru[size_t(t)].push_back(prog.add_variable(idx("r_up", id, t)));
      vrd[size_t(t)].push_back(prog.add_variable(idx("r_dn", id, t)));
    }
    for (int e = 0; e < ne; ++e)
      vf[size_t(t)].push_back(prog.add_variable(idx("f", cs.edges[size_t(e)].id, t)));
  }
  // Temperature boundaries 1..T and thermal reserves for modeled edges.
  std::vector<std::vector<int>> vT(static_cast<size_t>(ne)), vRth(static_cast<size_t>(ne));
  if (thermal) {
    for (int e = 0; e < ne; ++e) {
      if (!prep.edge_dlr[size_t(e)]) continue;
      for (int j = 1; j <= T; ++j) {
        vT[size_t(e)].push_back(prog.add_variable(idx("T", cs.edges[size_t(e)].id, j)));
        if (stochastic)
          vRth[size_t(e)].push_back(prog.add_variable(idx("r_th", cs.edges[size_t(e)].id, j)));
      }
    }
  }

  for (int t = 0; t < T; ++t) {
    double sigma_Omega = prep.jc[size_t(t)].sigma_Omega;
    double sqrt_sO = std::sqrt(std::max(0.0, sigma_Omega));

    for (int g = 0; g < ng; ++g) {
      const auto& gen = cs.generators[size_t(g)];
      prog.add_objective_term(vp[size_t(t)][size_t(g)], gen.c1);
      double curv_p = gen.c2 > 0 ? gen.c2 : kTieBreak;
      prog.add_quadratic_epigraph(vp[size_t(t)][size_t(g)], curv_p, 1.0, idx("epi_p", gen.id, t));
      prog.add_quadratic_epigraph(va[size_t(t)][size_t(g)], gen.c2 * sigma_Omega + kTieBreak, 1.0,
                                  idx("epi_a", gen.id, t));
      prog.add_objective_term(vru[size_t(t)][size_t(g)], kTieBreak);
      prog.add_objective_term(vrd[size_t(t)][size_t(g)], kTieBreak);
    }

    socp::LinExpr bal;
    bal.constant = prep.load.col(t).sum() - prep.wind_node.col(t).sum();
    for (int g = 0; g < ng; ++g) bal.add(vp[size_t(t)][size_t(g)], -1.0);
    prog.add_equality(std::move(bal), "bal[" + std::to_string(t) + "]");

    socp::LinExpr asum;
    asum.constant = 1.0;
    for (int g = 0; g < ng; ++g) asum.add(va[size_t(t)][size_t(g)], -1.0);
    prog.add_equality(std::move(asum), "alpha_sum[" + std::to_string(t) + "]");

    for (int g = 0; g < ng; ++g) {
      const auto& gen = cs.generators[size_t(g)];
      socp::LinExpr pmax = socp::LinExpr::of(vp[size_t(t)][size_t(g)], 1.0)
                               .add(vru[size_t(t)][size_t(g)], 1.0);
      pmax.constant = -gen.p_max;
      prog.add_inequality(std::move(pmax), idx("pmax", gen.id, t));

      socp::LinExpr pmin = socp::LinExpr::of(vp[size_t(t)][size_t(g)], -1.0)
                               .add(vrd[size_t(t)][size_t(g)], 1.0);
      pmin.constant = gen.p_min;
      prog.add_inequality(std::move(pmin), idx("pmin", gen.id, t));

      prog.add_inequality(socp::LinExpr::of(va[size_t(t)][size_t(g)], sqrt_sO * delta)
                              .add(vru[size_t(t)][size_t(g)], -1.0),
                          idx("re_up", gen.id, t));
      prog.add_inequality(socp::LinExpr::of(va[size_t(t)][size_t(g)], sqrt_sO * delta)
                              .add(vrd[size_t(t)][size_t(g)], -1.0),
                          idx("re_dn", gen.id, t));
      prog.add_inequality(socp::LinExpr::of(va[size_t(t)][size_t(g)], -1.0),
                          idx("alpha_nn", gen.id, t));
    }

    // Flow definition keeps the tagged dual aligned with the congestion price.
    for (int e = 0; e < ne; ++e) {
      socp::LinExpr def;
      double c = 0.0;
      for (int i = 0; i < int(cs.nodes.size()); ++i)
        c += prep.ptdf.S(e, i) * (prep.wind_node(i, t) - prep.load(i, t));
      def.constant = c;
      for (int g = 0; g < ng; ++g)
        def.add(vp[size_t(t)][size_t(g)], prep.ptdf.S(e, cs.generators[size_t(g)].node));
      def.add(vf[size_t(t)][size_t(e)], -1.0);
      prog.add_equality(std::move(def), idx("flowdef", cs.edges[size_t(e)].id, t));
    }
  }

  // Ramping across consecutive periods.
  for (int t = 0; t + 1 < T; ++t) {
    for (int g = 0; g < ng; ++g) {
      const auto& gen = cs.generators[size_t(g)];
      socp::LinExpr up = socp::LinExpr::of(vp[size_t(t) + 1][size_t(g)], 1.0)
                             .add(vp[size_t(t)][size_t(g)], -1.0)
                             .add(vru[size_t(t) + 1][size_t(g)], 1.0)
                             .add(vrd[size_t(t)][size_t(g)], 1.0);
      up.constant = -gen.ramp_up;
      prog.add_inequality(std::move(up), idx("ramp_up", gen.id, t));

      socp::LinExpr dn = socp::LinExpr::of(vp[size_t(t) + 1][size_t(g)], -1.0)
                             .add(vp[size_t(t)][size_t(g)], 1.0)
                             .add(vrd[size_t(t) + 1][size_t(g)], -1.0)
                             .add(vru[size_t(t)][size_t(g)], -1.0);
      dn.constant = -gen.ramp_dn;
      prog.add_inequality(std::move(dn), idx("ramp_dn", gen.id, t));
    }
  }

  // Flow limits / thermal recursion.
  std::vector<PeriodCones> pcs;
  if (stochastic) {
    pcs.resize(size_t(T));
    for (int t = 0; t < T; ++t) {
      pcs[size_t(t)].sqrt_sigma = stats::psd_sqrt(prep.jc[size_t(t)].sigma_omega);
      pcs[size_t(t)].inv_sigma = uncert::sigma_omega_inverse(prep.jc[size_t(t)]);
    }
  }

  for (int e = 0; e < ne; ++e) {
    const auto& eid = cs.edges[size_t(e)].id;
    bool edge_thermal = thermal && prep.edge_dlr[size_t(e)];

    if (!edge_thermal) {
      // Box limits, with the recourse cone in the chance-constrained mode.
      for (int t = 0; t < T; ++t) {
        double cap = flow_model == MultiFlowModel::static_box ? prep.rating_static(e, t)
                     : flow_model == MultiFlowModel::reference_box
                         ? prep.rating_dyn(e, t)
                         : (prep.edge_dlr[size_t(e)] ? prep.rating_dyn(e, t)
                                                     : prep.rating_static(e, t));
        const auto& jc = prep.jc[size_t(t)];
        bool cone = stochastic && jc.n_farms() > 0;
        double u_mag = 0.0;
        Eigen::VectorXd u_const;
        if (cone) {
          Eigen::VectorXd farm = pcs[size_t(t)].farm_ptdf_row(prep, e);
          u_const = pcs[size_t(t)].sqrt_sigma * farm;
          u_mag = std::max(u_const.cwiseAbs().maxCoeff(),
                           pcs[size_t(t)].sqrt_sigma.cwiseAbs().maxCoeff());
        }
        if (!cone || u_mag < 1e-14) {
          socp::LinExpr up = socp::LinExpr::of(vf[size_t(t)][size_t(e)], 1.0);
          up.constant = -cap;
          prog.add_inequality(std::move(up), idx("fmax", eid, t));
          socp::LinExpr dn = socp::LinExpr::of(vf[size_t(t)][size_t(e)], -1.0);
          dn.constant = -cap;
          prog.add_inequality(std::move(dn), idx("fmin", eid, t));
          continue;
        }
        Eigen::VectorXd gens = gen_ptdf_row(prep, e);
        Eigen::VectorXd u_alpha = pcs[size_t(t)].sqrt_sigma * Eigen::VectorXd::Ones(jc.n_farms());
        auto make = [&](bool upper) {
          socp::SocBlock blk;
          blk.t = socp::LinExpr::of(vf[size_t(t)][size_t(e)], upper ? -1.0 : 1.0);
          blk.t.constant = cap;
          blk.u.resize(size_t(jc.n_farms()));
          for (int r = 0; r < jc.n_farms(); ++r) {
            blk.u[size_t(r)].constant = delta * u_const[r];
            for (int g = 0; g < ng; ++g)
              blk.u[size_t(r)].add(va[size_t(t)][size_t(g)], -delta * u_alpha[r] * gens[g]);
          }
          return blk;
        };
        prog.add_soc(make(true), idx("fmax", eid, t));
        prog.add_soc(make(false), idx("fmin", eid, t));
      }
      continue;
    }

    // Linearized temperature recursion with cap, plus thermal reserve cones in
    // the chance-constrained mode.
    for (int t = 0; t < T; ++t) {
      const Kappa& k = kap.k[size_t(e)][size_t(t)];
      const auto& mu = prep.mu[size_t(e)][size_t(t)];
      double mu_dot = k.mu[0] * mu.mu_a + k.mu[1] * mu.mu_b + k.mu[2] * mu.mu_c + k.mu[3] * mu.mu_d;
      // rhs - T_{t+1} = 0 orientation keeps the tagged dual on the congestion
      // side of the stationarity conditions.
      socp::LinExpr rec;
      rec.constant = k.a + mu_dot;
      if (t == 0)
        rec.constant += k.b * prep.t_init[size_t(e)];
      else
        rec.add(vT[size_t(e)][size_t(t) - 1], k.b);
      rec.add(vf[size_t(t)][size_t(e)], k.c);
      rec.add(vT[size_t(e)][size_t(t)], -1.0);
      prog.add_equality(std::move(rec), idx("trec", eid, t));
    }
    for (int j = 1; j <= T; ++j) {
      socp::LinExpr cap = socp::LinExpr::of(vT[size_t(e)][size_t(j) - 1], 1.0);
      cap.constant = -prep.env[0][size_t(e)]->spec.max_temp_C;
      if (stochastic) cap.add(vRth[size_t(e)][size_t(j) - 1], 1.0);
      prog.add_inequality(std::move(cap), idx("tcap", eid, j));
    }
    if (stochastic) {
      for (int t = 0; t < T; ++t) {
        const Kappa& k = kap.k[size_t(e)][size_t(t)];
        ThermalConeData cd = thermal_cone_data(prep, kap, pcs[size_t(t)], e, t);
        Eigen::VectorXd gens = gen_ptdf_row(prep, e);
        double u_mag = std::max(cd.tail, cd.u_const.size() ? cd.u_const.cwiseAbs().maxCoeff() : 0.0);

        socp::LinExpr margin = socp::LinExpr::of(vRth[size_t(e)][size_t(t)], 1.0);
        if (t > 0) margin.add(vRth[size_t(e)][size_t(t) - 1], -k.b);
        if (u_mag < 1e-14) {
          // Zero uncertainty: the recursion collapses to R_th >= kb * R_th.
          socp::LinExpr lin;
          lin.constant = 0.0;
          if (t > 0) lin.add(vRth[size_t(e)][size_t(t) - 1], k.b);
          lin.add(vRth[size_t(e)][size_t(t)], -1.0);
          prog.add_inequality(std::move(lin), idx("rth", eid, t));
          continue;
        }
        socp::SocBlock blk;
        blk.t = std::move(margin);
        blk.u.resize(size_t(cd.u_const.size()) + 1);
        for (int r = 0; r < cd.u_const.size(); ++r) {
          blk.u[size_t(r)].constant = delta * cd.u_const[r];
          for (int g = 0; g < ng; ++g)
            blk.u[size_t(r)].add(va[size_t(t)][size_t(g)], -delta * cd.u_alpha[r] * gens[g]);
        }
        blk.u.back().constant = delta * cd.tail;
        prog.add_soc(std::move(blk), idx("rth", eid, t));
      }
      // R_th >= 0 at every boundary follows from the recursion, but pin the
      // variables for numerical cleanliness.
      for (int j = 1; j <= T; ++j)
        prog.add_inequality(socp::LinExpr::of(vRth[size_t(e)][size_t(j) - 1], -1.0),
                            idx("rth_nn", eid, j));
    }
  }
  return prog;
}

Eigen::MatrixXd simulate_temperatures(const io::Prepared& prep, const Eigen::MatrixXd& flows) {
  const auto& cs = prep.cs();
  const int ne = int(cs.edges.size());
  const int T = int(flows.cols());
  Eigen::MatrixXd temps =
      Eigen::MatrixXd::Constant(ne, T + 1, std::numeric_limits<double>::quiet_NaN());
  for (int e = 0; e < ne; ++e) {
    if (!prep.edge_dlr[size_t(e)]) continue;
    temps(e, 0) = prep.t_init[size_t(e)];
    for (int t = 0; t < T; ++t)
      temps(e, t + 1) =
          thermal::step_temperature(prep.mu[size_t(e)][size_t(t)], temps(e, t), flows(e, t));
  }
  return temps;
}

namespace {

void price_multi(const io::Prepared& prep, const MultiPeriodConfig& cfg, const KappaSet& kap,
                 MultiFlowModel flow_model, MultiResult& res) {
  const auto& cs = prep.cs();
  const int nn = int(cs.nodes.size());
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const int T = prep.horizon();
  const double delta = res.delta;
  const bool stochastic = cfg.mode == RatingMode::cc_dlr;
  const bool thermal = flow_model == MultiFlowModel::thermal;

  res.lmp.resize(nn, T);
  res.lmp_expanded.resize(nn, T);
  res.lmrp.resize(ng, T);
  res.lmrp_formula.resize(ng, T);

  // Temporal expansion of the flow dual from the temperature-recursion duals:
  //   lambda_f[e,t] = kc_t * lambda_T[e,t]
  //   lambda_T[e,t] = kb_{t+1} lambda_T[e,t+1] + lambda_Tcap[e,t+1]   (forward)
  //   lambda_T[e,t] = (lambda_T[e,t-1] - lambda_Tcap[e,t]) / kb_t     (backward)
  Eigen::MatrixXd lam_f(ne, T), lam_f_exp(ne, T);
  for (int e = 0; e < ne; ++e) {
    const auto& eid = cs.edges[size_t(e)].id;
    bool edge_thermal = thermal && prep.edge_dlr[size_t(e)];
    for (int t = 0; t < T; ++t) {
      lam_f(e, t) = res.sol.dual_of(idx("flowdef", eid, t));
      lam_f_exp(e, t) = lam_f(e, t);
    }
    if (!edge_thermal) continue;
    std::vector<double> lam_T(static_cast<size_t>(T));
    std::vector<double> lam_cap(static_cast<size_t>(T) + 1, 0.0);
    for (int t = 0; t < T; ++t) lam_T[size_t(t)] = res.sol.dual_of(idx("trec", eid, t));
    for (int j = 1; j <= T; ++j) lam_cap[size_t(j)] = res.sol.dual_of(idx("tcap", eid, j));
    for (int t = 0; t < T; ++t) {
      double kc = kap.k[size_t(e)][size_t(t)].c;
      double fwd = std::numeric_limits<double>::quiet_NaN();
      double bwd = std::numeric_limits<double>::quiet_NaN();
      if (t + 1 < T)
        fwd = kap.k[size_t(e)][size_t(t) + 1].b * lam_T[size_t(t) + 1] + lam_cap[size_t(t) + 1];
      else
        fwd = lam_cap[size_t(T)];
      if (t > 0) bwd = (lam_T[size_t(t) - 1] - lam_cap[size_t(t)]) / kap.k[size_t(e)][size_t(t)].b;
      double lam_T_exp = std::isnan(bwd) ? fwd : 0.5 * (fwd + bwd);
      lam_f_exp(e, t) = kc * lam_T_exp;
    }
  }

  for (int t = 0; t < T; ++t) {
    double lam_bal = res.sol.dual_of("bal[" + std::to_string(t) + "]");
    for (int i = 0; i < nn; ++i) {
      double cong = 0.0, cong_exp = 0.0;
      for (int e = 0; e < ne; ++e) {
        cong += prep.ptdf.S(e, i) * lam_f(e, t);
        cong_exp += prep.ptdf.S(e, i) * lam_f_exp(e, t);
      }
      res.lmp(i, t) = lam_bal - cong;
      res.lmp_expanded(i, t) = lam_bal - cong_exp;
    }

    double sigma_Omega = prep.jc[size_t(t)].sigma_Omega;
    double scale = std::sqrt(std::max(0.0, sigma_Omega)) * delta;
    double lam_alpha = res.sol.dual_of("alpha_sum[" + std::to_string(t) + "]");

    // Reserve delivery cost: alpha gradient of every cone the recourse enters.
    Eigen::VectorXd delivery = Eigen::VectorXd::Zero(ng);
    if (stochastic) {
      for (int e = 0; e < ne; ++e) {
        const auto& eid = cs.edges[size_t(e)].id;
        bool edge_thermal = thermal && prep.edge_dlr[size_t(e)];
        if (edge_thermal) {
          double lam = res.sol.dual_of(idx("rth", eid, t));
          if (lam > 1e-12)
            delivery += lam * delta *
                        thermal_cone_alpha_gradient(prep, cfg, kap, e, t, res.alpha.col(t));
        } else if (res.sol.cone_dual.count(idx("fmax", eid, t))) {
          // Static-edge flow cones couple alpha as in the single-period model.
          Eigen::VectorXd gens = gen_ptdf_row(prep, e);
          const auto& jc = prep.jc[size_t(t)];
          Eigen::MatrixXd sq = stats::psd_sqrt(jc.sigma_omega);
          Eigen::VectorXd farm(jc.n_farms());
          for (int k = 0; k < farm.size(); ++k)
            farm[k] = prep.ptdf.S(e, cs.wind_farms[size_t(k)].node);
          Eigen::VectorXd ones = Eigen::VectorXd::Ones(jc.n_farms());
          for (bool upper : {true, false}) {
            double lam = res.sol.dual_of(idx(upper ? "fmax" : "fmin", eid, t));
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
      double r1 = res.sol.dual_of(idx("re_up", gen.id, t)) +
                  res.sol.dual_of(idx("re_dn", gen.id, t));
      res.lmrp(g, t) = r1;
      if (scale < 1e-9) {
        res.lmrp_formula(g, t) = r1;
        continue;
      }
      double bound_dual = res.sol.dual_of(idx("alpha_nn", gen.id, t));
      res.lmrp_formula(g, t) =
          (lam_alpha + bound_dual - 2.0 * gen.c2 * sigma_Omega * res.alpha(g, t) -
           delivery[g]) /
          scale;
      if (std::abs(res.lmrp_formula(g, t) - r1) > 1e-5) res.degenerate_duals = true;
    }
  }
}

}  // namespace

MultiResult solve_multi_at(const io::Prepared& prep, const MultiPeriodConfig& cfg,
                           const KappaSet& kap, const LinearizationPoint& point,
                           const socp::SolverOptions& opts) {
  const auto& cs = prep.cs();
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const int T = prep.horizon();
  const bool stochastic = cfg.mode == RatingMode::cc_dlr;

  MultiFlowModel fm = cfg.mode == RatingMode::slr ? MultiFlowModel::static_box
                                                  : MultiFlowModel::thermal;
  socp::ConicProgram prog = build_multi(prep, cfg, kap, fm);

  MultiResult res;
  res.delta = cfg.delta();
  res.reference = point;
  res.kappas = kap;
  res.sol = socp::solve(prog, opts);
  res.status = res.sol.status;
  if (res.status != socp::SolveStatus::optimal) return res;

  res.p.resize(ng, T);
  res.alpha.resize(ng, T);
  res.r_up.resize(ng, T);
  res.r_dn.resize(ng, T);
  res.flows.resize(ne, T);
  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < ng; ++g) {
      const auto& id = cs.generators[size_t(g)].id;
      res.p(g, t) = res.sol.x[prog.variable(idx("p", id, t))];
      res.alpha(g, t) = res.sol.x[prog.variable(idx("alpha", id, t))];
      res.r_up(g, t) = res.sol.x[prog.variable(idx("r_up", id, t))];
      res.r_dn(g, t) = res.sol.x[prog.variable(idx("r_dn", id, t))];
    }
    for (int e = 0; e < ne; ++e)
      res.flows(e, t) = res.sol.x[prog.variable(idx("f", cs.edges[size_t(e)].id, t))];
  }

  res.objective = 0.0;
  for (int t = 0; t < T; ++t) {
    double sigma_Omega = prep.jc[size_t(t)].sigma_Omega;
    for (int g = 0; g < ng; ++g) {
      const auto& gen = cs.generators[size_t(g)];
      res.objective += gen.c1 * res.p(g, t) + gen.c2 * res.p(g, t) * res.p(g, t) +
                       gen.c2 * sigma_Omega * res.alpha(g, t) * res.alpha(g, t);
    }
  }

  // Temperatures: solver values where modeled, conservative simulation
  // elsewhere; thermal reserves only exist in the chance-constrained mode.
  res.temps = simulate_temperatures(prep, res.flows);
  res.r_th = Eigen::MatrixXd::Zero(ne, T + 1);
  if (fm == MultiFlowModel::thermal) {
    for (int e = 0; e < ne; ++e) {
      if (!prep.edge_dlr[size_t(e)]) continue;
      for (int j = 1; j <= T; ++j) {
        int v = prog.variable(idx("T", cs.edges[size_t(e)].id, j));
        if (v >= 0) res.temps(e, j) = res.sol.x[v];
        if (stochastic) {
          int r = prog.variable(idx("r_th", cs.edges[size_t(e)].id, j));
          if (r >= 0) res.r_th(e, j) = res.sol.x[r];
        }
      }
    }
  }

  price_multi(prep, cfg, kap, fm, res);
  return res;
}

MultiResult successive_linearization(const io::Prepared& prep, const MultiPeriodConfig& cfg,
                                     const socp::SolverOptions& opts) {
  const auto& cs = prep.cs();
  const int ne = int(cs.edges.size());
  const int T = prep.horizon();

  if (cfg.mode == RatingMode::slr) {
    KappaSet empty;
    empty.k.resize(size_t(ne));
    LinearizationPoint none;
    MultiResult res = solve_multi_at(prep, cfg, empty, none, opts);
    res.iterations = 1;
    res.converged = true;
    return res;
  }

  // Reference: deterministic dispatch against steady-state ratings, then
  // simulate the conservative map along those flows.
  MultiPeriodConfig ref_cfg = cfg;
  KappaSet empty;
  empty.k.resize(size_t(ne));
  socp::ConicProgram ref_prog = build_multi(prep, ref_cfg, empty, MultiFlowModel::reference_box);
  socp::ConicSolution ref_sol = socp::solve(ref_prog, opts);
  if (ref_sol.status != socp::SolveStatus::optimal) {
    MultiResult res;
    res.status = ref_sol.status;
    res.sol = std::move(ref_sol);
    return res;
  }
  Eigen::MatrixXd ref_flows(ne, T);
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < ne; ++e)
      ref_flows(e, t) = ref_sol.x[ref_prog.variable(idx("f", cs.edges[size_t(e)].id, t))];

  auto to_point = [&](const Eigen::MatrixXd& flows) {
    LinearizationPoint pt;
    pt.temps.resize(size_t(ne));
    pt.flows.resize(size_t(ne));
    Eigen::MatrixXd temps = simulate_temperatures(prep, flows);
    for (int e = 0; e < ne; ++e) {
      if (!prep.edge_dlr[size_t(e)]) continue;
      pt.temps[size_t(e)].resize(size_t(T) + 1);
      pt.flows[size_t(e)].resize(size_t(T));
      for (int j = 0; j <= T; ++j) pt.temps[size_t(e)][size_t(j)] = temps(e, j);
      for (int t = 0; t < T; ++t) pt.flows[size_t(e)][size_t(t)] = flows(e, t);
    }
    return pt;
  };

  LinearizationPoint point = to_point(ref_flows);
  MultiResult res;
  std::vector<double> log;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    KappaSet kap = linearize_evolution(prep, point);
    res = solve_multi_at(prep, cfg, kap, point, opts);
    res.iterations = it + 1;
    if (res.status != socp::SolveStatus::optimal) {
      res.converged = false;
      res.iteration_dT = log;
      return res;
    }
    LinearizationPoint next = to_point(res.flows);
    double dT = 0.0;
    for (int e = 0; e < ne; ++e) {
      if (!prep.edge_dlr[size_t(e)]) continue;
      for (int j = 0; j <= T; ++j)
        dT = std::max(dT, std::abs(next.temps[size_t(e)][size_t(j)] -
                                   point.temps[size_t(e)][size_t(j)]));
    }
    log.push_back(dT);
    point = std::move(next);
    if (dT <= cfg.temp_tol_C) {
      res.converged = true;
      res.iteration_dT = log;
      return res;
    }
  }
  res.converged = false;
  res.iteration_dT = log;
  return res;
}

}  // namespace dlrm::market
