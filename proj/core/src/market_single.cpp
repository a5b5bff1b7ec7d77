#include "dlrm/market_single.hpp"

#include <cmath>

#include "dlrm/errors.hpp"
#include "dlrm/stats.hpp"

namespace dlrm::market {

RatingMode parse_mode(const std::string& s) {
  if (s == "slr") return RatingMode::slr;
  if (s == "dlr") return RatingMode::dlr;
  if (s == "cc-dlr" || s == "cc_dlr" || s == "ccdlr") return RatingMode::cc_dlr;
  fail(errc::validation_error, "unknown rating mode '" + s + "' (slr|dlr|cc-dlr)");
}

const char* mode_name(RatingMode m) {
  switch (m) {
    case RatingMode::slr: return "slr";
    case RatingMode::dlr: return "dlr";
    case RatingMode::cc_dlr: return "cc-dlr";
  }
  return "?";
}

double SinglePeriodConfig::delta() const {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    fail(errc::validation_error, "epsilon must lie in (0, 0.5)");
  return stats::normal_quantile(1.0 - epsilon);
}

void flow_expression(const SingleInputs& in, int edge, Eigen::VectorXd* coeffs, double* constant) {
  const auto& cs = *in.cs;
  const auto& S = in.ptdf->S;
  coeffs->resize(int(cs.generators.size()));
  for (size_t g = 0; g < cs.generators.size(); ++g)
    (*coeffs)[int(g)] = S(edge, cs.generators[g].node);
  double c = 0.0;
  for (int i = 0; i < int(cs.nodes.size()); ++i)
    c += S(edge, i) * (in.wind_node[i] - in.load[i]);
  *constant = c;
}

namespace {

// Loading vector of edge e: the sensitivity of the edge flow to each wind
// farm's error under the recourse policy g = p - alpha * Omega:
//   l_k(alpha) = S_{e,node(k)} - sum_i S_{e,node(i)} alpha_i.
struct ConeData {
  Eigen::VectorXd farm_ptdf;      // S_{e,node(k)} per farm
  Eigen::VectorXd gen_ptdf;       // S_{e,node(i)} per generator
  Eigen::MatrixXd sqrt_sigma;     // n_farms^2
  Eigen::VectorXd sinv_b;         // Sigma_omega^{-1} b_e
  Eigen::VectorXd b;              // b_e
  double tail = 0.0;              // sqrt(sigma_le^2 - b' Sigma^{-1} b)
};

ConeData cone_data(const SingleInputs& in, int edge) {
  const auto& cs = *in.cs;
  const auto& jc = *in.jc;
  ConeData cd;
  int n_farms = jc.n_farms();
  cd.farm_ptdf.resize(n_farms);
  for (int k = 0; k < n_farms; ++k)
    cd.farm_ptdf[k] = in.ptdf->S(edge, cs.wind_farms[size_t(k)].node);
  cd.gen_ptdf.resize(int(cs.generators.size()));
  for (size_t g = 0; g < cs.generators.size(); ++g)
    cd.gen_ptdf[int(g)] = in.ptdf->S(edge, cs.generators[g].node);
  cd.sqrt_sigma = stats::psd_sqrt(jc.sigma_omega);
  cd.b = jc.b_omega_xi[size_t(edge)];
  Eigen::MatrixXd inv = uncert::sigma_omega_inverse(jc);
  cd.sinv_b = inv * cd.b;
  double tail_sq = jc.sigma_le[size_t(edge)] * jc.sigma_le[size_t(edge)] - cd.b.dot(cd.sinv_b);
  if (tail_sq < -1e-9)
    fail(errc::dominance_violated,
         "flow cone for " + cs.edges[size_t(edge)].id + ": wind-induced rating variance exceeds intrinsic");
  cd.tail = std::sqrt(std::max(0.0, tail_sq));
  return cd;
}

}  // namespace

Eigen::VectorXd flow_cone_alpha_gradient(const SingleInputs& in, const SinglePeriodConfig& cfg,
                                         int edge, bool upper, const Eigen::VectorXd& alpha) {
  const auto& cs = *in.cs;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(int(cs.generators.size()));
  if (cfg.mode != RatingMode::cc_dlr || in.jc == nullptr || in.jc->n_farms() == 0) return grad;
  ConeData cd = cone_data(in, edge);
  double sign = upper ? -1.0 : 1.0;
  Eigen::VectorXd loading =
      cd.farm_ptdf - Eigen::VectorXd::Constant(cd.farm_ptdf.size(), cd.gen_ptdf.dot(alpha));
  Eigen::VectorXd v = loading + sign * cd.sinv_b;
  double norm = std::hypot((cd.sqrt_sigma * v).norm(), cd.tail);
  if (norm < 1e-14) return grad;
  double scale = (in.jc->sigma_omega * loading + sign * cd.b).sum() / norm;
  return -cd.gen_ptdf * scale;
}

socp::ConicProgram build_single(const SingleInputs& in, const SinglePeriodConfig& cfg) {
  const auto& cs = *in.cs;
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const double delta = cfg.delta();

  if (cfg.mode == RatingMode::cc_dlr && in.jc) {
    auto rep = uncert::validate_dominance(*in.jc);
    if (!rep.all_ok) {
      for (const auto& l : rep.lines)
        if (!l.ok)
          fail(errc::dominance_violated,
               "line " + l.edge_id + ": induced " + std::to_string(l.induced) + " > intrinsic " +
                   std::to_string(l.intrinsic));
    }
  }

  double sigma_Omega = in.jc ? in.jc->sigma_Omega : 0.0;
  double sqrt_sO = std::sqrt(std::max(0.0, sigma_Omega));

  socp::ConicProgram prog;
  std::vector<int> vp(ng), va(ng), vru(ng), vrd(ng);
  for (int g = 0; g < ng; ++g) {
    const auto& gen = cs.generators[size_t(g)];
    vp[g] = prog.add_variable("p[" + gen.id + "]");
    va[g] = prog.add_variable("alpha[" + gen.id + "]");
    vru[g] = prog.add_variable("r_up[" + gen.id + "]");
    vrd[g] = prog.add_variable("r_dn[" + gen.id + "]");
  }

  for (int g = 0; g < ng; ++g) {
    const auto& gen = cs.generators[size_t(g)];
    prog.add_objective_term(vp[g], gen.c1);
    double curv_p = gen.c2 > 0 ? gen.c2 : kTieBreak;
    prog.add_quadratic_epigraph(vp[g], curv_p, 1.0, "epi_p[" + gen.id + "]");
    prog.add_quadratic_epigraph(va[g], gen.c2 * sigma_Omega + kTieBreak, 1.0,
                                "epi_a[" + gen.id + "]");
    prog.add_objective_term(vru[g], kTieBreak);
    prog.add_objective_term(vrd[g], kTieBreak);
  }

  // Power balance: load - wind - sum p = 0, so the tagged dual is the
  // marginal cost of demand.
  {
    socp::LinExpr bal;
    bal.constant = in.load.sum() - in.wind_node.sum();
    for (int g = 0; g < ng; ++g) bal.add(vp[g], -1.0);
    prog.add_equality(std::move(bal), "bal");
  }
  {
    socp::LinExpr asum;
    asum.constant = 1.0;
    for (int g = 0; g < ng; ++g) asum.add(va[g], -1.0);
    prog.add_equality(std::move(asum), "alpha_sum");
  }

  for (int g = 0; g < ng; ++g) {
    const auto& gen = cs.generators[size_t(g)];
    socp::LinExpr pmax = socp::LinExpr::of(vp[g], 1.0).add(vru[g], 1.0);
    pmax.constant = -gen.p_max;
    prog.add_inequality(std::move(pmax), "pmax[" + gen.id + "]");

    socp::LinExpr pmin = socp::LinExpr::of(vp[g], -1.0).add(vrd[g], 1.0);
    pmin.constant = gen.p_min;
    prog.add_inequality(std::move(pmin), "pmin[" + gen.id + "]");

    socp::LinExpr reup = socp::LinExpr::of(va[g], sqrt_sO * delta).add(vru[g], -1.0);
    prog.add_inequality(std::move(reup), "re_up[" + gen.id + "]");
    socp::LinExpr redn = socp::LinExpr::of(va[g], sqrt_sO * delta).add(vrd[g], -1.0);
    prog.add_inequality(std::move(redn), "re_dn[" + gen.id + "]");

    prog.add_inequality(socp::LinExpr::of(va[g], -1.0), "alpha_nn[" + gen.id + "]");
  }

  for (int e = 0; e < ne; ++e) {
    const std::string& eid = cs.edges[size_t(e)].id;
    Eigen::VectorXd fcoef;
    double fconst = 0.0;
    flow_expression(in, e, &fcoef, &fconst);
    double cap = in.rating[e];

    bool stochastic = cfg.mode == RatingMode::cc_dlr && in.jc && in.jc->n_farms() > 0;
    ConeData cd;
    double u_scale = 0.0;
    if (stochastic) {
      cd = cone_data(in, e);
      u_scale = std::max({cd.sqrt_sigma.cwiseAbs().maxCoeff(), cd.tail,
                          cd.b.size() ? cd.b.cwiseAbs().maxCoeff() : 0.0});
    }

    if (!stochastic || u_scale < 1e-14) {
      // Deterministic limits; a fully degenerate cone collapses to these too.
      socp::LinExpr up;
      up.constant = fconst - cap;
      socp::LinExpr dn;
      dn.constant = -fconst - cap;
      for (int g = 0; g < ng; ++g) {
        up.add(vp[g], fcoef[g]);
        dn.add(vp[g], -fcoef[g]);
      }
      prog.add_inequality(std::move(up), "fmax[" + eid + "]");
      prog.add_inequality(std::move(dn), "fmin[" + eid + "]");
      continue;
    }

    const int nf = in.jc->n_farms();
    auto make_cone = [&](bool upper) {
      socp::SocBlock blk;
      blk.t.constant = cap + (upper ? -fconst : fconst);
      for (int g = 0; g < ng; ++g) blk.t.add(vp[g], upper ? -fcoef[g] : fcoef[g]);
      double sign = upper ? -1.0 : 1.0;
      Eigen::VectorXd base = cd.farm_ptdf + sign * cd.sinv_b;
      Eigen::VectorXd u_const = cd.sqrt_sigma * base;          // at alpha = 0
      Eigen::VectorXd u_alpha = cd.sqrt_sigma * Eigen::VectorXd::Ones(nf);  // times (gen_ptdf' a)
      blk.u.resize(size_t(nf) + 1);
      for (int r = 0; r < nf; ++r) {
        blk.u[size_t(r)].constant = delta * u_const[r];
        for (int g = 0; g < ng; ++g)
          blk.u[size_t(r)].add(va[g], -delta * u_alpha[r] * cd.gen_ptdf[g]);
      }
      blk.u[size_t(nf)].constant = delta * cd.tail;
      return blk;
    };
    prog.add_soc(make_cone(true), "fmax[" + eid + "]");
    prog.add_soc(make_cone(false), "fmin[" + eid + "]");
  }
  return prog;
}

void price_single(const SingleInputs& in, const SinglePeriodConfig& cfg, SingleResult& result) {
  const auto& cs = *in.cs;
  const int nn = int(cs.nodes.size());
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());
  const auto& S = in.ptdf->S;
  const double delta = result.delta;

  double lam_bal = result.sol.dual_of("bal");
  result.lmp.resize(nn);
  for (int i = 0; i < nn; ++i) {
    double congestion = 0.0;
    for (int e = 0; e < ne; ++e) {
      double lf_up = result.sol.dual_of("fmax[" + cs.edges[size_t(e)].id + "]");
      double lf_dn = result.sol.dual_of("fmin[" + cs.edges[size_t(e)].id + "]");
      congestion += (lf_up - lf_dn) * S(e, i);
    }
    result.lmp[i] = lam_bal - congestion;
  }

  double sigma_Omega = in.jc ? in.jc->sigma_Omega : 0.0;
  double scale = std::sqrt(std::max(0.0, sigma_Omega)) * delta;
  double lam_alpha = result.sol.dual_of("alpha_sum");

  result.lmrp.resize(ng);
  result.lmrp_formula.resize(ng);
  result.degenerate_duals = false;
  for (int g = 0; g < ng; ++g) {
    const auto& gen = cs.generators[size_t(g)];
    double r1 = result.sol.dual_of("re_up[" + gen.id + "]") +
                result.sol.dual_of("re_dn[" + gen.id + "]");
    result.lmrp[g] = r1;
    if (scale < 1e-4) {
      // Vanishing reserve requirement: the stationarity route divides by
      // scale; report the dual route for both.
      result.lmrp_formula[g] = r1;
      continue;
    }
    double delivery = 0.0;
    if (cfg.mode == RatingMode::cc_dlr) {
      for (int e = 0; e < ne; ++e) {
        const std::string& eid = cs.edges[size_t(e)].id;
        double lf_up = result.sol.dual_of("fmax[" + eid + "]");
        double lf_dn = result.sol.dual_of("fmin[" + eid + "]");
        if (lf_up > 1e-12)
          delivery += lf_up * delta *
                      flow_cone_alpha_gradient(in, cfg, e, true, result.alpha)[g];
        if (lf_dn > 1e-12)
          delivery += lf_dn * delta *
                      flow_cone_alpha_gradient(in, cfg, e, false, result.alpha)[g];
      }
    }
    // The participation nonnegativity dual vanishes at interior alpha, where
    // this reduces to the plain reserve-balance decomposition.
    double bound_dual = result.sol.dual_of("alpha_nn[" + gen.id + "]");
    result.lmrp_formula[g] =
        (lam_alpha + bound_dual - 2.0 * gen.c2 * sigma_Omega * result.alpha[g] - delivery) /
        scale;
    if (std::abs(result.lmrp_formula[g] - r1) > 1e-5) result.degenerate_duals = true;
  }
}

SingleResult solve_single(const SingleInputs& in, const SinglePeriodConfig& cfg,
                          const socp::SolverOptions& opts) {
  const auto& cs = *in.cs;
  const int ng = int(cs.generators.size());
  const int ne = int(cs.edges.size());

  socp::ConicProgram prog = build_single(in, cfg);
  SingleResult res;
  res.delta = cfg.delta();
  res.sol = socp::solve(prog, opts);
  res.status = res.sol.status;
  if (res.status != socp::SolveStatus::optimal) return res;

  res.p.resize(ng);
  res.alpha.resize(ng);
  res.r_up.resize(ng);
  res.r_dn.resize(ng);
  for (int g = 0; g < ng; ++g) {
    const auto& gen = cs.generators[size_t(g)];
    res.p[g] = res.sol.x[prog.variable("p[" + gen.id + "]")];
    res.alpha[g] = res.sol.x[prog.variable("alpha[" + gen.id + "]")];
    res.r_up[g] = res.sol.x[prog.variable("r_up[" + gen.id + "]")];
    res.r_dn[g] = res.sol.x[prog.variable("r_dn[" + gen.id + "]")];
  }
  // Degenerate reserve headroom is free; pin it at the minimal-norm optimum
  // so reported reserves and payments are reproducible.
  double sigma_Omega_pin = in.jc ? in.jc->sigma_Omega : 0.0;
  double need = std::sqrt(std::max(0.0, sigma_Omega_pin)) * res.delta;
  for (int g = 0; g < ng; ++g) {
    res.r_up[g] = need * res.alpha[g];
    res.r_dn[g] = need * res.alpha[g];
  }
  // True economic objective, excluding tie-break terms.
  double sigma_Omega = in.jc ? in.jc->sigma_Omega : 0.0;
  res.objective = 0.0;
  for (int g = 0; g < ng; ++g) {
    const auto& gen = cs.generators[size_t(g)];
    res.objective += gen.c1 * res.p[g] + gen.c2 * res.p[g] * res.p[g] +
                     gen.c2 * sigma_Omega * res.alpha[g] * res.alpha[g];
  }

  res.flows.resize(ne);
  for (int e = 0; e < ne; ++e) {
    Eigen::VectorXd fc;
    double f0 = 0.0;
    flow_expression(in, e, &fc, &f0);
    res.flows[e] = fc.dot(res.p) + f0;
  }
  price_single(in, cfg, res);
  return res;
}

}  // namespace dlrm::market
