#include "dlrm/socp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dlrm/errors.hpp"

namespace dlrm::socp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// ConicProgram
// ---------------------------------------------------------------------------

int ConicProgram::add_variable(const std::string& name) {
  if (var_lookup_.count(name)) fail(errc::index_mismatch, "duplicate variable " + name);
  int id = int(var_names_.size());
  var_names_.push_back(name);
  var_lookup_[name] = id;
  obj_.push_back(0.0);
  return id;
}

int ConicProgram::variable(const std::string& name) const {
  auto it = var_lookup_.find(name);
  return it == var_lookup_.end() ? -1 : it->second;
}

void ConicProgram::add_objective_term(int var, double coeff) {
  obj_.at(size_t(var)) += coeff;
}

void ConicProgram::register_tag(const std::string& tag) {
  if (tag.empty()) fail(errc::index_mismatch, "constraint tag must be nonempty");
  if (!tag_lookup_.emplace(tag, 1).second)
    fail(errc::index_mismatch, "duplicate constraint tag " + tag);
}

void ConicProgram::add_equality(LinExpr e, const std::string& tag) {
  register_tag(tag);
  eq_.emplace_back(std::move(e), tag);
}

void ConicProgram::add_inequality(LinExpr e, const std::string& tag) {
  register_tag(tag);
  ineq_.emplace_back(std::move(e), tag);
}

void ConicProgram::add_soc(SocBlock blk, const std::string& tag) {
  if (blk.u.empty()) fail(errc::index_mismatch, "soc block " + tag + " has empty norm part");
  register_tag(tag);
  soc_.emplace_back(std::move(blk), tag);
}

int ConicProgram::add_quadratic_epigraph(int var, double curvature, double obj_coeff,
                                         const std::string& tag) {
  if (curvature < 0) fail(errc::negative_curvature, "quadratic coefficient < 0 at " + tag);
  if (curvature == 0.0 && obj_coeff == 0.0) return -1;
  int t = add_variable("epi:" + tag);
  SocBlock blk;
  blk.t = LinExpr::of(t, 1.0);
  blk.t.constant = 1.0;
  blk.u.resize(2);
  blk.u[0] = LinExpr::of(var, 2.0);
  blk.u[1] = LinExpr::of(t, 1.0);
  blk.u[1].constant = -1.0;
  add_soc(std::move(blk), tag);
  add_objective_term(t, curvature * obj_coeff);
  quad_epis_.push_back({var, t, int(soc_.size()) - 1});
  return t;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "Optimal";
    case SolveStatus::infeasible: return "Infeasible";
    case SolveStatus::unbounded: return "Unbounded";
    case SolveStatus::iteration_limit: return "IterationLimit";
    case SolveStatus::numerical_failure: return "NumericalFailure";
  }
  return "Unknown";
}

double ConicSolution::dual_of(const std::string& tag) const {
  auto it = dual.find(tag);
  if (it == dual.end()) fail(errc::index_mismatch, "no dual for tag " + tag);
  return it->second;
}

double ConicSolution::slack_of(const std::string& tag) const {
  auto it = slack.find(tag);
  if (it == slack.end()) fail(errc::index_mismatch, "no slack for tag " + tag);
  return it->second;
}

// ---------------------------------------------------------------------------
// Cone algebra for K = R+^l x SOC(q_1) x ... x SOC(q_k)
// ---------------------------------------------------------------------------

namespace {

struct ConeLayout {
  int l = 0;                  // leading nonnegative rows
  std::vector<int> q;         // soc sizes (each >= 2)
  int dim() const {
    int d = l;
    for (int qi : q) d += qi;
    return d;
  }
  int degree() const { return l + int(q.size()); }
};

double soc_residual(const Eigen::VectorXd& u, int off, int len) {
  return u[off] - u.segment(off + 1, len - 1).norm();
}

// Shifts u into the cone interior the way conelp initializations do.
void bring_to_cone(const ConeLayout& k, Eigen::VectorXd& u) {
  if (k.l > 0) {
    double mn = u.head(k.l).minCoeff();
    if (mn <= 0) u.head(k.l).array() += 1.0 - mn;
  }
  int off = k.l;
  for (int qi : k.q) {
    double r = soc_residual(u, off, qi);
    if (r <= 0) u[off] += 1.0 - r;
    off += qi;
  }
}

// Nesterov-Todd scaling. For the nonnegative part W = diag(w); for each SOC
// block W = eta * (2 wbar wbar' - J)^(1/2) held in closed form.
struct Scaling {
  const ConeLayout* layout = nullptr;
  Eigen::VectorXd w_lp;  // sqrt(s/z)
  struct SocScale {
    double eta = 1.0;
    Eigen::VectorXd wbar;  // unit hyperbolic vector
  };
  std::vector<SocScale> soc;

  void identity(const ConeLayout& k) {
    layout = &k;
    w_lp = Eigen::VectorXd::Ones(k.l);
    soc.clear();
    for (int qi : k.q) {
      SocScale sc;
      sc.wbar = Eigen::VectorXd::Zero(qi);
      sc.wbar[0] = 1.0;
      soc.push_back(std::move(sc));
    }
  }

  bool compute(const ConeLayout& k, const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
    layout = &k;
    w_lp.resize(k.l);
    for (int i = 0; i < k.l; ++i) {
      if (s[i] <= 0 || z[i] <= 0) return false;
      w_lp[i] = std::sqrt(s[i] / z[i]);
    }
    soc.assign(k.q.size(), SocScale{});
    int off = k.l;
    for (size_t j = 0; j < k.q.size(); ++j) {
      int qi = k.q[j];
      auto sb = s.segment(off, qi);
      auto zb = z.segment(off, qi);
      double ds = sb[0] * sb[0] - sb.tail(qi - 1).squaredNorm();
      double dz = zb[0] * zb[0] - zb.tail(qi - 1).squaredNorm();
      if (ds <= 0 || dz <= 0 || sb[0] <= 0 || zb[0] <= 0) return false;
      Eigen::VectorXd sbar = sb / std::sqrt(ds);
      Eigen::VectorXd zbar = zb / std::sqrt(dz);
      double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
      Eigen::VectorXd wbar(qi);
      wbar[0] = (sbar[0] + zbar[0]) / (2 * gamma);
      wbar.tail(qi - 1) = (sbar.tail(qi - 1) - zbar.tail(qi - 1)) / (2 * gamma);
      soc[j].eta = std::pow(ds / dz, 0.25);
      soc[j].wbar = std::move(wbar);
      off += qi;
    }
    return true;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {  // W u
    const ConeLayout& k = *layout;
    Eigen::VectorXd out(u.size());
    out.head(k.l) = w_lp.cwiseProduct(u.head(k.l));
    int off = k.l;
    for (size_t j = 0; j < k.q.size(); ++j) {
      int qi = k.q[j];
      const auto& w = soc[j].wbar;
      auto ub = u.segment(off, qi);
      double w1u = w.tail(qi - 1).dot(ub.tail(qi - 1));
      out[off] = soc[j].eta * (w[0] * ub[0] + w1u);
      out.segment(off + 1, qi - 1) =
          soc[j].eta * (ub.tail(qi - 1) + (ub[0] + w1u / (1.0 + w[0])) * w.tail(qi - 1));
      off += qi;
    }
    return out;
  }

  Eigen::VectorXd apply_inv(const Eigen::VectorXd& u) const {  // W^{-1} u
    const ConeLayout& k = *layout;
    Eigen::VectorXd out(u.size());
    out.head(k.l) = u.head(k.l).cwiseQuotient(w_lp);
    int off = k.l;
    for (size_t j = 0; j < k.q.size(); ++j) {
      int qi = k.q[j];
      const auto& w = soc[j].wbar;
      auto ub = u.segment(off, qi);
      double w1u = w.tail(qi - 1).dot(ub.tail(qi - 1));
      out[off] = (w[0] * ub[0] - w1u) / soc[j].eta;
      out.segment(off + 1, qi - 1) =
          (ub.tail(qi - 1) + (-ub[0] + w1u / (1.0 + w[0])) * w.tail(qi - 1)) / soc[j].eta;
      off += qi;
    }
    return out;
  }

  // W^2 u = W(W u) in closed form: eta^2 (2 wbar (wbar' u) - J u).
  Eigen::VectorXd apply_sq(const Eigen::VectorXd& u) const {
    const ConeLayout& k = *layout;
    Eigen::VectorXd out(u.size());
    out.head(k.l) = w_lp.cwiseAbs2().cwiseProduct(u.head(k.l));
    int off = k.l;
    for (size_t j = 0; j < k.q.size(); ++j) {
      int qi = k.q[j];
      const auto& w = soc[j].wbar;
      auto ub = u.segment(off, qi);
      double wu = w.dot(ub);
      double e2 = soc[j].eta * soc[j].eta;
      out[off] = e2 * (2 * w[0] * wu - ub[0]);
      out.segment(off + 1, qi - 1) = e2 * (2 * wu * w.tail(qi - 1) + ub.tail(qi - 1));
      off += qi;
    }
    return out;
  }

  // Dense W^2 for the KKT matrix.
  Eigen::MatrixXd dense_sq() const {
    const ConeLayout& k = *layout;
    int m = k.dim();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < k.l; ++i) out(i, i) = w_lp[i] * w_lp[i];
    int off = k.l;
    for (size_t j = 0; j < k.q.size(); ++j) {
      int qi = k.q[j];
      const auto& w = soc[j].wbar;
      double e2 = soc[j].eta * soc[j].eta;
      Eigen::MatrixXd blockJ = -Eigen::MatrixXd::Identity(qi, qi);
      blockJ(0, 0) = 1.0;
      out.block(off, off, qi, qi) = e2 * (2.0 * w * w.transpose() - blockJ);
      off += qi;
    }
    return out;
  }
};

// Jordan product u o v per cone.
Eigen::VectorXd jordan_prod(const ConeLayout& k, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& v) {
  Eigen::VectorXd out(u.size());
  out.head(k.l) = u.head(k.l).cwiseProduct(v.head(k.l));
  int off = k.l;
  for (int qi : k.q) {
    auto ub = u.segment(off, qi);
    auto vb = v.segment(off, qi);
    out[off] = ub.dot(vb);
    out.segment(off + 1, qi - 1) = ub[0] * vb.tail(qi - 1) + vb[0] * ub.tail(qi - 1);
    off += qi;
  }
  return out;
}

// Jordan division lambda \ u (arrow-matrix inverse per cone).
Eigen::VectorXd jordan_div(const ConeLayout& k, const Eigen::VectorXd& lambda,
                           const Eigen::VectorXd& u) {
  Eigen::VectorXd out(u.size());
  out.head(k.l) = u.head(k.l).cwiseQuotient(lambda.head(k.l));
  int off = k.l;
  for (int qi : k.q) {
    auto lb = lambda.segment(off, qi);
    auto ub = u.segment(off, qi);
    double det = lb[0] * lb[0] - lb.tail(qi - 1).squaredNorm();
    double x0 = (lb[0] * ub[0] - lb.tail(qi - 1).dot(ub.tail(qi - 1))) / det;
    out[off] = x0;
    out.segment(off + 1, qi - 1) = (ub.tail(qi - 1) - x0 * lb.tail(qi - 1)) / lb[0];
    off += qi;
  }
  return out;
}

Eigen::VectorXd cone_identity(const ConeLayout& k) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(k.dim());
  e.head(k.l).setOnes();
  int off = k.l;
  for (int qi : k.q) {
    e[off] = 1.0;
    off += qi;
  }
  return e;
}

// Largest step alpha with u + alpha du remaining in the cone (inf when free).
double max_step(const ConeLayout& k, const Eigen::VectorXd& u, const Eigen::VectorXd& du) {
  double amax = kInf;
  for (int i = 0; i < k.l; ++i)
    if (du[i] < 0) amax = std::min(amax, -u[i] / du[i]);
  int off = k.l;
  for (int qi : k.q) {
    auto ub = u.segment(off, qi);
    auto db = du.segment(off, qi);
    double c = ub[0] * ub[0] - ub.tail(qi - 1).squaredNorm();
    double b = ub[0] * db[0] - ub.tail(qi - 1).dot(db.tail(qi - 1));
    double a = db[0] * db[0] - db.tail(qi - 1).squaredNorm();
    double bound = kInf;
    if (std::abs(a) < 1e-300) {
      if (b < 0) bound = -c / (2 * b);
    } else {
      double disc = b * b - a * c;
      if (disc >= 0) {
        double sq = std::sqrt(disc);
        for (double root : {(-b - sq) / a, (-b + sq) / a})
          if (root > 0) bound = std::min(bound, root);
      }
      // a < 0 always crosses; a > 0 with disc < 0 never does.
    }
    if (db[0] < 0) bound = std::min(bound, -ub[0] / db[0]);
    amax = std::min(amax, bound);
    off += qi;
  }
  return amax;
}

struct Compiled {
  int n = 0;
  Eigen::MatrixXd A;  // p x n
  Eigen::VectorXd b;
  Eigen::MatrixXd G;  // m x n
  Eigen::VectorXd h;
  ConeLayout cone;
  Eigen::VectorXd c;
};

void scatter(const LinExpr& e, Eigen::MatrixXd& m, int row) {
  for (const auto& t : e.terms) m(row, t.var) += t.coeff;
}

Compiled compile(const ConicProgram& prog) {
  Compiled cp;
  cp.n = prog.num_variables();
  int p = int(prog.equalities().size());
  cp.A = Eigen::MatrixXd::Zero(p, cp.n);
  cp.b = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < p; ++i) {
    const auto& e = prog.equalities()[size_t(i)].first;
    scatter(e, cp.A, i);
    cp.b[i] = -e.constant;
  }
  cp.cone.l = int(prog.inequalities().size());
  int m = cp.cone.l;
  for (const auto& [blk, tag] : prog.cones()) {
    (void)tag;
    cp.cone.q.push_back(1 + int(blk.u.size()));
    m += 1 + int(blk.u.size());
  }
  cp.G = Eigen::MatrixXd::Zero(m, cp.n);
  cp.h = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < cp.cone.l; ++i) {
    const auto& e = prog.inequalities()[size_t(i)].first;
    scatter(e, cp.G, i);
    cp.h[i] = -e.constant;
  }
  int off = cp.cone.l;
  for (const auto& [blk, tag] : prog.cones()) {
    (void)tag;
    // s0 = t(x), s_i = u_i(x):  s = h - Gx.
    for (const auto& t : blk.t.terms) cp.G(off, t.var) -= t.coeff;
    cp.h[off] = blk.t.constant;
    for (size_t i = 0; i < blk.u.size(); ++i) {
      for (const auto& t : blk.u[i].terms) cp.G(off + 1 + int(i), t.var) -= t.coeff;
      cp.h[off + 1 + int(i)] = blk.u[i].constant;
    }
    off += 1 + int(blk.u.size());
  }
  cp.c = Eigen::Map<const Eigen::VectorXd>(prog.objective().data(), cp.n);
  return cp;
}

// KKT solver: symmetric equilibration, regularized LU factorization, then
// adaptive iterative refinement against the unscaled operator. Equilibration
// keeps the factorization usable when the cone scaling spans many orders of
// magnitude near convergence.
struct KktSolver {
  const Compiled* cp = nullptr;
  Eigen::MatrixXd Kraw;  // unregularized, unscaled
  Eigen::MatrixXd K;     // D * (Kraw + reg) * D
  Eigen::VectorXd d;     // equilibration scaling
  Eigen::FullPivLU<Eigen::MatrixXd> lu;
  int refine = 8;

  bool factor(const Compiled& c, const Scaling& W, double reg) {
    cp = &c;
    int n = c.n, p = int(c.b.size()), m = int(c.h.size());
    int dim = n + p + m;
    Kraw = Eigen::MatrixXd::Zero(dim, dim);
    Kraw.block(0, n, n, p) = c.A.transpose();
    Kraw.block(0, n + p, n, m) = c.G.transpose();
    Kraw.block(n, 0, p, n) = c.A;
    Kraw.block(n + p, 0, m, n) = c.G;
    Kraw.block(n + p, n + p, m, m) = -W.dense_sq();
    K = Kraw;
    K.diagonal().head(n).array() += reg;
    K.diagonal().segment(n, p).array() -= reg;
    K.diagonal().tail(m).array() -= reg;
    d.resize(dim);
    for (int i = 0; i < dim; ++i) {
      double rmax = K.row(i).cwiseAbs().maxCoeff();
      d[i] = rmax > 0 ? 1.0 / std::sqrt(rmax) : 1.0;
    }
    K = d.asDiagonal() * K * d.asDiagonal();
    lu.compute(K);
    return K.allFinite();
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    auto base_solve = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
      return d.asDiagonal() * lu.solve(Eigen::VectorXd(d.asDiagonal() * r));
    };
    Eigen::VectorXd x = base_solve(rhs);
    double best_res = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x = x;
    for (int i = 0; i < refine; ++i) {
      Eigen::VectorXd r = rhs - Kraw * x;
      double rn = r.norm();
      if (rn < best_res) {
        best_res = rn;
        best_x = x;
        if (rn <= 1e-14 * std::max(1.0, rhs.norm())) break;
      } else {
        break;
      }
      x += base_solve(r);
    }
    Eigen::VectorXd r = rhs - Kraw * x;
    return r.norm() < best_res ? x : best_x;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Homogeneous self-dual interior point solve
// ---------------------------------------------------------------------------

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts) {
  Compiled cp = compile(prog);
  const int n = cp.n, p = int(cp.b.size()), m = int(cp.h.size());
  const ConeLayout& K = cp.cone;

  // Normalize the data to O(1): right-hand sides scale the primal point,
  // objective scales the duals. Both are undone on extraction.
  double beta_rhs = 1.0, beta_obj = 1.0;
  if (p + m > 0) {
    double bmax = p > 0 ? cp.b.cwiseAbs().maxCoeff() : 0.0;
    double hmax = m > 0 ? cp.h.cwiseAbs().maxCoeff() : 0.0;
    beta_rhs = std::max(1.0, std::max(bmax, hmax));
  }
  if (n > 0) beta_obj = std::max(1.0, cp.c.cwiseAbs().maxCoeff());
  const Eigen::VectorXd b0 = cp.b;
  const Eigen::VectorXd h0 = cp.h;
  const Eigen::VectorXd c0 = cp.c;
  cp.b /= beta_rhs;
  cp.h /= beta_rhs;
  cp.c /= beta_obj;

  ConicSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);


  // Exact primal-dual polish for the case where every active cone is a
  // quadratic epigraph: the program restricted to its active set is then an
  // equality-constrained QP, solved here by one dense KKT factorization.
  // Interior-point iterates resolve flat quadratic directions only to about
  // sqrt(gap); this recovers them to machine precision. Returns false (no
  // change) whenever the active set is ambiguous or a general cone is active.
  auto polish_qp = [&](Eigen::VectorXd& xu, Eigen::VectorXd& yu, Eigen::VectorXd& zu) {
    double cn = std::max(1.0, c0.norm());
    double bhn = std::max(1.0, std::hypot(b0.norm(), h0.norm()));
    const auto& epis = prog.quadratic_epigraphs();
    if (epis.empty()) { if (opts.verbose) std::fprintf(stderr, "qp-polish: no epigraphs\n"); return false; }
    Eigen::VectorXd s_true = h0 - cp.G * xu;

    std::vector<bool> is_epi_cone(K.q.size(), false);
    std::vector<bool> is_epi_var(size_t(n), false);
    for (const auto& qe : epis) {
      is_epi_cone[size_t(qe.cone)] = true;
      is_epi_var[size_t(qe.epi)] = true;
    }
    // Epigraph variables must appear only in their own cone and the objective.
    for (const auto& qe : epis) {
      if (cp.A.rows() > 0 && cp.A.col(qe.epi).cwiseAbs().maxCoeff() > 0) return false;
      int off = K.l, cone_lo = 0, cone_hi = 0;
      for (size_t j = 0; j < K.q.size(); ++j) {
        if (int(j) == qe.cone) {
          cone_lo = off;
          cone_hi = off + K.q[j];
        }
        off += K.q[j];
      }
      for (int r = 0; r < cp.G.rows(); ++r)
        if ((r < cone_lo || r >= cone_hi) && cp.G(r, qe.epi) != 0.0) return false;
    }
    // No general cone may be active.
    {
      int off = K.l;
      for (size_t j = 0; j < K.q.size(); ++j) {
        int qi = K.q[j];
        if (!is_epi_cone[j]) {
          double zn = zu[off] / cn;
          double sn = soc_residual(s_true, off, qi) / bhn;
          if (zn > sn) return false;
        }
        off += qi;
      }
    }

    std::vector<int> act_lin;
    for (int i = 0; i < K.l; ++i)
      if (zu[i] / cn > s_true[i] / bhn) act_lin.push_back(i);

    std::vector<int> keep;
    std::vector<int> pos(size_t(n), -1);
    for (int v = 0; v < n; ++v)
      if (!is_epi_var[size_t(v)]) {
        pos[size_t(v)] = int(keep.size());
        keep.push_back(v);
      }
    const int nr = int(keep.size());

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(nr, nr);
    Eigen::VectorXd q(nr);
    for (int k = 0; k < nr; ++k) q[k] = c0[keep[size_t(k)]];
    for (const auto& qe : epis) {
      int k = pos[size_t(qe.var)];
      if (k < 0) return false;  // nested epigraphs unsupported
      Q(k, k) += 2.0 * c0[qe.epi];
    }

    // Active-set iteration: add violated rows, drop rows with negative
    // multipliers; each pass is one dense KKT solve.
    Eigen::VectorXd x_new, sol_kkt;
    for (int pass = 0;; ++pass) {
      if (pass > 30) {
        if (opts.verbose) std::fprintf(stderr, "qp-polish: active set did not settle\n");
        return false;
      }
      const int rows = p + int(act_lin.size());
      Eigen::MatrixXd M(rows, nr);
      Eigen::VectorXd rhs(rows);
      for (int i = 0; i < p; ++i) {
        for (int k = 0; k < nr; ++k) M(i, k) = cp.A(i, keep[size_t(k)]);
        rhs[i] = b0[i];
      }
      for (size_t a = 0; a < act_lin.size(); ++a) {
        int i = act_lin[a];
        for (int k = 0; k < nr; ++k) M(p + int(a), k) = cp.G(i, keep[size_t(k)]);
        rhs[p + int(a)] = h0[i];
      }
      Eigen::MatrixXd Kkt = Eigen::MatrixXd::Zero(nr + rows, nr + rows);
      Kkt.topLeftCorner(nr, nr) = Q;
      Kkt.topRightCorner(nr, rows) = M.transpose();
      Kkt.bottomLeftCorner(rows, nr) = M;
      Eigen::VectorXd kr(nr + rows);
      kr.head(nr) = -q;
      kr.tail(rows) = rhs;
      sol_kkt = Kkt.fullPivLu().solve(kr);
      if (!sol_kkt.allFinite()) return false;
      if ((Kkt * sol_kkt - kr).norm() > 1e-9 * std::max(1.0, kr.norm())) {
        if (opts.verbose) std::fprintf(stderr, "qp-polish: singular kkt\n");
        return false;
      }

      // Most negative multiplier leaves the set first.
      int drop = -1;
      double worst_mult = -1e-7 * cn;
      for (size_t a = 0; a < act_lin.size(); ++a)
        if (sol_kkt[nr + p + int(a)] < worst_mult) {
          worst_mult = sol_kkt[nr + p + int(a)];
          drop = int(a);
        }
      if (drop >= 0) {
        act_lin.erase(act_lin.begin() + drop);
        continue;
      }

      x_new = xu;
      for (int k = 0; k < nr; ++k) x_new[keep[size_t(k)]] = sol_kkt[k];
      for (const auto& qe : epis) x_new[qe.epi] = x_new[qe.var] * x_new[qe.var];

      Eigen::VectorXd s_new = h0 - cp.G * x_new;
      int add = -1;
      double worst_vio = -1e-7 * bhn;
      for (int i = 0; i < K.l; ++i) {
        if (std::find(act_lin.begin(), act_lin.end(), i) != act_lin.end()) continue;
        if (s_new[i] < worst_vio) {
          worst_vio = s_new[i];
          add = i;
        }
      }
      if (add >= 0) {
        act_lin.push_back(add);
        continue;
      }
      {
        int off = K.l;
        bool cone_bad = false;
        for (size_t j = 0; j < K.q.size(); ++j) {
          if (!is_epi_cone[j] && soc_residual(s_new, off, K.q[j]) < -1e-7 * bhn) cone_bad = true;
          off += K.q[j];
        }
        if (cone_bad) {
          if (opts.verbose) std::fprintf(stderr, "qp-polish: general cone became active\n");
          return false;
        }
      }
      break;
    }
    const int nr_final = nr;
    (void)nr_final;

    xu = x_new;
    yu = sol_kkt.segment(nr, p);
    zu.setZero();
    for (size_t a = 0; a < act_lin.size(); ++a)
      zu[act_lin[a]] = std::max(0.0, sol_kkt[nr + p + int(a)]);
    {
      int off = K.l;
      for (size_t j = 0; j < K.q.size(); ++j) {
        int qi = K.q[j];
        for (const auto& qe : epis) {
          if (qe.cone != int(j)) continue;
          // t-row stationarity of ||(2v, t-1)|| <= t+1 pins the cone dual.
          double t = xu[qe.epi];
          double z0 = c0[qe.epi] * (t + 1.0) / 2.0;
          zu[off] = z0;
          double un = std::hypot(2.0 * xu[qe.var], t - 1.0);
          if (un > 1e-12) {
            zu[off + 1] = -z0 * 2.0 * xu[qe.var] / un;
            zu[off + 2] = -z0 * (t - 1.0) / un;
          }
        }
        off += qi;
      }
    }
    return true;
  };

  // Active-set dual polish: cone duals aligned with constraint gradients and
  // the stationarity system re-solved by least squares at the returned
  // primal. Epigraph-style cones only determine quadratic gradients to about
  // sqrt(gap) through the interior-point duals; the polished duals restore
  // full precision. Falls back silently when the active set is ambiguous.
  auto polish_duals = [&](const Eigen::VectorXd& xu, Eigen::VectorXd& yu, Eigen::VectorXd& zu) {
    double cn = std::max(1.0, c0.norm());
    double bhn = std::max(1.0, std::hypot(b0.norm(), h0.norm()));
    Eigen::VectorXd s_true = h0 - cp.G * xu;

    std::vector<int> act_lin;
    for (int i = 0; i < K.l; ++i) {
      double zn = zu[i] / cn;
      double sn = s_true[i] / bhn;
      if (zn > sn) act_lin.push_back(i);
    }
    std::vector<int> act_cone;
    std::vector<Eigen::VectorXd> cone_grad;  // gradient of ||u(x)|| - t(x)
    int off = K.l;
    for (size_t j = 0; j < K.q.size(); ++j) {
      int qi = K.q[j];
      double zn = zu[off] / cn;
      double sn = soc_residual(s_true, off, qi) / bhn;
      if (zn > sn) {
        Eigen::VectorXd ub = s_true.segment(off + 1, qi - 1);
        double un = ub.norm();
        if (un < 1e-12) { if (opts.verbose) std::fprintf(stderr, "polish: apex at cone %zu\n", j); return false; }  // cone apex
        // s = h - Gx, so grad_x t = -G_t and grad_x u = -G_u.
        Eigen::VectorXd g = cp.G.row(off).transpose();  // -grad t
        Eigen::VectorXd gu = Eigen::VectorXd::Zero(n);
        for (int r = 1; r < qi; ++r)
          gu -= cp.G.row(off + r).transpose() * (ub[r - 1] / un);
        act_cone.push_back(int(j));
        cone_grad.push_back(gu + g);
      }
      off += qi;
    }

    int cols = p + int(act_lin.size()) + int(act_cone.size());
    if (cols == 0) {
      if (c0.norm() > 1e-9 * cn) return false;
      yu.setZero();
      zu.setZero();
      return true;
    }
    Eigen::MatrixXd M(n, cols);
    int col = 0;
    for (int i = 0; i < p; ++i) M.col(col++) = cp.A.row(i).transpose();
    for (int i : act_lin) M.col(col++) = cp.G.row(i).transpose();
    for (const auto& g : cone_grad) M.col(col++) = g;

    Eigen::VectorXd zeta = M.colPivHouseholderQr().solve(-c0);
    for (int k = 0; k < int(act_lin.size() + act_cone.size()); ++k) {
      double v = zeta[p + k];
      if (v < -1e-7 * cn) {
        if (opts.verbose) std::fprintf(stderr, "polish: negative multiplier %d = %.3e\n", k, v);
        return false;
      }
      zeta[p + k] = std::max(v, 0.0);
    }
    double lsres = (M * zeta + c0).norm();
    if (lsres > 1e-8 * cn) {
      if (opts.verbose) std::fprintf(stderr, "polish: residual %.3e\n", lsres);
      return false;
    }

    if (opts.verbose) std::fprintf(stderr, "polish accepted: lsres %.3e cols %d first-y %.9f\n", lsres, cols, p > 0 ? zeta[0] : 0.0);
    yu = zeta.head(p);
    zu.setZero();
    col = p;
    for (int i : act_lin) zu[i] = zeta[col++];
    off = K.l;
    for (size_t j = 0; j < K.q.size(); ++j) {
      int qi = K.q[j];
      auto it = std::find(act_cone.begin(), act_cone.end(), int(j));
      if (it != act_cone.end()) {
        double z0 = zeta[p + int(act_lin.size()) + int(it - act_cone.begin())];
        Eigen::VectorXd ub = s_true.segment(off + 1, qi - 1);
        zu[off] = z0;
        zu.segment(off + 1, qi - 1) = -z0 * ub / ub.norm();
      }
      off += qi;
    }
    return true;
  };

  auto attach_duals = [&](const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                          const Eigen::VectorXd& zs, const Eigen::VectorXd& ss) {
    Eigen::VectorXd x = beta_rhs * xs;
    Eigen::VectorXd y = beta_obj * ys;
    Eigen::VectorXd z = beta_obj * zs;
    Eigen::VectorXd s = beta_rhs * ss;
    sol.x = x;
    for (int i = 0; i < p; ++i) sol.dual[prog.equalities()[size_t(i)].second] = y[i];
    for (int i = 0; i < K.l; ++i) {
      const auto& tag = prog.inequalities()[size_t(i)].second;
      sol.dual[tag] = z[i];
      sol.slack[tag] = s[i];
    }
    int off = K.l;
    for (size_t j = 0; j < prog.cones().size(); ++j) {
      int qi = K.q[j];
      const auto& tag = prog.cones()[j].second;
      sol.dual[tag] = z[off];
      sol.cone_dual[tag] = z.segment(off, qi);
      sol.slack[tag] = soc_residual(s, off, qi);
      off += qi;
    }
  };

  // Degenerate program with nothing to optimize.
  if (n == 0 && p == 0 && m == 0) {
    sol.status = SolveStatus::optimal;
    sol.objective = prog.objective_constant();
    sol.dual_objective = sol.objective;
    return sol;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
  double tau = 1.0, kappa = 1.0;

  Scaling W;
  W.identity(K);
  KktSolver kkt;
  kkt.refine = opts.refine_steps;

  // Initial point per the usual conelp recipe.
  if (!kkt.factor(cp, W, 1e-11)) {
    sol.status = SolveStatus::numerical_failure;
    return sol;
  }
  {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p + m);
    rhs.segment(n, p) = cp.b;
    rhs.tail(m) = cp.h;
    Eigen::VectorXd d = kkt.solve(rhs);
    x = d.head(n);
    if (m > 0) {
      s = -d.tail(m);
      bring_to_cone(K, s);
    }
    rhs.setZero();
    rhs.head(n) = -cp.c;
    d = kkt.solve(rhs);
    y = d.segment(n, p);
    if (m > 0) {
      z = d.tail(m);
      bring_to_cone(K, z);
    }
  }

  const double nu = double(K.degree()) + 1.0;
  const double bh_norm = std::max(1.0, std::hypot(cp.b.norm(), cp.h.norm()));
  const double c_norm = std::max(1.0, cp.c.norm());

  // Best iterate seen, for soft acceptance when the last Newton steps stall
  // at the numerical floor.
  struct Snapshot {
    Eigen::VectorXd x, y, z, s;
    double tau = 1.0, kappa = 1.0;
    double metric = std::numeric_limits<double>::infinity();
  } best;
  int stall = 0;

  auto finish_optimal = [&](SolveStatus st) {
    if (best.metric < std::numeric_limits<double>::infinity()) {
      x = best.x;
      y = best.y;
      z = best.z;
      s = best.s;
      tau = best.tau;
      kappa = best.kappa;
    }
    Eigen::VectorXd xs = x / tau, ys = y / tau, zs = z / tau, ss = s / tau;
    double unscale = beta_obj * beta_rhs;
    sol.objective = unscale * cp.c.dot(xs) + prog.objective_constant();
    sol.dual_objective = -unscale * (cp.b.dot(ys) + cp.h.dot(zs)) + prog.objective_constant();
    sol.duality_gap = unscale * ss.dot(zs);
    sol.rel_gap = sol.duality_gap / std::max({1.0, std::abs(sol.objective)});
    sol.primal_residual =
        std::hypot((cp.A * xs - cp.b).norm(), (cp.G * xs + ss - cp.h).norm()) / bh_norm;
    sol.dual_residual =
        (cp.A.transpose() * ys + cp.G.transpose() * zs + cp.c).norm() / c_norm;

    // Polishing doubles as an optimality certificate: the active-set QP pass
    // moves primal and dual onto an exact KKT point, so a stalled-but-close
    // iterate is still returned as optimal when it certifies.
    bool near = st == SolveStatus::optimal || best.metric <= 1e3;
    if (near) {
      Eigen::VectorXd xu = beta_rhs * xs;
      Eigen::VectorXd yu = beta_obj * ys;
      Eigen::VectorXd zu = beta_obj * zs;
      for (const auto& qe : prog.quadratic_epigraphs()) xu[qe.epi] = xu[qe.var] * xu[qe.var];
      bool qp = polish_qp(xu, yu, zu);
      bool ls = !qp && polish_duals(xu, yu, zu);
      if (qp || ls) {
        Eigen::VectorXd su = h0 - cp.G * xu;
        sol.objective = beta_obj * cp.c.dot(xu) + prog.objective_constant();
        sol.dual_objective = -(b0.dot(yu) + h0.dot(zu)) + prog.objective_constant();
        sol.duality_gap = std::abs(sol.objective - sol.dual_objective);
        sol.rel_gap = sol.duality_gap / std::max({1.0, std::abs(sol.objective)});
        sol.dual_residual = (cp.A.transpose() * yu + cp.G.transpose() * zu + c0).norm() /
                            std::max(1.0, c0.norm());
        double viol = 0.0;
        for (int i = 0; i < K.l; ++i) viol = std::max(viol, -su[i]);
        int off = K.l;
        for (int qi : K.q) {
          viol = std::max(viol, -soc_residual(su, off, qi));
          off += qi;
        }
        sol.primal_residual =
            std::max((cp.A * (xu / beta_rhs) - cp.b).norm() / bh_norm, viol / (beta_rhs * bh_norm));
        if (qp || best.metric <= 3e2) st = SolveStatus::optimal;
        sol.status = st;
        attach_duals(xu / beta_rhs, yu / beta_obj, zu / beta_obj, su / beta_rhs);
        return;
      }
    }
    if (st != SolveStatus::optimal && best.metric <= 30.0) st = SolveStatus::optimal;
    sol.status = st;
    attach_duals(xs, ys, zs, ss);
  };

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    sol.iterations = iter;

    Eigen::VectorXd Rx = cp.A.transpose() * y + cp.G.transpose() * z + cp.c * tau;
    Eigen::VectorXd Ry = cp.A * x - cp.b * tau;
    Eigen::VectorXd Rz = cp.G * x - cp.h * tau + s;
    double Rtau = kappa + cp.c.dot(x) + cp.b.dot(y) + cp.h.dot(z);
    double mu = (s.dot(z) + tau * kappa) / nu;

    // Convergence on the de-homogenized point, in the caller's units.
    double pres = std::hypot(Ry.norm(), Rz.norm()) / tau / bh_norm;
    double dres = Rx.norm() / tau / c_norm;
    double unscale = beta_rhs * beta_obj;
    double pcost = unscale * cp.c.dot(x) / tau;
    double dcost = -unscale * (cp.b.dot(y) + cp.h.dot(z)) / tau;
    double gap = unscale * s.dot(z) / (tau * tau);
    double relgap = gap / std::max({1.0, std::abs(pcost), std::abs(dcost)});
    if (opts.verbose) {
      // one line per iteration keeps the trace readable in DLRM_LOG mode
      std::fprintf(stderr, "socp iter %2d: pres %.2e dres %.2e gap %.2e tau %.2e kappa %.2e\n",
                   iter, pres, dres, gap, tau, kappa);
    }
    // A single figure of merit aligned with the convergence test below:
    // <= 1 means converged.
    double metric = std::max({pres / opts.feastol, dres / opts.feastol,
                              std::min(gap / opts.abstol, relgap / opts.reltol)});
    if (metric < best.metric) {
      best = {x, y, z, s, tau, kappa, metric};
      stall = 0;
    } else {
      ++stall;
    }
    if (metric <= 1.0) {
      best = {x, y, z, s, tau, kappa, metric};
      finish_optimal(SolveStatus::optimal);
      return sol;
    }
    if (iter > 8 && (metric > 1e4 * best.metric || stall >= 6)) {
      finish_optimal(SolveStatus::numerical_failure);
      return sol;
    }

    // Certificates of infeasibility / unboundedness.
    double by_hz = cp.b.dot(y) + cp.h.dot(z);
    if (tau <= 1e-8 * std::max(1.0, kappa) || mu <= opts.abstol * 1e-2) {
      if (by_hz < -1e-12) {
        double scale = -by_hz;
        if ((cp.A.transpose() * y + cp.G.transpose() * z).norm() <= opts.feastol * 1e3 * scale * c_norm) {
          sol.status = SolveStatus::infeasible;
          attach_duals(x / std::max(tau, 1e-300), y / scale, z / scale, s / std::max(tau, 1e-300));
          return sol;
        }
      }
      double cx = cp.c.dot(x);
      if (cx < -1e-12) {
        double scale = -cx;
        if (std::hypot((cp.A * x).norm(), (cp.G * x + s).norm()) <=
            opts.feastol * 1e3 * scale * bh_norm) {
          sol.status = SolveStatus::unbounded;
          attach_duals(x / scale, y, z, s / scale);
          return sol;
        }
      }
    }

    if (!W.compute(K, s, z)) {
      sol.status = SolveStatus::numerical_failure;
      finish_optimal(SolveStatus::numerical_failure);
      return sol;
    }
    Eigen::VectorXd lambda = W.apply(z);
    if (!kkt.factor(cp, W, 1e-11)) {
      sol.status = SolveStatus::numerical_failure;
      return sol;
    }

    // Common second solve: K3 d2 = (-c, b, h).
    Eigen::VectorXd rhs2(n + p + m);
    rhs2.head(n) = -cp.c;
    rhs2.segment(n, p) = cp.b;
    rhs2.tail(m) = cp.h;
    Eigen::VectorXd d2 = kkt.solve(rhs2);

    auto direction = [&](double sigma, const Eigen::VectorXd* corr_s, double corr_tk,
                         Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                         Eigen::VectorXd& ds, double& dtau, double& dkappa) {
      Eigen::VectorXd bs = -jordan_prod(K, lambda, lambda);
      if (corr_s) bs -= *corr_s;
      if (sigma > 0) bs += sigma * mu * cone_identity(K);
      double bk = -tau * kappa + sigma * mu - corr_tk;

      double rfac = 1.0 - sigma;
      Eigen::VectorXd wdiv = W.apply(jordan_div(K, lambda, bs));
      Eigen::VectorXd rhs1(n + p + m);
      rhs1.head(n) = -rfac * Rx;
      rhs1.segment(n, p) = -rfac * Ry;
      rhs1.tail(m) = -rfac * Rz - wdiv;
      Eigen::VectorXd d1 = kkt.solve(rhs1);

      double num = -rfac * Rtau - bk / tau -
                   (cp.c.dot(d1.head(n)) + cp.b.dot(d1.segment(n, p)) + cp.h.dot(d1.tail(m)));
      double den =
          cp.c.dot(d2.head(n)) + cp.b.dot(d2.segment(n, p)) + cp.h.dot(d2.tail(m)) - kappa / tau;
      dtau = num / den;
      dx = d1.head(n) + dtau * d2.head(n);
      dy = d1.segment(n, p) + dtau * d2.segment(n, p);
      dz = d1.tail(m) + dtau * d2.tail(m);
      ds = wdiv - W.apply_sq(dz);
      dkappa = (bk - kappa * dtau) / tau;
    };

    Eigen::VectorXd dxa, dya, dza, dsa;
    double dta = 0, dka = 0;
    direction(0.0, nullptr, 0.0, dxa, dya, dza, dsa, dta, dka);

    auto step_bound = [&](const Eigen::VectorXd& ds_, const Eigen::VectorXd& dz_, double dt_,
                          double dk_) {
      double a = std::min(max_step(K, s, ds_), max_step(K, z, dz_));
      if (dt_ < 0) a = std::min(a, -tau / dt_);
      if (dk_ < 0) a = std::min(a, -kappa / dk_);
      return a;
    };

    double alpha_aff = std::min(1.0, step_bound(dsa, dza, dta, dka));
    double sigma = std::pow(1.0 - alpha_aff, 3);
    sigma = std::clamp(sigma, 0.0, 0.999);

    Eigen::VectorXd corr = jordan_prod(K, W.apply_inv(dsa), W.apply(dza));
    double corr_tk = dta * dka;

    Eigen::VectorXd dx, dy, dz, ds;
    double dtau = 0, dkappa = 0;
    direction(sigma, &corr, corr_tk, dx, dy, dz, ds, dtau, dkappa);

    double alpha = 0.99 * step_bound(ds, dz, dtau, dkappa);
    alpha = std::min(alpha, 1.0);
    if (!std::isfinite(alpha) || alpha <= 1e-14) {
      finish_optimal(SolveStatus::numerical_failure);
      return sol;
    }

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;

    double renorm = 2.0 / (tau + kappa);
    if (renorm > 1e-8 && std::isfinite(renorm)) {
      x *= renorm;
      y *= renorm;
      z *= renorm;
      s *= renorm;
      tau *= renorm;
      kappa *= renorm;
    }

    if (!x.allFinite() || !z.allFinite() || tau <= 0) {
      finish_optimal(SolveStatus::numerical_failure);
      return sol;
    }
  }

  finish_optimal(SolveStatus::iteration_limit);
  return sol;
}

}  // namespace dlrm::socp
