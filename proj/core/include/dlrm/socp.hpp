#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dlrm::socp {

struct LinTerm {
  int var = -1;
  double coeff = 0.0;
};

/// Sparse affine expression sum(coeff * x[var]) + constant.
struct LinExpr {
  std::vector<LinTerm> terms;
  double constant = 0.0;

  LinExpr& add(int var, double coeff) {
    if (coeff != 0.0) terms.push_back({var, coeff});
    return *this;
  }
  static LinExpr of(int var, double coeff = 1.0) {
    LinExpr e;
    e.add(var, coeff);
    return e;
  }
  static LinExpr constant_of(double c) {
    LinExpr e;
    e.constant = c;
    return e;
  }
};

/// ||u(x)||_2 <= t(x)
struct SocBlock {
  LinExpr t;
  std::vector<LinExpr> u;
};

enum class ConstraintKind { equality, inequality, soc };

struct ConstraintInfo {
  ConstraintKind kind;
  std::string tag;
  int offset = 0;  // row offset within its section
  int size = 1;    // soc: 1 + dim(u)
};

/// Solver-agnostic conic program: linear objective, linear equalities,
/// linear inequalities (e(x) <= 0) and second-order cone blocks. Every
/// constraint carries exactly one tag used for dual lookup.
class ConicProgram {
 public:
  int add_variable(const std::string& name);
  int num_variables() const { return int(var_names_.size()); }
  const std::string& variable_name(int v) const { return var_names_.at(size_t(v)); }
  int variable(const std::string& name) const;  // -1 when absent

  void add_objective_term(int var, double coeff);
  void add_objective_constant(double c) { obj_constant_ += c; }

  void add_equality(LinExpr e, const std::string& tag);
  void add_inequality(LinExpr e, const std::string& tag);
  void add_soc(SocBlock blk, const std::string& tag);

  /// Adds variable t >= x^2 as a three-dimensional cone ||(2x, t-1)|| <= t+1.
  /// The caller attaches the objective coefficient to the returned variable.
  /// NegativeCurvature when curvature < 0; no cone is emitted when it is 0.
  int add_quadratic_epigraph(int var, double curvature, double obj_coeff, const std::string& tag);

  bool has_tag(const std::string& tag) const { return tag_lookup_.count(tag) > 0; }

  struct QuadEpigraph {
    int var = -1;
    int epi = -1;
    int cone = -1;  // index into cones()
  };
  /// Epigraph records created by add_quadratic_epigraph.
  const std::vector<QuadEpigraph>& quadratic_epigraphs() const { return quad_epis_; }

  // --- assembled views -------------------------------------------------
  const std::vector<double>& objective() const { return obj_; }
  double objective_constant() const { return obj_constant_; }
  const std::vector<std::pair<LinExpr, std::string>>& equalities() const { return eq_; }
  const std::vector<std::pair<LinExpr, std::string>>& inequalities() const { return ineq_; }
  const std::vector<std::pair<SocBlock, std::string>>& cones() const { return soc_; }

 private:
  void register_tag(const std::string& tag);

  std::vector<std::string> var_names_;
  std::map<std::string, int> var_lookup_;
  std::vector<double> obj_;
  double obj_constant_ = 0.0;
  std::vector<std::pair<LinExpr, std::string>> eq_;
  std::vector<std::pair<LinExpr, std::string>> ineq_;
  std::vector<std::pair<SocBlock, std::string>> soc_;
  std::vector<QuadEpigraph> quad_epis_;
  std::map<std::string, int> tag_lookup_;
};

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

const char* status_name(SolveStatus s);

struct SolverOptions {
  double feastol = 1e-7;
  double abstol = 1e-7;   // absolute duality gap, objective units
  double reltol = 1e-11;  // relative duality gap
  int max_iters = 120;
  int refine_steps = 2;
  bool verbose = false;
};

/// Primal/dual answer. Dual sign convention: with the Lagrangian
///   L = c'x + sum_eq y * e(x) + sum_ineq z * e(x) + sum_soc z0*(||u||-t),
/// stationarity reads grad_x L = 0 and every inequality/cone dual is >= 0.
/// `dual` holds y for equalities, z for inequalities and z0 for cones;
/// `cone_dual` additionally carries the full cone dual (z0, z1).
struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  double objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  double rel_gap = 0.0;
  int iterations = 0;
  std::map<std::string, double> dual;
  std::map<std::string, Eigen::VectorXd> cone_dual;
  std::map<std::string, double> slack;  // ineq: -e(x); soc: t(x) - ||u(x)||

  double dual_of(const std::string& tag) const;
  double slack_of(const std::string& tag) const;
};

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts = {});

/// Text dump in conic benchmark form for cross-checks with external solvers.
void write_cbf(const ConicProgram& prog, std::ostream& os);

}  // namespace dlrm::socp
