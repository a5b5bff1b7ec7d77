#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dlrm/prepared.hpp"

namespace dlrm::market {

struct MultiPeriodConfig {
  double epsilon = 0.05;
  RatingMode mode = RatingMode::cc_dlr;
  int max_iterations = 10;
  double temp_tol_C = 0.1;
  double delta() const;
};

/// Reference trajectory for the first-order expansion of the temperature
/// recursion. temps[e] spans horizon+1 boundaries (index 0 = initial state),
/// flows[e] spans the horizon periods.
struct LinearizationPoint {
  std::vector<std::vector<double>> temps;
  std::vector<std::vector<double>> flows;
};

/// One period's linearized recursion
///   T_{t+1} = a + b*T_t + c*f_t + mu' (mu_a, mu_b, mu_c, mu_d).
struct Kappa {
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
  Eigen::Vector4d mu = Eigen::Vector4d::Zero();
};

struct KappaSet {
  std::vector<std::vector<Kappa>> k;  // [edge][period]; empty rows for static edges
};

/// Exact at the reference point; the point must satisfy the nonlinear step map
/// within 1e-8 at every (edge, period).
KappaSet linearize_evolution(const io::Prepared& prep, const LinearizationPoint& point);

/// Internal flow-constraint flavors. `reference_box` is the deterministic
/// steady-rating problem used to seed the linearization.
enum class MultiFlowModel { static_box, reference_box, thermal };

struct MultiResult {
  socp::SolveStatus status = socp::SolveStatus::numerical_failure;
  Eigen::MatrixXd p, alpha, r_up, r_dn;  // generators x T
  Eigen::MatrixXd flows;                 // edges x T
  Eigen::MatrixXd temps;                 // edges x (T+1); simulated where not modeled
  Eigen::MatrixXd r_th;                  // edges x (T+1)
  double objective = 0.0;
  double delta = 0.0;
  Eigen::MatrixXd lmp;            // nodes x T
  Eigen::MatrixXd lmp_expanded;   // nodes x T, temporal dual expansion cross-check
  Eigen::MatrixXd lmrp;           // generators x T (reserve duals route)
  Eigen::MatrixXd lmrp_formula;   // generators x T (alpha stationarity route)
  bool degenerate_duals = false;
  int iterations = 0;
  bool converged = true;
  std::vector<double> iteration_dT;  // max |d temps| per linearization pass
  KappaSet kappas;
  LinearizationPoint reference;
  socp::ConicSolution sol;
};

/// Tags: bal[t], alpha_sum[t], pmax[g,t], pmin[g,t], re_up[g,t], re_dn[g,t],
/// alpha_nn[g,t], ramp_up[g,t], ramp_dn[g,t], flowdef[e,t], fmax[e,t],
/// fmin[e,t], trec[e,t], tcap[e,j], rth[e,t], epi_p[g,t], epi_a[g,t].
socp::ConicProgram build_multi(const io::Prepared& prep, const MultiPeriodConfig& cfg,
                               const KappaSet& kap, MultiFlowModel flow_model);

/// Solves at a fixed linearization and extracts primal values and prices.
MultiResult solve_multi_at(const io::Prepared& prep, const MultiPeriodConfig& cfg,
                           const KappaSet& kap, const LinearizationPoint& point,
                           const socp::SolverOptions& opts = {});

/// Full driver: reference from the deterministic steady-rating dispatch, then
/// relinearize at each solution until max |dT| <= temp_tol_C or the iteration
/// cap (converged=false on the cap, last iterate returned).
MultiResult successive_linearization(const io::Prepared& prep, const MultiPeriodConfig& cfg,
                                     const socp::SolverOptions& opts = {});

/// Simulates boundary temperatures for the given dispatch flows through the
/// one-step conservative map (edges x horizon+1; NaN rows for static edges).
Eigen::MatrixXd simulate_temperatures(const io::Prepared& prep, const Eigen::MatrixXd& flows);

/// Gradient of the thermal-reserve cone norm of (edge, period) with respect to
/// alpha at the given alpha.
Eigen::VectorXd thermal_cone_alpha_gradient(const io::Prepared& prep,
                                            const MultiPeriodConfig& cfg, const KappaSet& kap,
                                            int edge, int t, const Eigen::VectorXd& alpha);

/// Mapped parameter-error direction g = gamma_mu * kappa_mu for (edge, t),
/// restricted to the edge's site block.
Eigen::VectorXd parameter_error_direction(const io::Prepared& prep, const KappaSet& kap, int edge,
                                          int t);

}  // namespace dlrm::market
