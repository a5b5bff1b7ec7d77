#pragma once

#include <Eigen/Dense>
#include <string>

#include "dlrm/grid.hpp"
#include "dlrm/socp.hpp"
#include "dlrm/uncertainty.hpp"

namespace dlrm::market {

enum class RatingMode { slr, dlr, cc_dlr };

RatingMode parse_mode(const std::string& s);
const char* mode_name(RatingMode m);

/// Secondary objective weight pinning degenerate reserves and participation
/// factors so duals are reproducible.
inline constexpr double kTieBreak = 1e-8;

struct SinglePeriodConfig {
  double epsilon = 0.05;
  RatingMode mode = RatingMode::cc_dlr;
  double delta() const;  // normal quantile of 1-epsilon; requires 0 < epsilon < 0.5
};

/// Per-period inputs, already reduced to vectors over nodes/edges/generators.
struct SingleInputs {
  const grid::SystemCase* cs = nullptr;
  const grid::PtdfMatrix* ptdf = nullptr;
  Eigen::VectorXd load;       // per node
  Eigen::VectorXd wind_node;  // per node, forecast aggregated over farms
  Eigen::VectorXd rating;     // per edge, the limit for the configured mode
  const uncert::JointCovariance* jc = nullptr;  // null only if no wind farms
};

struct SingleResult {
  socp::SolveStatus status = socp::SolveStatus::numerical_failure;
  Eigen::VectorXd p, alpha, r_up, r_dn;  // per generator
  Eigen::VectorXd flows;                 // per edge, deterministic component
  double objective = 0.0;
  double delta = 0.0;
  Eigen::VectorXd lmp;           // per node
  Eigen::VectorXd lmrp;          // per generator, from reserve-constraint duals
  Eigen::VectorXd lmrp_formula;  // per generator, from the alpha stationarity route
  bool degenerate_duals = false;
  socp::ConicSolution sol;
};

/// Tags: bal, alpha_sum, pmax[g], pmin[g], re_up[g], re_dn[g], alpha_nn[g],
/// fmax[e], fmin[e], epi_p[g], epi_a[g].
socp::ConicProgram build_single(const SingleInputs& in, const SinglePeriodConfig& cfg);

SingleResult solve_single(const SingleInputs& in, const SinglePeriodConfig& cfg,
                          const socp::SolverOptions& opts = {});

/// Fills lmp / lmrp / lmrp_formula from the tagged duals of result.sol.
void price_single(const SingleInputs& in, const SinglePeriodConfig& cfg, SingleResult& result);

/// Gradient of the flow-cone norm of edge e with respect to alpha, evaluated
/// at the given alpha (zero vector in deterministic modes). `upper` selects
/// the cone direction.
Eigen::VectorXd flow_cone_alpha_gradient(const SingleInputs& in, const SinglePeriodConfig& cfg,
                                         int edge, bool upper, const Eigen::VectorXd& alpha);

/// Deterministic flow of edge e as an affine function of generator outputs:
/// flow = coeffs' p + constant.
void flow_expression(const SingleInputs& in, int edge, Eigen::VectorXd* coeffs, double* constant);

}  // namespace dlrm::market
