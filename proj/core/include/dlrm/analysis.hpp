#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlrm/market_multi.hpp"
#include "dlrm/market_single.hpp"
#include "dlrm/prepared.hpp"

namespace dlrm::analysis {

/// Optimal self-schedule of one price-taking generator.
struct BestResponse {
  double profit = 0.0;
  Eigen::VectorXd p, r_up, r_dn;  // per period (single-period: size 1)
  double kkt_residual = 0.0;
};

/// max pi*p + tau_up*r_up + tau_dn*r_dn - c1*p - c2*p^2 over the capacity
/// band, reserves nonnegative. Always feasible. Up and down reserves carry
/// their own prices; the single-tau convenience overload pays both sides the
/// same.
BestResponse best_response_single(const grid::Generator& gen, double price_energy,
                                  double tau_up, double tau_dn);
BestResponse best_response_single(const grid::Generator& gen, double price_energy,
                                  double price_reserve);

/// Multi-period variant with ramp coupling; solved as a small conic program.
BestResponse best_response_multi(const grid::Generator& gen, const Eigen::VectorXd& price_energy,
                                 const Eigen::VectorXd& tau_up, const Eigen::VectorXd& tau_dn);
BestResponse best_response_multi(const grid::Generator& gen, const Eigen::VectorXd& price_energy,
                                 const Eigen::VectorXd& price_reserve);

struct GeneratorEquilibrium {
  std::string id;
  double dispatched_profit = 0.0;
  double best_profit = 0.0;
  double rel_gap = 0.0;  // (best - dispatched) / max(1, |best|)
};

struct EquilibriumReport {
  std::vector<GeneratorEquilibrium> generators;
  double balance_residual = 0.0;  // max over periods, MW
  double alpha_residual = 0.0;    // max over periods
  double max_rel_gap = 0.0;
};

EquilibriumReport verify_equilibrium_single(const io::Prepared& prep, int period,
                                            const market::SingleInputs& in,
                                            const market::SingleResult& res);

EquilibriumReport verify_equilibrium_multi(const io::Prepared& prep,
                                           const market::MultiResult& res);

struct LmeEntry {
  std::string node;
  int period = 0;
  double lme_kg_per_kwh = 0.0;
  bool no_marginal_unit = false;
  std::vector<std::string> marginal_units;
};

struct LmeReport {
  std::vector<LmeEntry> entries;
  const LmeEntry& at(const std::string& node, int period) const;
};

/// Marginal units are generators strictly inside their capacity band net of
/// reserves (tolerance 1e-4 * p_max). A node takes the output-weighted
/// emission rate of its local marginal units; nodes without one match the
/// system marginal unit whose marginal cost equals the nodal price, and carry
/// a flag (zero rate) when none matches.
LmeReport lme_single(const io::Prepared& prep, const market::SingleResult& res);
LmeReport lme_multi(const io::Prepared& prep, const market::MultiResult& res);

struct ViolationRow {
  std::string constraint;
  std::int64_t violations = 0;
  std::int64_t samples = 0;
  double rate = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct ValidationReport {
  std::vector<ViolationRow> rows;
  double max_rate = 0.0;
};

/// Gaussian resampling of the recourse model: empirical violation rates of
/// every reserve and flow chance constraint.
ValidationReport monte_carlo_validate_single(const io::Prepared& prep, int period,
                                             const market::SingleInputs& in,
                                             const market::SingleResult& res, int n_samples,
                                             std::uint64_t seed);

/// Multi-period validation: linear thermal-reserve recursion rates per
/// (edge, period) plus nonlinear re-simulation of conductor temperatures
/// through the fine-step integrator under perturbed weather and flows.
ValidationReport monte_carlo_validate_multi(const io::Prepared& prep,
                                            const market::MultiPeriodConfig& cfg,
                                            const market::MultiResult& res, int n_samples,
                                            std::uint64_t seed, double fine_dt_s = 60.0);

struct StationarityReport {
  double max_scaled_residual = 0.0;
  std::vector<std::pair<std::string, double>> residuals;  // variable -> scaled residual
};

/// Residuals of the dispatch/recourse/reserve stationarity conditions at the
/// returned primal/dual point, scaled by the largest participating term.
StationarityReport stationarity_single(const io::Prepared& prep,
                                       const market::SinglePeriodConfig& cfg,
                                       const market::SingleInputs& in,
                                       const market::SingleResult& res);

StationarityReport stationarity_multi(const io::Prepared& prep,
                                      const market::MultiPeriodConfig& cfg,
                                      const market::MultiResult& res);

}  // namespace dlrm::analysis
