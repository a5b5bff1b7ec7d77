#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlrm/grid.hpp"
#include "dlrm/market_single.hpp"
#include "dlrm/thermal.hpp"
#include "dlrm/uncertainty.hpp"

namespace dlrm::io {

/// Raw inputs: case plus the conductor library and weather series it names.
struct Scenario {
  grid::SystemCase cs;
  std::map<std::string, thermal::ConductorSpec> conductors;
  std::map<std::string, std::vector<thermal::WeatherSample>> weather;
};

/// Everything the market builders need, assembled once per scenario:
/// PTDF, per-period loads and wind, ratings, evolution coefficients and the
/// per-period uncertainty model.
struct Prepared {
  Scenario scenario;
  grid::PtdfMatrix ptdf;
  Eigen::MatrixXd load;       // nodes x T
  Eigen::MatrixXd wind_node;  // nodes x T
  Eigen::MatrixXd wind_farm;  // farms x T
  std::vector<std::vector<std::optional<uncert::LineEnv>>> env;  // [t][e]
  Eigen::MatrixXd rating_static;  // edges x T
  Eigen::MatrixXd rating_dyn;     // edges x T (equals static where no thermal model)
  std::vector<std::vector<thermal::EvolutionCoefficients>> mu;  // [e][t], DLR edges only
  std::vector<double> t_init;                                   // per edge, NaN without DLR
  std::vector<bool> edge_dlr;
  uncert::AmbientErrorModel ambient;
  std::vector<uncert::SensitivitySet> sens;  // per period
  std::vector<uncert::JointCovariance> jc;   // per period

  int horizon() const { return scenario.cs.horizon; }
  const grid::SystemCase& cs() const { return scenario.cs; }

  /// Slice for the single-period market at period t.
  market::SingleInputs single_inputs(int t, market::RatingMode mode) const;
};

Prepared prepare(Scenario scenario);

}  // namespace dlrm::io
