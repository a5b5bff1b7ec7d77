#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace dlrm::grid {

struct Node {
  std::string id;
  std::vector<double> load_mw;  // one entry per period
};

struct Edge {
  std::string id;
  int from = -1;
  int to = -1;
  double susceptance = 0.0;
  double static_rating_mw = 0.0;
  std::string conductor_id;     // empty: no thermal model, static rating only
  std::string weather_series;   // empty: static rating only
  std::string site;             // ambient uncertainty site, may be empty
  double initial_temp_C = std::numeric_limits<double>::quiet_NaN();  // NaN: ambient equilibrium
};

struct Generator {
  std::string id;
  int node = -1;
  double c1 = 0.0;  // $/MWh
  double c2 = 0.0;  // $/MWh^2
  double p_min = 0.0;
  double p_max = 0.0;
  double ramp_up = 0.0;  // MW per period
  double ramp_dn = 0.0;
  double emission_kg_per_kwh = 0.0;
};

struct WindFarm {
  std::string id;
  int node = -1;
  std::vector<double> forecast_mw;  // one entry per period
  double air_density = 1.225;
  double rotor_area_m2 = 0.0;
  double capacity_mw = std::numeric_limits<double>::infinity();
  std::string site;
};

/// Ambient forecast-error description carried by the case file. Each site
/// contributes a (wind speed, wind direction, ambient temperature) error
/// block; cross-site correlation couples same-variable pairs, or a dense
/// matrix may be given directly.
struct AmbientSite {
  std::string id;
  double sigma_wind = 0.0;
  double sigma_dir = 0.0;
  double sigma_temp = 0.0;
};

struct SiteCorrelation {
  std::string a;
  std::string b;
  double rho = 0.0;
};

struct UncertaintySpec {
  std::vector<AmbientSite> sites;
  std::vector<SiteCorrelation> correlations;
  Eigen::MatrixXd dense;  // optional; rows = 3 * sites.size()
  std::map<std::string, double> sigma_le_override;  // per edge id, MW
};

struct SystemCase {
  std::string name;
  int horizon = 1;
  double period_s = 900.0;
  int slack = -1;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<Generator> generators;
  std::vector<WindFarm> wind_farms;
  UncertaintySpec uncertainty;

  int node_index(const std::string& id) const;
  int edge_index(const std::string& id) const;
  void validate() const;  // throws ValidationError naming the offending field
};

struct PtdfMatrix {
  Eigen::MatrixXd S;  // edges x nodes, slack column zero
  int slack = -1;
};

/// PTDF from the reduced nodal susceptance matrix. SingularNetwork when the
/// graph is disconnected.
PtdfMatrix ptdf(const SystemCase& cs);

/// f = S * injections. Injections must balance to zero within 1e-6 MW.
Eigen::VectorXd nodal_flows(const PtdfMatrix& S, const Eigen::VectorXd& injections);

}  // namespace dlrm::grid
