#include "dlrm/grid.hpp"

#include <cmath>
#include <queue>
#include <set>

#include "dlrm/errors.hpp"

namespace dlrm::grid {

int SystemCase::node_index(const std::string& id) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return int(i);
  return -1;
}

int SystemCase::edge_index(const std::string& id) const {
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].id == id) return int(i);
  return -1;
}

void SystemCase::validate() const {
  if (horizon < 1) fail(errc::validation_error, "case: horizon must be >= 1");
  if (period_s <= 0) fail(errc::validation_error, "case: period_s must be positive");
  if (nodes.empty()) fail(errc::validation_error, "case: no nodes");
  if (slack < 0 || slack >= int(nodes.size()))
    fail(errc::validation_error, "case: slack node missing or unknown");

  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.id).second) fail(errc::validation_error, "case: duplicate node id " + n.id);
    if (int(n.load_mw.size()) != horizon)
      fail(errc::validation_error, "node " + n.id + ": load series length != horizon");
  }
  std::set<std::string> eids;
  for (const auto& e : edges) {
    if (!eids.insert(e.id).second) fail(errc::validation_error, "case: duplicate edge id " + e.id);
    if (e.from < 0 || e.from >= int(nodes.size()) || e.to < 0 || e.to >= int(nodes.size()))
      fail(errc::validation_error, "edge " + e.id + ": endpoint unknown");
    if (e.from == e.to) fail(errc::validation_error, "edge " + e.id + ": self loop");
    if (e.susceptance == 0.0) fail(errc::validation_error, "edge " + e.id + ": zero susceptance");
    if (e.static_rating_mw <= 0)
      fail(errc::validation_error, "edge " + e.id + ": static_rating_mw must be positive");
  }
  std::set<std::string> gids;
  for (const auto& g : generators) {
    if (!gids.insert(g.id).second)
      fail(errc::validation_error, "case: duplicate generator id " + g.id);
    if (g.node < 0 || g.node >= int(nodes.size()))
      fail(errc::validation_error, "generator " + g.id + ": node unknown");
    if (g.p_min > g.p_max)
      fail(errc::validation_error, "generator " + g.id + ": p_min > p_max");
    if (g.ramp_up < 0 || g.ramp_dn < 0)
      fail(errc::validation_error, "generator " + g.id + ": negative ramp limit");
    if (g.emission_kg_per_kwh < 0)
      fail(errc::validation_error, "generator " + g.id + ": negative emission rate");
  }
  for (const auto& w : wind_farms) {
    if (w.node < 0 || w.node >= int(nodes.size()))
      fail(errc::validation_error, "wind farm " + w.id + ": node unknown");
    if (int(w.forecast_mw.size()) != horizon)
      fail(errc::validation_error, "wind farm " + w.id + ": forecast series length != horizon");
    if (w.rotor_area_m2 <= 0)
      fail(errc::validation_error, "wind farm " + w.id + ": rotor_area_m2 must be positive");
    if (w.air_density <= 0)
      fail(errc::validation_error, "wind farm " + w.id + ": air_density must be positive");
  }

  // Connectivity over the undirected edge set.
  std::vector<std::vector<int>> adj(nodes.size());
  for (const auto& e : edges) {
    adj[size_t(e.from)].push_back(e.to);
    adj[size_t(e.to)].push_back(e.from);
  }
  std::vector<bool> seen(nodes.size(), false);
  std::queue<int> bfs;
  bfs.push(slack);
  seen[size_t(slack)] = true;
  size_t reached = 1;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    for (int v : adj[size_t(u)])
      if (!seen[size_t(v)]) {
        seen[size_t(v)] = true;
        ++reached;
        bfs.push(v);
      }
  }
  if (reached != nodes.size() && nodes.size() > 1)
    fail(errc::validation_error, "case: network is not connected");
}

PtdfMatrix ptdf(const SystemCase& cs) {
  const int n = int(cs.nodes.size());
  const int m = int(cs.edges.size());
  if (n < 1) fail(errc::singular_network, "ptdf: empty network");

  // Nodal susceptance matrix and edge incidence weighted by susceptance.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd Bf = Eigen::MatrixXd::Zero(m, n);
  for (int e = 0; e < m; ++e) {
    const auto& ed = cs.edges[size_t(e)];
    double b = ed.susceptance;
    B(ed.from, ed.from) += b;
    B(ed.to, ed.to) += b;
    B(ed.from, ed.to) -= b;
    B(ed.to, ed.from) -= b;
    Bf(e, ed.from) += b;
    Bf(e, ed.to) -= b;
  }

  std::vector<int> keep;
  keep.reserve(size_t(n - 1));
  for (int i = 0; i < n; ++i)
    if (i != cs.slack) keep.push_back(i);

  Eigen::MatrixXd Bred(n - 1, n - 1);
  for (int i = 0; i < n - 1; ++i)
    for (int j = 0; j < n - 1; ++j) Bred(i, j) = B(keep[size_t(i)], keep[size_t(j)]);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(Bred);
  if (n > 1 && !lu.isInvertible())
    fail(errc::singular_network, "ptdf: reduced susceptance matrix is singular (network disconnected?)");

  PtdfMatrix out;
  out.slack = cs.slack;
  out.S = Eigen::MatrixXd::Zero(m, n);
  if (n > 1) {
    Eigen::MatrixXd Bf_red(m, n - 1);
    for (int j = 0; j < n - 1; ++j) Bf_red.col(j) = Bf.col(keep[size_t(j)]);
    Eigen::MatrixXd Sred = Bf_red * lu.inverse();
    for (int j = 0; j < n - 1; ++j) out.S.col(keep[size_t(j)]) = Sred.col(j);
  }
  return out;
}

Eigen::VectorXd nodal_flows(const PtdfMatrix& S, const Eigen::VectorXd& injections) {
  if (injections.size() != S.S.cols())
    fail(errc::index_mismatch, "nodal_flows: injection vector size mismatch");
  double imbalance = injections.sum();
  if (std::abs(imbalance) > 1e-6)
    fail(errc::unbalanced_injection,
         "nodal_flows: injections sum to " + std::to_string(imbalance) + " MW");
  return S.S * injections;
}

}  // namespace dlrm::grid
