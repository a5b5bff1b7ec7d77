#include "dlrm/case_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dlrm/errors.hpp"

namespace dlrm::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::schema_error, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    fail(errc::schema_error, path + ": " + ex.what());
  }
  return j;
}

double num(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) fail(errc::schema_error, ctx + ": missing field '" + key + "'");
  if (!j[key].is_number()) fail(errc::schema_error, ctx + ": field '" + key + "' is not numeric");
  return j[key].get<double>();
}

double num_or(const json& j, const char* key, double dflt) {
  return j.contains(key) ? j[key].get<double>() : dflt;
}

std::string str(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_string())
    fail(errc::schema_error, ctx + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

thermal::ConductorSpec parse_conductor(const json& j, const std::string& ctx) {
  thermal::ConductorSpec c;
  c.diameter_m = num(j, "diameter_m", ctx);
  c.solar_absorptivity = num(j, "solar_absorptivity", ctx);
  c.emissivity = num(j, "emissivity", ctx);
  c.resistance_ref_ohm_per_m = num(j, "resistance_ref_ohm_per_m", ctx);
  c.temperature_ref_C = num(j, "temperature_ref_C", ctx);
  c.resistance_ambient_ohm_per_m = num(j, "resistance_ambient_ohm_per_m", ctx);
  c.temp_coeff_resistance_per_C = num(j, "temp_coeff_resistance_per_C", ctx);
  c.heat_capacity_J_per_m_C = num(j, "heat_capacity_J_per_m_C", ctx);
  c.max_temp_C = num(j, "max_temp_C", ctx);
  c.voltage_kV = num(j, "voltage_kV", ctx);
  c.validate(ctx);
  return c;
}

std::map<std::string, thermal::ConductorSpec> parse_conductor_map(const json& j) {
  std::map<std::string, thermal::ConductorSpec> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key()] = parse_conductor(it.value(), "conductor " + it.key());
  return out;
}

}  // namespace

std::map<std::string, thermal::ConductorSpec> load_conductors_json(const std::string& path) {
  return parse_conductor_map(read_json(path));
}

grid::SystemCase load_case(const std::string& path) {
  json j = read_json(path);
  grid::SystemCase cs;
  cs.name = j.value("name", fs::path(path).stem().string());
  cs.horizon = int(num_or(j, "horizon", 1));
  cs.period_s = num_or(j, "period_s", 900.0);

  if (!j.contains("nodes") || !j["nodes"].is_array())
    fail(errc::schema_error, "case: missing 'nodes' array");
  for (const auto& n : j["nodes"]) {
    grid::Node node;
    node.id = str(n, "id", "node");
    if (n.contains("load_mw") && n["load_mw"].is_array())
      node.load_mw = n["load_mw"].get<std::vector<double>>();
    else
      node.load_mw.assign(size_t(cs.horizon), num_or(n, "load_mw", 0.0));
    cs.nodes.push_back(std::move(node));
  }
  std::string slack_id = str(j, "slack", "case");
  cs.slack = cs.node_index(slack_id);
  if (cs.slack < 0) fail(errc::validation_error, "case: slack node '" + slack_id + "' unknown");

  for (const auto& e : j.value("edges", json::array())) {
    grid::Edge edge;
    edge.id = str(e, "id", "edge");
    edge.from = cs.node_index(str(e, "from", "edge " + edge.id));
    edge.to = cs.node_index(str(e, "to", "edge " + edge.id));
    if (edge.from < 0 || edge.to < 0)
      fail(errc::validation_error, "edge " + edge.id + ": endpoint unknown");
    edge.susceptance = num(e, "susceptance", "edge " + edge.id);
    edge.static_rating_mw = num(e, "static_rating_mw", "edge " + edge.id);
    edge.conductor_id = e.value("conductor", "");
    edge.weather_series = e.value("weather_series", "");
    edge.site = e.value("site", "");
    edge.initial_temp_C = num_or(e, "initial_temp_C", std::numeric_limits<double>::quiet_NaN());
    cs.edges.push_back(std::move(edge));
  }

  for (const auto& g : j.value("generators", json::array())) {
    grid::Generator gen;
    gen.id = str(g, "id", "generator");
    gen.node = cs.node_index(str(g, "node", "generator " + gen.id));
    if (gen.node < 0) fail(errc::validation_error, "generator " + gen.id + ": node unknown");
    gen.c1 = num(g, "c1", "generator " + gen.id);
    gen.c2 = num_or(g, "c2", 0.0);
    gen.p_min = num_or(g, "p_min", 0.0);
    gen.p_max = num(g, "p_max", "generator " + gen.id);
    gen.ramp_up = num_or(g, "ramp_up", gen.p_max);
    gen.ramp_dn = num_or(g, "ramp_dn", gen.p_max);
    gen.emission_kg_per_kwh = num_or(g, "emission_kg_per_kwh", 0.0);
    cs.generators.push_back(std::move(gen));
  }

  for (const auto& w : j.value("wind_farms", json::array())) {
    grid::WindFarm farm;
    farm.id = str(w, "id", "wind farm");
    farm.node = cs.node_index(str(w, "node", "wind farm " + farm.id));
    if (farm.node < 0) fail(errc::validation_error, "wind farm " + farm.id + ": node unknown");
    if (!w.contains("forecast_mw") || !w["forecast_mw"].is_array())
      fail(errc::schema_error, "wind farm " + farm.id + ": missing forecast_mw array");
    farm.forecast_mw = w["forecast_mw"].get<std::vector<double>>();
    farm.air_density = num_or(w, "air_density", 1.225);
    farm.rotor_area_m2 = num(w, "rotor_area_m2", "wind farm " + farm.id);
    farm.capacity_mw = num_or(w, "capacity_mw", std::numeric_limits<double>::infinity());
    farm.site = w.value("site", "");
    cs.wind_farms.push_back(std::move(farm));
  }

  if (j.contains("uncertainty")) {
    const auto& u = j["uncertainty"];
    for (const auto& s : u.value("sites", json::array())) {
      grid::AmbientSite site;
      site.id = str(s, "id", "site");
      site.sigma_wind = num_or(s, "sigma_wind", 0.0);
      site.sigma_dir = num_or(s, "sigma_dir", 0.0);
      site.sigma_temp = num_or(s, "sigma_temp", 0.0);
      cs.uncertainty.sites.push_back(std::move(site));
    }
    for (const auto& c : u.value("correlations", json::array())) {
      grid::SiteCorrelation corr;
      corr.a = str(c, "a", "correlation");
      corr.b = str(c, "b", "correlation");
      corr.rho = num(c, "rho", "correlation");
      cs.uncertainty.correlations.push_back(std::move(corr));
    }
    if (u.contains("dense")) {
      auto rows = u["dense"].get<std::vector<std::vector<double>>>();
      int n = int(rows.size());
      cs.uncertainty.dense.resize(n, n);
      for (int r = 0; r < n; ++r) {
        if (int(rows[size_t(r)].size()) != n)
          fail(errc::schema_error, "uncertainty: dense matrix is not square");
        for (int col = 0; col < n; ++col) cs.uncertainty.dense(r, col) = rows[size_t(r)][size_t(col)];
      }
    }
    if (u.contains("sigma_le_override"))
      for (auto it = u["sigma_le_override"].begin(); it != u["sigma_le_override"].end(); ++it)
        cs.uncertainty.sigma_le_override[it.key()] = it.value().get<double>();
  }

  cs.validate();
  return cs;
}

std::vector<thermal::WeatherSample> load_weather_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::schema_error, "cannot open weather file " + path);
  std::string line;
  if (!std::getline(in, line)) fail(errc::schema_error, path + ": empty weather file");

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  auto header = split(line);
  const std::vector<std::string> expected = {"timestamp",  "wind_speed_m_s", "wind_dir_deg",
                                             "ambient_C",  "solar_W_m2",     "air_density"};
  if (header.size() < expected.size())
    fail(errc::schema_error, path + ": weather header has too few columns");
  for (size_t i = 0; i < expected.size(); ++i)
    if (header[i] != expected[i])
      fail(errc::schema_error,
           path + ": weather column " + std::to_string(i) + " is '" + header[i] +
               "', expected '" + expected[i] + "'");

  std::vector<thermal::WeatherSample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() < expected.size())
      fail(errc::schema_error, path + ":" + std::to_string(lineno) + ": short row");
    thermal::WeatherSample w;
    try {
      w.wind_speed_m_s = std::stod(cells[1]);
      w.wind_dir_deg = std::stod(cells[2]);
      w.ambient_temp_C = std::stod(cells[3]);
      w.solar_W_m2 = std::stod(cells[4]);
      w.air_density_kg_m3 = std::stod(cells[5]);
    } catch (const std::exception&) {
      fail(errc::schema_error, path + ":" + std::to_string(lineno) + ": non-numeric cell");
    }
    w.validate();
    out.push_back(w);
  }
  return out;
}

Scenario load_scenario(const std::string& case_path, const std::string& weather_path) {
  Scenario sc;
  json j = read_json(case_path);
  sc.cs = load_case(case_path);

  if (j.contains("conductors")) {
    sc.conductors = parse_conductor_map(j["conductors"]);
  }
  if (j.contains("conductors_file")) {
    fs::path p = fs::path(case_path).parent_path() / j["conductors_file"].get<std::string>();
    auto extra = load_conductors_json(p.string());
    sc.conductors.insert(extra.begin(), extra.end());
  }

  std::vector<std::string> series;
  for (const auto& e : sc.cs.edges)
    if (!e.weather_series.empty()) series.push_back(e.weather_series);
  std::sort(series.begin(), series.end());
  series.erase(std::unique(series.begin(), series.end()), series.end());

  if (!series.empty()) {
    if (weather_path.empty())
      fail(errc::schema_error, "case references weather series but no weather path given");
    if (fs::is_directory(weather_path)) {
      for (const auto& s : series) {
        fs::path p = fs::path(weather_path) / (s + ".csv");
        if (!fs::exists(p))
          fail(errc::schema_error, "weather series '" + s + "' not found at " + p.string());
        sc.weather[s] = load_weather_csv(p.string());
      }
    } else {
      auto shared = load_weather_csv(weather_path);
      for (const auto& s : series) sc.weather[s] = shared;
    }
  }
  return sc;
}

grid::SystemCase load_matpower_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::schema_error, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  auto matrix_of = [&](const std::string& name) -> std::vector<std::vector<double>> {
    auto pos = text.find("mpc." + name);
    if (pos == std::string::npos) return {};
    pos = text.find('[', pos);
    auto end = text.find(']', pos);
    if (pos == std::string::npos || end == std::string::npos)
      fail(errc::schema_error, path + ": malformed mpc." + name);
    std::string body = text.substr(pos + 1, end - pos - 1);
    std::vector<std::vector<double>> rows;
    std::stringstream ss(body);
    std::string rowline;
    while (std::getline(ss, rowline, ';')) {
      // strip comments
      auto cpos = rowline.find('%');
      if (cpos != std::string::npos) rowline = rowline.substr(0, cpos);
      std::stringstream rs(rowline);
      std::vector<double> row;
      double v;
      while (rs >> v) row.push_back(v);
      if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
  };

  auto bus = matrix_of("bus");
  auto branch = matrix_of("branch");
  auto gen = matrix_of("gen");
  auto gencost = matrix_of("gencost");
  if (bus.empty() || branch.empty()) fail(errc::schema_error, path + ": missing bus or branch data");

  grid::SystemCase cs;
  cs.name = fs::path(path).stem().string();
  cs.horizon = 1;
  std::map<int, int> busmap;
  for (const auto& row : bus) {
    grid::Node n;
    int id = int(row.at(0));
    n.id = "bus" + std::to_string(id);
    n.load_mw = {row.size() > 2 ? row[2] : 0.0};
    busmap[id] = int(cs.nodes.size());
    if (row.size() > 1 && int(row[1]) == 3) cs.slack = int(cs.nodes.size());
    cs.nodes.push_back(std::move(n));
  }
  if (cs.slack < 0) cs.slack = 0;

  int eix = 0;
  for (const auto& row : branch) {
    grid::Edge e;
    e.id = "br" + std::to_string(++eix);
    e.from = busmap.at(int(row.at(0)));
    e.to = busmap.at(int(row.at(1)));
    double x = row.size() > 3 ? row[3] : 0.0;
    if (x == 0.0) fail(errc::validation_error, path + ": branch with zero reactance");
    e.susceptance = 1.0 / x;
    double rate = row.size() > 5 ? row[5] : 0.0;
    e.static_rating_mw = rate > 0 ? rate : 1e6;
    cs.edges.push_back(std::move(e));
  }

  int gix = 0;
  for (size_t i = 0; i < gen.size(); ++i) {
    const auto& row = gen[i];
    grid::Generator g;
    g.id = "gen" + std::to_string(++gix);
    g.node = busmap.at(int(row.at(0)));
    g.p_max = row.size() > 8 ? row[8] : 0.0;
    g.p_min = row.size() > 9 ? row[9] : 0.0;
    g.ramp_up = g.p_max;
    g.ramp_dn = g.p_max;
    if (i < gencost.size()) {
      const auto& c = gencost[i];
      // polynomial model: [2 startup shutdown n cn ... c0]
      if (c.size() >= 4 && int(c[0]) == 2) {
        int n = int(c[3]);
        if (n >= 2) g.c1 = c[size_t(4 + n - 2)];
        if (n >= 3) g.c2 = c[size_t(4 + n - 3)];
      }
    }
    cs.generators.push_back(std::move(g));
  }
  cs.validate();
  return cs;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

market::SingleInputs Prepared::single_inputs(int t, market::RatingMode mode) const {
  market::SingleInputs in;
  in.cs = &scenario.cs;
  in.ptdf = &ptdf;
  in.load = load.col(t);
  in.wind_node = wind_node.col(t);
  in.rating.resize(rating_static.rows());
  for (int e = 0; e < rating_static.rows(); ++e)
    in.rating[e] = mode == market::RatingMode::slr
                       ? rating_static(e, t)
                       : (edge_dlr[size_t(e)] ? rating_dyn(e, t) : rating_static(e, t));
  in.jc = &jc[size_t(t)];
  return in;
}

Prepared prepare(Scenario scenario) {
  scenario.cs.validate();
  const auto& cs = scenario.cs;
  const int T = cs.horizon;
  const int nn = int(cs.nodes.size());
  const int ne = int(cs.edges.size());
  const int nf = int(cs.wind_farms.size());

  Prepared prep;
  prep.ptdf = grid::ptdf(cs);

  prep.load.resize(nn, T);
  for (int i = 0; i < nn; ++i)
    for (int t = 0; t < T; ++t) prep.load(i, t) = cs.nodes[size_t(i)].load_mw[size_t(t)];

  prep.wind_node = Eigen::MatrixXd::Zero(nn, T);
  prep.wind_farm.resize(nf, T);
  for (int k = 0; k < nf; ++k) {
    const auto& farm = cs.wind_farms[size_t(k)];
    for (int t = 0; t < T; ++t) {
      double w = std::min(farm.forecast_mw[size_t(t)], farm.capacity_mw);
      prep.wind_farm(k, t) = w;
      prep.wind_node(farm.node, t) += w;
    }
  }

  prep.env.assign(size_t(T), std::vector<std::optional<uncert::LineEnv>>(size_t(ne)));
  prep.rating_static.resize(ne, T);
  prep.rating_dyn.resize(ne, T);
  prep.mu.assign(size_t(ne), {});
  prep.t_init.assign(size_t(ne), std::numeric_limits<double>::quiet_NaN());
  prep.edge_dlr.assign(size_t(ne), false);

  for (int e = 0; e < ne; ++e) {
    const auto& edge = cs.edges[size_t(e)];
    for (int t = 0; t < T; ++t) prep.rating_static(e, t) = edge.static_rating_mw;
    bool has_thermal = !edge.conductor_id.empty() || scenario.conductors.count(edge.id) > 0;
    if (!has_thermal || edge.weather_series.empty()) {
      prep.rating_dyn.row(e) = prep.rating_static.row(e);
      continue;
    }
    std::string ckey = edge.conductor_id.empty() ? edge.id : edge.conductor_id;
    auto cit = scenario.conductors.find(ckey);
    if (cit == scenario.conductors.end())
      fail(errc::validation_error, "edge " + edge.id + ": conductor '" + ckey + "' unknown");
    auto wit = scenario.weather.find(edge.weather_series);
    if (wit == scenario.weather.end())
      fail(errc::validation_error,
           "edge " + edge.id + ": weather series '" + edge.weather_series + "' missing");
    if (int(wit->second.size()) < T)
      fail(errc::validation_error, "edge " + edge.id + ": weather series shorter than horizon");

    prep.edge_dlr[size_t(e)] = true;
    prep.mu[size_t(e)].resize(size_t(T));
    for (int t = 0; t < T; ++t) {
      uncert::LineEnv env{cit->second, wit->second[size_t(t)]};
      prep.rating_dyn(e, t) = thermal::steady_state_rating(env.spec, env.weather,
                                                           env.spec.max_temp_C);
      prep.mu[size_t(e)][size_t(t)] =
          thermal::evolution_coefficients(env.spec, env.weather, cs.period_s);
      prep.env[size_t(t)][size_t(e)] = std::move(env);
    }
    double t0 = cs.edges[size_t(e)].initial_temp_C;
    if (std::isnan(t0))
      t0 = thermal::equilibrium_temperature(cit->second, wit->second[0], 0.0);
    if (t0 > cit->second.max_temp_C)
      fail(errc::validation_error, "edge " + edge.id + ": initial temperature above the limit");
    prep.t_init[size_t(e)] = t0;
  }

  prep.ambient = uncert::build_ambient_model(cs.uncertainty);
  prep.sens.reserve(size_t(T));
  prep.jc.reserve(size_t(T));
  for (int t = 0; t < T; ++t) {
    std::vector<double> farm_speed(size_t(nf), 0.0);
    for (int k = 0; k < nf; ++k) {
      const auto& farm = cs.wind_farms[size_t(k)];
      farm_speed[size_t(k)] =
          uncert::wind_speed_from_power(farm.air_density, farm.rotor_area_m2,
                                        farm.forecast_mw[size_t(t)]);
    }
    prep.sens.push_back(
        uncert::sensitivities(cs, prep.ambient, prep.env[size_t(t)], farm_speed, cs.period_s));
    prep.jc.push_back(uncert::assemble_covariance(prep.ambient, prep.sens.back(), cs));
  }
  prep.scenario = std::move(scenario);
  return prep;
}

}  // namespace dlrm::io
