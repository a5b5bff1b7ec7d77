#include "dlrm/run.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "dlrm/analysis.hpp"
#include "dlrm/case_io.hpp"
#include "dlrm/errors.hpp"
#include "dlrm/market_multi.hpp"

namespace dlrm::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double period_hours(const grid::SystemCase& cs) { return cs.period_s / 3600.0; }

double total_emissions_kg(const grid::SystemCase& cs, const Eigen::MatrixXd& p) {
  double kg = 0.0;
  for (int g = 0; g < p.rows(); ++g)
    for (int t = 0; t < p.cols(); ++t)
      kg += cs.generators[size_t(g)].emission_kg_per_kwh * p(g, t) * period_hours(cs) * 1000.0;
  return kg;
}

struct ModeArtifacts {
  std::string mode;
  double objective = 0.0;
  double emissions_kg = 0.0;
  int iterations = 0;
  bool converged = true;
  std::string status;
};

void write_dispatch(const grid::SystemCase& cs, const Eigen::MatrixXd& p,
                    const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& r_up,
                    const Eigen::MatrixXd& r_dn, std::ostream& os) {
  os << "generator,t,p_mw,alpha,r_up_mw,r_dn_mw\n";
  for (int t = 0; t < p.cols(); ++t)
    for (int g = 0; g < p.rows(); ++g)
      os << cs.generators[size_t(g)].id << "," << t << "," << fmt(p(g, t)) << ","
         << fmt(alpha(g, t)) << "," << fmt(r_up(g, t)) << "," << fmt(r_dn(g, t)) << "\n";
}

void write_prices(const grid::SystemCase& cs, const Eigen::MatrixXd& lmp,
                  const Eigen::MatrixXd& lmrp, std::ostream& os) {
  os << "node,t,lmp,lmrp\n";
  for (int t = 0; t < lmp.cols(); ++t)
    for (int i = 0; i < lmp.rows(); ++i) {
      // node-level reserve price: output-weighted over the generators there
      // (zero where the node hosts none).
      double wsum = 0.0, acc = 0.0;
      for (int g = 0; g < lmrp.rows(); ++g)
        if (cs.generators[size_t(g)].node == i) {
          wsum += 1.0;
          acc += lmrp(g, t);
        }
      os << cs.nodes[size_t(i)].id << "," << t << "," << fmt(lmp(i, t)) << ","
         << fmt(wsum > 0 ? acc / wsum : 0.0) << "\n";
    }
}

void write_emissions(const analysis::LmeReport& rep, std::ostream& os) {
  os << "node,t,lme_kg_per_kwh,no_marginal_unit\n";
  for (const auto& e : rep.entries)
    os << e.node << "," << e.period << "," << fmt(e.lme_kg_per_kwh) << ","
       << (e.no_marginal_unit ? 1 : 0) << "\n";
}

void write_thermal(const grid::SystemCase& cs, const Eigen::MatrixXd& flows,
                   const Eigen::MatrixXd& rating, const Eigen::MatrixXd& temps,
                   const Eigen::MatrixXd& r_th, std::ostream& os) {
  os << "edge,t,flow_mw,rating_mw,temp_end_C,r_th_C\n";
  for (int t = 0; t < flows.cols(); ++t)
    for (int e = 0; e < flows.rows(); ++e)
      os << cs.edges[size_t(e)].id << "," << t << "," << fmt(flows(e, t)) << ","
         << fmt(rating(e, t)) << "," << fmt(temps(e, t + 1)) << "," << fmt(r_th(e, t + 1))
         << "\n";
}

json duals_json(const socp::ConicSolution& sol) {
  json j = json::object();
  for (const auto& [tag, v] : sol.dual) j[tag] = v;
  return j;
}

json validation_json(const analysis::ValidationReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"constraint", r.constraint},
                    {"violations", r.violations},
                    {"samples", r.samples},
                    {"rate", r.rate},
                    {"wilson_lo", r.wilson_lo},
                    {"wilson_hi", r.wilson_hi}});
  }
  return {{"rows", rows}, {"max_rate", rep.max_rate}};
}

}  // namespace

int run(const RunConfig& cfg) {
  try {
    Scenario sc = load_scenario(cfg.case_path, cfg.weather_path);
    Prepared prep = prepare(std::move(sc));
    const auto& cs = prep.cs();

    fs::create_directories(cfg.out_dir);
    socp::SolverOptions opts;
    opts.verbose = cfg.verbosity >= 2;

    json summary;
    summary["schema_version"] = 1;
    summary["case"] = cs.name;
    summary["horizon"] = cfg.multi ? cs.horizon : 1;
    summary["epsilon"] = cfg.epsilon;
    summary["seed"] = cfg.seed;
    summary["multi"] = cfg.multi;
    json results = json::object();

    std::vector<ModeArtifacts> arts;
    for (auto mode : cfg.modes) {
      ModeArtifacts art;
      art.mode = market::mode_name(mode);
      fs::path dir = fs::path(cfg.out_dir) / art.mode;
      fs::create_directories(dir);

      Eigen::MatrixXd p, alpha, r_up, r_dn, flows, temps, r_th, lmp, lmrp, cap;
      socp::ConicSolution sol;
      json extra = json::object();

      if (!cfg.multi) {
        market::SinglePeriodConfig mc;
        mc.epsilon = cfg.epsilon;
        mc.mode = mode;
        auto in = prep.single_inputs(0, mode);
        auto res = market::solve_single(in, mc, opts);
        art.status = socp::status_name(res.status);
        if (res.status != socp::SolveStatus::optimal)
          fail(errc::numerical_failure, "single-period clear (" + art.mode + "): " + art.status);
        art.objective = res.objective;
        p = res.p;
        alpha = res.alpha;
        r_up = res.r_up;
        r_dn = res.r_dn;
        flows = res.flows;
        cap = in.rating;
        lmp = res.lmp;
        lmrp = res.lmrp;
        sol = res.sol;
        temps = market::simulate_temperatures(prep, flows).leftCols(2);
        r_th = Eigen::MatrixXd::Zero(flows.rows(), 2);
        extra["lmrp_formula"] = std::vector<double>(res.lmrp_formula.data(),
                                                    res.lmrp_formula.data() + res.lmrp_formula.size());
        extra["degenerate_duals"] = res.degenerate_duals;
        art.iterations = 1;

        analysis::LmeReport lme = analysis::lme_single(prep, res);
        std::ofstream(dir / "emissions.csv") << "";
        {
          std::ofstream os(dir / "emissions.csv");
          write_emissions(lme, os);
        }
        if (cfg.validate) {
          auto val = analysis::monte_carlo_validate_single(prep, 0, in, res, cfg.mc_samples,
                                                           cfg.seed);
          std::ofstream os(dir / "validation.json");
          os << validation_json(val).dump(2) << "\n";
        }
      } else {
        market::MultiPeriodConfig mc;
        mc.epsilon = cfg.epsilon;
        mc.mode = mode;
        mc.max_iterations = cfg.max_iterations;
        auto res = market::successive_linearization(prep, mc, opts);
        art.status = socp::status_name(res.status);
        if (res.status != socp::SolveStatus::optimal)
          fail(errc::numerical_failure, "multi-period clear (" + art.mode + "): " + art.status);
        art.objective = res.objective;
        art.iterations = res.iterations;
        art.converged = res.converged;
        p = res.p;
        alpha = res.alpha;
        r_up = res.r_up;
        r_dn = res.r_dn;
        flows = res.flows;
        temps = res.temps;
        r_th = res.r_th;
        lmp = res.lmp;
        lmrp = res.lmrp;
        sol = res.sol;
        cap = mode == market::RatingMode::slr ? prep.rating_static : prep.rating_dyn;

        json dts = json::array();
        for (double d : res.iteration_dT) dts.push_back(d);
        extra["iteration_dT"] = dts;
        extra["converged"] = res.converged;
        extra["degenerate_duals"] = res.degenerate_duals;
        json lmpx = json::array();
        for (int t = 0; t < res.lmp_expanded.cols(); ++t)
          for (int i = 0; i < res.lmp_expanded.rows(); ++i)
            lmpx.push_back(res.lmp_expanded(i, t));
        extra["lmp_expanded"] = lmpx;

        analysis::LmeReport lme = analysis::lme_multi(prep, res);
        {
          std::ofstream os(dir / "emissions.csv");
          write_emissions(lme, os);
        }
        if (cfg.validate) {
          auto val =
              analysis::monte_carlo_validate_multi(prep, mc, res, cfg.mc_samples, cfg.seed);
          std::ofstream os(dir / "validation.json");
          os << validation_json(val).dump(2) << "\n";
        }
      }

      if (!cfg.multi) {
        // reshape vectors into 1-column matrices for the writers
        p.conservativeResize(p.rows(), 1);
        alpha.conservativeResize(alpha.rows(), 1);
        r_up.conservativeResize(r_up.rows(), 1);
        r_dn.conservativeResize(r_dn.rows(), 1);
        flows.conservativeResize(flows.rows(), 1);
        lmp.conservativeResize(lmp.rows(), 1);
        lmrp.conservativeResize(lmrp.rows(), 1);
        cap.conservativeResize(cap.rows(), 1);
      }

      art.emissions_kg = total_emissions_kg(cs, p);
      {
        std::ofstream os(dir / "dispatch.csv");
        write_dispatch(cs, p, alpha, r_up, r_dn, os);
      }
      {
        std::ofstream os(dir / "prices.csv");
        write_prices(cs, lmp, lmrp, os);
      }
      {
        std::ofstream os(dir / "thermal.csv");
        write_thermal(cs, flows, cap, temps, r_th, os);
      }
      {
        json dj;
        dj["duals"] = duals_json(sol);
        dj["extra"] = extra;
        std::ofstream os(dir / "duals.json");
        os << dj.dump(2) << "\n";
      }

      json mr;
      mr["objective"] = art.objective;
      mr["total_emissions_kg"] = art.emissions_kg;
      mr["status"] = art.status;
      mr["iterations"] = art.iterations;
      mr["converged"] = art.converged;
      if (!arts.empty()) {
        mr["cost_delta_pct"] = 100.0 * (art.objective - arts[0].objective) /
                               std::max(1e-12, std::abs(arts[0].objective));
        mr["emissions_delta_pct"] = 100.0 * (art.emissions_kg - arts[0].emissions_kg) /
                                    std::max(1e-12, std::abs(arts[0].emissions_kg));
      }
      results[art.mode] = mr;
      arts.push_back(art);
      if (cfg.verbosity >= 1)
        std::cerr << "mode " << art.mode << ": objective " << fmt(art.objective) << " ("
                  << art.status << ")\n";
    }

    summary["baseline_mode"] = arts.empty() ? "" : arts[0].mode;
    summary["results"] = results;
    std::ofstream os(fs::path(cfg.out_dir) / "summary.json");
    os << summary.dump(2) << "\n";
    return 0;
  } catch (const Error& ex) {
    json err{{"error", errc_name(ex.code())}, {"message", ex.what()}};
    std::cout << err.dump() << std::endl;
    return ex.code() == errc::schema_error ? 2 : 1;
  } catch (const std::exception& ex) {
    json err{{"error", "Unexpected"}, {"message", ex.what()}};
    std::cout << err.dump() << std::endl;
    return 1;
  }
}

std::vector<CompareRow> compare(const std::vector<std::string>& out_dirs) {
  if (out_dirs.size() < 2) fail(errc::case_mismatch, "compare needs at least two runs");
  std::vector<CompareRow> rows;
  std::string case_name;
  int horizon = -1;
  double base_cost = 0.0, base_em = 0.0;
  bool first = true;
  for (const auto& dir : out_dirs) {
    std::ifstream in(fs::path(dir) / "summary.json");
    if (!in) fail(errc::schema_error, "no summary.json under " + dir);
    json s;
    in >> s;
    if (first) {
      case_name = s.value("case", "");
      horizon = s.value("horizon", -1);
    } else if (s.value("case", "") != case_name || s.value("horizon", -1) != horizon) {
      fail(errc::case_mismatch, dir + ": run is on a different case or horizon");
    }
    for (auto it = s["results"].begin(); it != s["results"].end(); ++it) {
      CompareRow row;
      row.label = dir;
      row.mode = it.key();
      row.cost = it.value().value("objective", 0.0);
      row.emissions_kg = it.value().value("total_emissions_kg", 0.0);
      if (first) {
        base_cost = row.cost;
        base_em = row.emissions_kg;
        first = false;
      }
      row.cost_delta_pct = 100.0 * (row.cost - base_cost) / std::max(1e-12, std::abs(base_cost));
      row.emissions_delta_pct =
          100.0 * (row.emissions_kg - base_em) / std::max(1e-12, std::abs(base_em));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_compare_csv(const std::vector<CompareRow>& rows, std::ostream& os) {
  os << "run,mode,cost,emissions_kg,cost_delta_pct,emissions_delta_pct\n";
  for (const auto& r : rows)
    os << r.label << "," << r.mode << "," << fmt(r.cost) << "," << fmt(r.emissions_kg) << ","
       << fmt(r.cost_delta_pct) << "," << fmt(r.emissions_delta_pct) << "\n";
}

}  // namespace dlrm::io
