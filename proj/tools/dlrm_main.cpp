// Market clearing with dynamic line ratings: run a case in one or more rating
// modes, or compare completed runs.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "dlrm/errors.hpp"
#include "dlrm/run.hpp"

namespace {

int log_level_from_env() {
  const char* v = std::getenv("DLRM_LOG");
  if (!v) return 0;
  std::string s(v);
  if (s == "debug" || s == "2") return 2;
  if (s == "info" || s == "1") return 1;
  return std::atoi(v);
}

std::vector<dlrm::market::RatingMode> parse_modes(const std::string& csv) {
  std::vector<dlrm::market::RatingMode> modes;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) modes.push_back(dlrm::market::parse_mode(tok));
  }
  if (modes.empty()) dlrm::fail(dlrm::errc::validation_error, "no rating mode given");
  return modes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"electricity market clearing with dynamic line ratings"};
  app.require_subcommand(1);

  dlrm::io::RunConfig cfg;
  std::string modes_csv = "cc-dlr";
  auto* run_cmd = app.add_subcommand("run", "clear a case and write result artifacts");
  run_cmd->add_option("--case", cfg.case_path, "case JSON file")->required();
  run_cmd->add_option("--weather", cfg.weather_path,
                      "weather CSV file or directory of <series>.csv files");
  run_cmd->add_option("--mode", modes_csv, "rating modes, comma separated (slr|dlr|cc-dlr)");
  run_cmd->add_flag("--multi", cfg.multi, "multi-period clearing over the case horizon");
  run_cmd->add_option("--epsilon", cfg.epsilon, "chance-constraint level");
  run_cmd->add_option("--out", cfg.out_dir, "output directory");
  run_cmd->add_option("--seed", cfg.seed, "seed for Monte-Carlo validation");
  run_cmd->add_flag("--validate", cfg.validate, "run Monte-Carlo constraint validation");
  run_cmd->add_option("--iters", cfg.max_iterations, "max successive-linearization iterations");
  run_cmd->add_option("--samples", cfg.mc_samples, "Monte-Carlo sample count");

  std::vector<std::string> compare_dirs;
  auto* cmp_cmd = app.add_subcommand("compare", "tabulate deltas across completed runs");
  cmp_cmd->add_option("dirs", compare_dirs, "output directories of prior runs")
      ->expected(-2);

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) {
    try {
      cfg.modes = parse_modes(modes_csv);
    } catch (const dlrm::Error& ex) {
      std::cout << "{\"error\":\"" << dlrm::errc_name(ex.code()) << "\",\"message\":\""
                << ex.what() << "\"}" << std::endl;
      return 2;
    }
    cfg.verbosity = log_level_from_env();
    return dlrm::io::run(cfg);
  }

  try {
    auto rows = dlrm::io::compare(compare_dirs);
    dlrm::io::write_compare_csv(rows, std::cout);
    return 0;
  } catch (const dlrm::Error& ex) {
    std::cout << "{\"error\":\"" << dlrm::errc_name(ex.code()) << "\",\"message\":\"" << ex.what()
              << "\"}" << std::endl;
    return ex.code() == dlrm::errc::schema_error ? 2 : 1;
  }
}
