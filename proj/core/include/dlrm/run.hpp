#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dlrm/market_single.hpp"

namespace dlrm::io {

struct RunConfig {
  std::string case_path;
  std::string weather_path;
  std::vector<market::RatingMode> modes = {market::RatingMode::cc_dlr};
  bool multi = false;
  double epsilon = 0.05;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  bool validate = false;
  int max_iterations = 10;
  int mc_samples = 20000;
  int verbosity = 0;  // from DLRM_LOG
};

/// Clears the market for every requested mode and writes, per mode,
/// dispatch.csv / prices.csv / emissions.csv / thermal.csv / duals.json
/// (validation.json with --validate) under <out>/<mode>/, plus a combined
/// versioned summary.json with cost/emission deltas against the first mode.
/// Returns 0 on success; on failure prints an error JSON and returns 2 for
/// input/schema problems, 1 otherwise.
int run(const RunConfig& cfg);

struct CompareRow {
  std::string label;
  std::string mode;
  double cost = 0.0;
  double emissions_kg = 0.0;
  double cost_delta_pct = 0.0;
  double emissions_delta_pct = 0.0;
};

/// Percentage deltas of completed runs against the first one. All runs must
/// be on the same case and horizon.
std::vector<CompareRow> compare(const std::vector<std::string>& out_dirs);

void write_compare_csv(const std::vector<CompareRow>& rows, std::ostream& os);

}  // namespace dlrm::io
