#pragma once

#include <string>

#include "dlrm/prepared.hpp"

namespace dlrm::io {

/// Case file (JSON). Conductors may be inline under "conductors" or in a
/// sibling file named by "conductors_file"; both map a key (conductor type or
/// line id) to the conductor parameters.
grid::SystemCase load_case(const std::string& path);

std::map<std::string, thermal::ConductorSpec> load_conductors_json(const std::string& path);

/// Weather CSV with header
///   timestamp,wind_speed_m_s,wind_dir_deg,ambient_C,solar_W_m2,air_density
std::vector<thermal::WeatherSample> load_weather_csv(const std::string& path);

/// Loads case + conductors + every weather series referenced by the case.
/// `weather_path` is a single CSV (shared by all series) or a directory
/// containing <series>.csv files.
Scenario load_scenario(const std::string& case_path, const std::string& weather_path);

/// Topology-only import of a MATPOWER .m case: buses, branches, generators
/// with polynomial costs when present. Thermal and weather data are supplied
/// separately.
grid::SystemCase load_matpower_topology(const std::string& path);

}  // namespace dlrm::io
