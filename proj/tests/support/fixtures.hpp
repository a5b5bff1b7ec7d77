#pragma once

#include <string>
#include <vector>

#include "dlrm/prepared.hpp"

namespace fixtures {

/// Drake-like bundle equivalent: Drake geometry/resistance with the heat
/// capacity of a six-conductor bundle, so 15-minute steps remain inside the
/// stability guard across the weather range used here.
dlrm::thermal::ConductorSpec drake_bundle();

dlrm::thermal::WeatherSample weather(double v, double dir_deg, double ta, double qs, double rho);

/// Hot, still, sunny reference point used by the frozen-value checks.
dlrm::thermal::WeatherSample summer_noon();

/// Three-bus congested case: cheap generation and wind behind a thermally
/// modeled bottleneck, expensive local generation at the load pocket.
/// Horizon 4 x 900 s.
dlrm::io::Scenario three_bus();

/// Same network with every ambient sigma zeroed.
dlrm::io::Scenario three_bus_certain();

/// 24 h of synthetic weather at 15-minute resolution.
std::vector<dlrm::thermal::WeatherSample> seasonal_profile(const std::string& season);

std::string fixture_dir();

}  // namespace fixtures
