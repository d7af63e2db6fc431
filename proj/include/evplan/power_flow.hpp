#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evplan/coverage.hpp"
#include "evplan/grid.hpp"

namespace evplan::power_flow {

class PowerFlowError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SolveOptions {
    double tolerance_pu = 1e-8;
    std::size_t max_iterations = 50;
};

/// Single-phase positive-sequence snapshot. Bus and line vectors follow the
/// feeder's order; powers are three-phase totals.
struct PowerFlowResult {
    std::vector<double> v_pu;
    std::vector<double> v_angle_rad;
    std::vector<double> i_amps;
    double losses_kw = 0.0;
    double losses_kvar = 0.0;
    double slack_p_kw = 0.0;
    double slack_q_kvar = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double last_mismatch_pu = 0.0;

    bool operator==(const PowerFlowResult&) const = default;
};

/// Backward/forward sweep with constant-power loads. The slack bus is held at
/// 1.0 pu, angle 0. Non-convergence is reported through `converged`.
/// Throws PowerFlowError for non-radial feeders or mixed voltage bases.
PowerFlowResult solve_bfs(const grid::Feeder& feeder, const SolveOptions& options = {});

inline constexpr double kDefaultKwPerPort = 6.0;

struct StationLoad {
    std::string bus;
    double ports = 0.0;
};

/// Adds one static load per station with ports > 0. The input is not modified.
grid::Feeder integrate_chargers(const grid::Feeder& feeder, const std::vector<StationLoad>& stations,
                                double kw_per_port = kDefaultKwPerPort, double power_factor = 1.0);

/// Station loads from a coverage plan: station j (combined index) sits on
/// station_bus[j]. New stations contribute only when opened, existing ones
/// only when expanded.
std::vector<StationLoad> station_loads(const coverage::CoverageSolution& plan,
                                       const std::vector<std::string>& station_bus);

inline constexpr double kDefaultVoltageLimit = 0.8;

struct BusMetric {
    std::string bus;
    double pre_v_pu = 0.0;
    double post_v_pu = 0.0;
};

struct LineMetric {
    std::string line;
    std::string from;
    std::string to;
    double ampacity_a = 0.0;
    double pre_i_a = 0.0;
    double post_i_a = 0.0;
};

struct ValidationReport {
    double min_v_pu = 0.0;
    std::vector<std::string> buses_below_limit;
    std::vector<std::string> lines_over_ampacity;
    std::vector<BusMetric> buses;
    std::vector<LineMetric> lines;

    bool ok() const noexcept { return buses_below_limit.empty() && lines_over_ampacity.empty(); }
};

/// Post-integration check: buses strictly below `v_limit` and lines strictly
/// above their ampacity. `feeder` supplies ids and ratings for both results.
ValidationReport validate_grid(const grid::Feeder& feeder, const PowerFlowResult& pre, const PowerFlowResult& post,
                               double v_limit = kDefaultVoltageLimit);

nlohmann::json to_json(const PowerFlowResult& r, const grid::Feeder& feeder);
nlohmann::json to_json(const ValidationReport& r);

std::string voltage_profile_csv(const ValidationReport& r);
std::string line_current_csv(const ValidationReport& r);

}  // namespace evplan::power_flow
