#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evplan/coverage.hpp"
#include "evplan/demand.hpp"
#include "evplan/geo.hpp"
#include "evplan/grid.hpp"
#include "evplan/power_flow.hpp"

namespace evplan::pipeline {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitIngest = 3,
    kExitModel = 4,
    kExitInfeasible = 5,
    kExitViolations = 6,
};

/// Error raised by a pipeline stage; carries the stage name and exit code.
class PipelineError : public std::runtime_error {
  public:
    PipelineError(std::string stage, int exit_code, const std::string& message);

    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

  private:
    std::string stage_;
    int exit_code_;
};

struct Seeds {
    std::uint64_t smote = 1;
    std::uint64_t gbt = 2;
    std::uint64_t solver = 3;

    bool operator==(const Seeds&) const = default;
};

struct PipelineConfig {
    geo::BoundingBox bbox;
    double cell_km = 2.0;
    bool use_poi_counts = false;
    std::string poi_csv;
    std::string charger_csv;
    std::string feeder_file;  // empty selects the synthetic feeder
    grid::SyntheticFeederParams synthetic_feeder;
    demand::GbtParams gbt;
    double train_share = 0.7;
    std::size_t smote_k = 5;
    double open_cost = 50.0;    // thousands of USD
    double expand_cost = 10.0;
    double port_cost = 3.0;
    double new_cap = 20.0;
    double existing_cap = 10.0;
    std::size_t max_new_stations = 10;
    double screening_threshold = grid::kDefaultScreeningThreshold;
    double validation_v_limit = power_flow::kDefaultVoltageLimit;
    double kw_per_port = power_flow::kDefaultKwPerPort;
    double charger_power_factor = 1.0;
    Seeds seeds;
    coverage::SolveOptions solver;
    bool emit_profiles = true;
    std::string output_dir = "out";

    /// Directory relative paths are resolved against.
    std::filesystem::path base_dir = ".";

    std::filesystem::path resolve(const std::string& p) const;
    bool operator==(const PipelineConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// PipelineError(stage "config"). Missing keys take their defaults; an omitted
/// expansion cost defaults to a fifth of the opening cost.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& c);

// ---------------------------------------------------------------------------
// Stages. Each throws PipelineError tagged with its stage name.

struct IngestResult {
    geo::CellGrid grid;
    std::vector<geo::ChargerSite> chargers;  // inside the box
    std::size_t pois = 0;
    geo::AssignmentStats dropped;
    std::size_t chargers_rejected = 0;
};

IngestResult ingest(const PipelineConfig& c);

struct TrainResult {
    demand::GbtModel model;
    demand::BalanceResult balance;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    nlohmann::json metrics;  // {"train": {...}, "test": {...}}
};

TrainResult train(const PipelineConfig& c, const IngestResult& in);

std::vector<demand::DemandEstimate> predict(const demand::GbtModel& model, const PipelineConfig& c,
                                            const IngestResult& in);

struct NetworkResult {
    grid::Feeder feeder;        // georegistered, base loads plus existing chargers
    power_flow::PowerFlowResult base_flow;
    std::vector<geo::GeoPoint> stations;  // candidate sites then existing chargers
    grid::GridMatrices matrices;
    coverage::CoverageInstance instance;
};

NetworkResult network(const PipelineConfig& c, const IngestResult& in,
                      const std::vector<demand::DemandEstimate>& estimates);

coverage::CoverageSolution solve(const PipelineConfig& c, const coverage::CoverageInstance& instance);

struct GridCheck {
    grid::Feeder post_feeder;
    power_flow::PowerFlowResult post_flow;
    power_flow::ValidationReport report;
    std::vector<std::string> station_bus;
};

GridCheck check_grid(const PipelineConfig& c, const NetworkResult& net, const coverage::CoverageSolution& plan);

// ---------------------------------------------------------------------------

struct PlanReport {
    nlohmann::json report;   // plan_report.json, deterministic
    nlohmann::json timings;  // run_timings.json, wall-clock
    int exit_code = kExitOk;
};

/// Runs every stage and writes all outputs into the configured output
/// directory. Infeasible plans and violations are reported, not thrown.
PlanReport run(const PipelineConfig& c);

/// GeoJSON polygons of the cell grid; demand is attached when given.
nlohmann::json cells_geojson(const geo::CellGrid& grid, const std::vector<demand::DemandEstimate>* estimates = nullptr);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace evplan::pipeline
