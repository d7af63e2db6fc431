#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evplan/lp.hpp"

namespace evplan::coverage {

class InstanceError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    bool operator==(const Matrix&) const = default;
};

/// Siting and sizing data. Sites 0..n_new-1 are candidate locations (also the
/// demand points); existing stations follow them in the combined station index.
struct CoverageInstance {
    std::vector<double> demand;        // per candidate site, ports
    std::size_t n_existing = 0;
    std::size_t n_buses = 0;
    double open_cost = 0.0;            // per new station
    double expand_cost = 0.0;          // per expanded existing station
    double port_cost = 0.0;            // per installed port
    Matrix dist_new;                   // demand point -> candidate site, km
    Matrix dist_existing;              // demand point -> existing station, km
    Matrix bus_distance;               // bus -> station (all stations), km
    Matrix voltage_priority;           // bus -> station (all stations)
    double new_cap = 0.0;              // port cap per new station
    double existing_cap = 0.0;         // added-port cap per existing station
    std::size_t max_new_stations = 0;
    double big_m = 0.0;

    std::size_t n_new() const noexcept { return demand.size(); }
    std::size_t n_stations() const noexcept { return demand.size() + n_existing; }

    bool operator==(const CoverageInstance&) const = default;
};

/// Throws InstanceError naming the first violated invariant.
void validate_instance(const CoverageInstance& inst);

/// Demands are rounded up to whole ports; values within 1e-9 of an integer
/// are not bumped.
double ceil_ports(double demand) noexcept;

enum class SolveStatus { Optimal, Infeasible, GapLimit };
const char* to_string(SolveStatus s) noexcept;

struct CoverageSolution {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> open_new;        // y1
    std::vector<double> expand;          // y2
    std::vector<double> grid_active;     // y3, all stations
    std::vector<double> voltage_active;  // y4, all stations
    Matrix flow_new;                     // x1: demand point -> candidate site
    Matrix flow_existing;                // x2: demand point -> existing station
    std::vector<double> ports_new;       // z1
    std::vector<double> ports_existing;  // z2
    double objective = 0.0;
    double bound = 0.0;
    std::size_t nodes = 0;
    double root_bound = 0.0;
    std::vector<std::string> infeasibility_witness;

    bool operator==(const CoverageSolution&) const = default;
};

/// Variable layout of the linearised model.
struct VariableMap {
    std::size_t n_new = 0;
    std::size_t n_existing = 0;

    std::size_t n_stations() const noexcept { return n_new + n_existing; }
    std::size_t y1(std::size_t j) const noexcept { return j; }
    std::size_t y2(std::size_t j) const noexcept { return n_new + j; }
    std::size_t y3(std::size_t j) const noexcept { return n_stations() + j; }
    std::size_t y4(std::size_t j) const noexcept { return 2 * n_stations() + j; }
    std::size_t x1(std::size_t i, std::size_t j) const noexcept { return 3 * n_stations() + i * n_new + j; }
    std::size_t x2(std::size_t i, std::size_t j) const noexcept {
        return 3 * n_stations() + n_new * n_new + i * n_existing + j;
    }
    std::size_t z1(std::size_t j) const noexcept { return 3 * n_stations() + n_new * n_stations() + j; }
    std::size_t z2(std::size_t j) const noexcept { return z1(0) + n_new + j; }

    std::size_t num_binaries() const noexcept { return 3 * n_stations(); }
    std::size_t num_flows() const noexcept { return n_new * n_stations(); }
    std::size_t num_capacities() const noexcept { return n_stations(); }
    std::size_t num_variables() const noexcept { return num_binaries() + num_flows() + num_capacities(); }
};

struct MilpModel {
    lp::LinearProgram lp;
    VariableMap vars;
    std::vector<std::size_t> binaries;  // variable indices, ascending
};

/// Linear objective plus big-M linearised constraints.
MilpModel build(const CoverageInstance& inst);

struct SolveOptions {
    double abs_gap = 1e-6;
    double time_limit_s = 60.0;
    std::size_t max_nodes = 200000;
    double integrality_tol = 1e-6;

    bool operator==(const SolveOptions&) const = default;
};

/// Best-bound branch and bound over the binaries, most-fractional branching
/// with lowest-index tie-break.
CoverageSolution solve(const MilpModel& model, const SolveOptions& options = {});
CoverageSolution solve(const CoverageInstance& inst, const SolveOptions& options = {});

/// Direct evaluation of the siting/sizing objective.
double evaluate_objective(const CoverageInstance& inst, const CoverageSolution& sol);

enum class ConstraintKind {
    Shape,
    Integrality,
    Nonnegativity,
    DemandSatisfaction,
    StationCapacity,
    PortCap,
    OpeningLimit,
    IndicatorLink,
    Objective,
};
const char* to_string(ConstraintKind k) noexcept;

struct Violation {
    ConstraintKind kind = ConstraintKind::Shape;
    std::size_t index = 0;
    double amount = 0.0;
    std::string message;
};

inline constexpr double kValidationTol = 1e-7;

/// Re-checks every constraint of the original (bilinear) formulation.
/// Infeasible solutions yield no violations: there is nothing to check.
std::vector<Violation> validate(const CoverageSolution& sol, const CoverageInstance& inst,
                                double tol = kValidationTol);

inline constexpr int kFormatVersion = 1;

nlohmann::json to_json(const CoverageInstance& inst);
CoverageInstance instance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CoverageSolution& sol);
CoverageSolution solution_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<Violation>& violations);

}  // namespace evplan::coverage
