#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "evplan/coverage.hpp"
#include "evplan/grid.hpp"
#include "evplan/rng.hpp"

namespace oracle {

/// Exhaustive search over the station binaries; for each pattern the flow part
/// is a min-cost flow solved by successive shortest paths. nullopt when no
/// pattern is feasible.
std::optional<double> brute_force_objective(const evplan::coverage::CoverageInstance& inst);

/// Random instance with n_new candidate sites, n_existing stations and n_buses
/// pool buses. Demands and caps are integers.
evplan::coverage::CoverageInstance random_instance(evplan::Rng& rng, std::size_t n_new, std::size_t n_existing,
                                                   std::size_t n_buses);

struct NewtonResult {
    std::vector<double> v_pu;
    std::vector<double> angle_rad;
    bool converged = false;
};

/// Full Newton-Raphson on the bus admittance matrix, polar coordinates.
NewtonResult newton_power_flow(const evplan::grid::Feeder& feeder, double tol = 1e-12, int max_iter = 30);

/// Random radial feeder with strictly positive impedances; bus ids shuffled so
/// that file order and tree order differ.
evplan::grid::Feeder random_feeder(evplan::Rng& rng, std::size_t n_buses, double max_load_kw);

}  // namespace oracle
