#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace evplan::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { LessEqual, GreaterEqual, Equal };

struct Row {
    std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
    std::string name;
};

/// minimize cost . x  subject to rows and lower <= x <= upper.
/// Lower bounds must be finite; upper bounds may be kInfinity.
struct LinearProgram {
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<Row> rows;

    std::size_t add_variable(double c, double lo, double hi);
    std::size_t add_row(Row row);
    std::size_t num_variables() const noexcept { return cost.size(); }
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(Status s) noexcept;

struct Options {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-10;
    std::size_t max_iterations = 200000;
};

struct Result {
    Status status = Status::Infeasible;
    double objective = 0.0;
    std::vector<double> x;
    std::size_t iterations = 0;
};

/// Two-phase primal simplex on a dense tableau with implicit variable bounds.
/// Dantzig pricing, falling back to Bland's rule after a run of degenerate
/// pivots.
Result solve(const LinearProgram& lp, const Options& options = {});

/// Deletion filter: a minimal subset of rows (by index) that is infeasible
/// together with the variable bounds. Empty if the program is feasible.
std::vector<std::size_t> irreducible_infeasible_rows(const LinearProgram& lp, const Options& options = {});

}  // namespace evplan::lp
