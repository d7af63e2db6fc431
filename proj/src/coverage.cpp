#include "evplan/coverage.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <sstream>

namespace evplan::coverage {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw InstanceError(what);
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
    require(m.rows == rows && m.cols == cols && m.data.size() == rows * cols,
            std::string(name) + " must be " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                std::to_string(m.rows) + "x" + std::to_string(m.cols));
}

void require_nonnegative(const Matrix& m, const char* name) {
    for (const double v : m.data) require(std::isfinite(v) && v >= 0.0, std::string(name) + " has a negative or non-finite entry");
}

double column_sum(const Matrix& m, std::size_t j) {
    double s = 0.0;
    for (std::size_t p = 0; p < m.rows; ++p) s += m(p, j);
    return s;
}

struct Node {
    std::vector<double> lower;
    std::vector<double> upper;
    double bound = 0.0;
    std::size_t id = 0;
    std::vector<double> x;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

CoverageSolution extract(const MilpModel& model, const std::vector<double>& x) {
    const auto& v = model.vars;
    CoverageSolution sol;
    auto bin = [&](std::size_t k) { return std::round(x[k]); };
    auto cont = [&](std::size_t k) { return std::abs(x[k]) < 1e-12 ? 0.0 : x[k]; };
    for (std::size_t j = 0; j < v.n_new; ++j) sol.open_new.push_back(bin(v.y1(j)));
    for (std::size_t j = 0; j < v.n_existing; ++j) sol.expand.push_back(bin(v.y2(j)));
    for (std::size_t j = 0; j < v.n_stations(); ++j) {
        sol.grid_active.push_back(bin(v.y3(j)));
        sol.voltage_active.push_back(bin(v.y4(j)));
    }
    sol.flow_new = Matrix(v.n_new, v.n_new);
    sol.flow_existing = Matrix(v.n_new, v.n_existing);
    for (std::size_t i = 0; i < v.n_new; ++i) {
        for (std::size_t j = 0; j < v.n_new; ++j) sol.flow_new(i, j) = cont(v.x1(i, j));
        for (std::size_t j = 0; j < v.n_existing; ++j) sol.flow_existing(i, j) = cont(v.x2(i, j));
    }
    for (std::size_t j = 0; j < v.n_new; ++j) sol.ports_new.push_back(cont(v.z1(j)));
    for (std::size_t j = 0; j < v.n_existing; ++j) sol.ports_existing.push_back(cont(v.z2(j)));
    return sol;
}

nlohmann::json matrix_json(const Matrix& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from(const nlohmann::json& j) {
    Matrix m;
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw InstanceError("matrix data length does not match its shape");
    return m;
}

}  // namespace

void validate_instance(const CoverageInstance& inst) {
    const std::size_t n1 = inst.n_new();
    const std::size_t nj = inst.n_stations();
    require(inst.expand_cost > 0.0, "expansion cost must be positive");
    require(inst.open_cost > inst.expand_cost, "opening a station must cost more than expanding one");
    require(std::isfinite(inst.port_cost) && inst.port_cost >= 0.0, "port cost must be nonnegative");
    for (const double d : inst.demand) require(std::isfinite(d) && d >= 0.0, "demands must be nonnegative");
    require_shape(inst.dist_new, n1, n1, "dist_new");
    require_shape(inst.dist_existing, n1, inst.n_existing, "dist_existing");
    require_shape(inst.bus_distance, inst.n_buses, nj, "bus_distance");
    require_shape(inst.voltage_priority, inst.n_buses, nj, "voltage_priority");
    require_nonnegative(inst.dist_new, "dist_new");
    require_nonnegative(inst.dist_existing, "dist_existing");
    require_nonnegative(inst.bus_distance, "bus_distance");
    for (const double v : inst.voltage_priority.data) require(std::isfinite(v), "voltage_priority has a non-finite entry");
    require(inst.new_cap > 0.0 && inst.existing_cap > 0.0, "port caps must be positive");
    require(inst.big_m >= std::max(inst.new_cap, inst.existing_cap), "big-M must be at least the largest port cap");
}

double ceil_ports(double demand) noexcept {
    if (!(demand > 0.0)) return 0.0;
    return std::ceil(demand - 1e-9);
}

const char* to_string(SolveStatus s) noexcept {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::GapLimit: return "GapLimit";
    }
    return "Unknown";
}

MilpModel build(const CoverageInstance& inst) {
    validate_instance(inst);
    MilpModel model;
    auto& v = model.vars;
    v.n_new = inst.n_new();
    v.n_existing = inst.n_existing;
    const std::size_t n1 = v.n_new;
    const std::size_t n2 = v.n_existing;
    const std::size_t nj = v.n_stations();
    auto& lp = model.lp;

    for (std::size_t j = 0; j < n1; ++j) lp.add_variable(inst.open_cost, 0.0, 1.0);
    for (std::size_t j = 0; j < n2; ++j) lp.add_variable(inst.expand_cost, 0.0, 1.0);
    for (std::size_t j = 0; j < nj; ++j) lp.add_variable(column_sum(inst.bus_distance, j), 0.0, 1.0);
    for (std::size_t j = 0; j < nj; ++j) lp.add_variable(column_sum(inst.voltage_priority, j), 0.0, 1.0);
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n1; ++j) lp.add_variable(inst.dist_new(i, j), 0.0, lp::kInfinity);
    }
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) lp.add_variable(inst.dist_existing(i, j), 0.0, lp::kInfinity);
    }
    for (std::size_t j = 0; j < nj; ++j) lp.add_variable(inst.port_cost, 0.0, lp::kInfinity);
    for (std::size_t k = 0; k < v.num_binaries(); ++k) model.binaries.push_back(k);

    auto idx = [](const char* name, std::size_t i) { return std::string(name) + "[" + std::to_string(i) + "]"; };

    for (std::size_t i = 0; i < n1; ++i) {
        lp::Row r{{}, lp::Sense::GreaterEqual, inst.demand[i], idx("demand", i)};
        for (std::size_t j = 0; j < n1; ++j) r.terms.emplace_back(v.x1(i, j), 1.0);
        for (std::size_t j = 0; j < n2; ++j) r.terms.emplace_back(v.x2(i, j), 1.0);
        lp.add_row(std::move(r));
    }
    for (std::size_t j = 0; j < n1; ++j) {
        lp::Row r{{}, lp::Sense::LessEqual, 0.0, idx("capacity_new", j)};
        for (std::size_t i = 0; i < n1; ++i) r.terms.emplace_back(v.x1(i, j), 1.0);
        r.terms.emplace_back(v.z1(j), -1.0);
        lp.add_row(std::move(r));
    }
    for (std::size_t j = 0; j < n2; ++j) {
        lp::Row r{{}, lp::Sense::LessEqual, 0.0, idx("capacity_existing", j)};
        for (std::size_t i = 0; i < n1; ++i) r.terms.emplace_back(v.x2(i, j), 1.0);
        r.terms.emplace_back(v.z2(j), -1.0);
        lp.add_row(std::move(r));
    }
    for (std::size_t j = 0; j < n1; ++j) {
        lp.add_row({{{v.z1(j), 1.0}, {v.y1(j), -inst.big_m}}, lp::Sense::LessEqual, 0.0, idx("link_new", j)});
    }
    for (std::size_t j = 0; j < n2; ++j) {
        lp.add_row({{{v.z2(j), 1.0}, {v.y2(j), -inst.big_m}}, lp::Sense::LessEqual, 0.0, idx("link_existing", j)});
    }
    for (std::size_t j = 0; j < n1; ++j) {
        lp.add_row({{{v.z1(j), 1.0}}, lp::Sense::LessEqual, inst.new_cap, idx("port_cap_new", j)});
    }
    for (std::size_t j = 0; j < n2; ++j) {
        lp.add_row({{{v.z2(j), 1.0}}, lp::Sense::LessEqual, inst.existing_cap, idx("port_cap_existing", j)});
    }
    {
        lp::Row r{{}, lp::Sense::LessEqual, static_cast<double>(inst.max_new_stations), "open_limit"};
        for (std::size_t j = 0; j < n1; ++j) r.terms.emplace_back(v.y1(j), 1.0);
        lp.add_row(std::move(r));
    }
    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t active = j < n1 ? v.y1(j) : v.y2(j - n1);
        lp.add_row({{{v.y3(j), 1.0}, {active, -1.0}}, lp::Sense::Equal, 0.0, idx("grid_link", j)});
        lp.add_row({{{v.y4(j), 1.0}, {active, -1.0}}, lp::Sense::Equal, 0.0, idx("voltage_link", j)});
    }
    return model;
}

CoverageSolution solve(const MilpModel& model, const SolveOptions& options) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const auto& lp0 = model.lp;

    auto relax = [&](const std::vector<double>& lo, const std::vector<double>& hi) {
        lp::LinearProgram node_lp = lp0;
        node_lp.lower = lo;
        node_lp.upper = hi;
        return lp::solve(node_lp);
    };

    CoverageSolution result;
    Node root{lp0.lower, lp0.upper, 0.0, 0, {}};
    const lp::Result root_lp = relax(root.lower, root.upper);
    result.nodes = 1;
    if (root_lp.status == lp::Status::Unbounded) {
        throw InstanceError("LP relaxation is unbounded; check for negative costs");
    }
    if (root_lp.status != lp::Status::Optimal) {
        result.status = SolveStatus::Infeasible;
        for (const std::size_t r : lp::irreducible_infeasible_rows(lp0)) {
            result.infeasibility_witness.push_back(lp0.rows[r].name);
        }
        return result;
    }
    root.bound = root_lp.objective;
    root.x = root_lp.x;
    result.root_bound = root_lp.objective;

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    open.push(std::move(root));
    std::size_t next_id = 1;
    double incumbent = lp::kInfinity;
    std::vector<double> incumbent_x;
    bool limit_hit = false;

    while (!open.empty()) {
        if (open.top().bound >= incumbent - options.abs_gap) break;
        const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
        if (result.nodes >= options.max_nodes || elapsed > options.time_limit_s) {
            limit_hit = true;
            break;
        }
        Node node = open.top();
        open.pop();

        std::size_t branch_var = lp0.num_variables();
        double best_frac = options.integrality_tol;
        for (const std::size_t k : model.binaries) {
            const double val = node.x[k];
            const double frac = std::min(val - std::floor(val), std::ceil(val) - val);
            if (frac > best_frac) {
                best_frac = frac;
                branch_var = k;
            }
        }

        if (branch_var == lp0.num_variables()) {
            // Integral relaxation: pin the binaries and re-solve to clean up the
            // continuous part.
            std::vector<double> lo = node.lower;
            std::vector<double> hi = node.upper;
            for (const std::size_t k : model.binaries) lo[k] = hi[k] = std::round(node.x[k]);
            const lp::Result polished = relax(lo, hi);
            ++result.nodes;
            const auto& x = polished.status == lp::Status::Optimal ? polished.x : node.x;
            const double obj = polished.status == lp::Status::Optimal ? polished.objective : node.bound;
            if (obj < incumbent) {
                incumbent = obj;
                incumbent_x = x;
            }
            continue;
        }

        for (const double fixed : {0.0, 1.0}) {
            Node child{node.lower, node.upper, 0.0, next_id++, {}};
            child.lower[branch_var] = fixed;
            child.upper[branch_var] = fixed;
            const lp::Result r = relax(child.lower, child.upper);
            ++result.nodes;
            if (r.status != lp::Status::Optimal) continue;
            child.bound = std::max(r.objective, node.bound);
            if (child.bound >= incumbent - options.abs_gap) continue;
            child.x = r.x;
            open.push(std::move(child));
        }
    }

    if (incumbent_x.empty()) {
        result.status = limit_hit ? SolveStatus::GapLimit : SolveStatus::Infeasible;
        result.objective = lp::kInfinity;
        result.bound = open.empty() ? lp::kInfinity : open.top().bound;
        return result;
    }

    CoverageSolution sol = extract(model, incumbent_x);
    sol.status = limit_hit ? SolveStatus::GapLimit : SolveStatus::Optimal;
    sol.objective = incumbent;
    sol.bound = open.empty() ? incumbent : std::min(incumbent, open.top().bound);
    sol.nodes = result.nodes;
    sol.root_bound = result.root_bound;
    return sol;
}

CoverageSolution solve(const CoverageInstance& inst, const SolveOptions& options) {
    CoverageSolution sol = solve(build(inst), options);
    // A limit hit before any incumbent leaves nothing to evaluate.
    if (!sol.open_new.empty() || inst.n_stations() == 0) {
        if (sol.status != SolveStatus::Infeasible) sol.objective = evaluate_objective(inst, sol);
    }
    return sol;
}

double evaluate_objective(const CoverageInstance& inst, const CoverageSolution& sol) {
    const std::size_t n1 = inst.n_new();
    const std::size_t n2 = inst.n_existing;
    double establishment = 0.0;
    for (std::size_t j = 0; j < n1; ++j) establishment += inst.open_cost * sol.open_new[j];
    for (std::size_t j = 0; j < n2; ++j) establishment += inst.expand_cost * sol.expand[j];

    double ports = 0.0;
    for (const double z : sol.ports_new) ports += z;
    for (const double z : sol.ports_existing) ports += z;

    double travel = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n1; ++j) travel += inst.dist_new(i, j) * sol.flow_new(i, j);
        for (std::size_t j = 0; j < n2; ++j) travel += inst.dist_existing(i, j) * sol.flow_existing(i, j);
    }

    double grid = 0.0;
    double voltage = 0.0;
    for (std::size_t p = 0; p < inst.n_buses; ++p) {
        for (std::size_t j = 0; j < inst.n_stations(); ++j) {
            grid += inst.bus_distance(p, j) * sol.grid_active[j];
            voltage += inst.voltage_priority(p, j) * sol.voltage_active[j];
        }
    }
    return establishment + inst.port_cost * ports + travel + grid + voltage;
}

const char* to_string(ConstraintKind k) noexcept {
    switch (k) {
        case ConstraintKind::Shape: return "shape";
        case ConstraintKind::Integrality: return "integrality";
        case ConstraintKind::Nonnegativity: return "nonnegativity";
        case ConstraintKind::DemandSatisfaction: return "demand_satisfaction";
        case ConstraintKind::StationCapacity: return "station_capacity";
        case ConstraintKind::PortCap: return "port_cap";
        case ConstraintKind::OpeningLimit: return "opening_limit";
        case ConstraintKind::IndicatorLink: return "indicator_link";
        case ConstraintKind::Objective: return "objective";
    }
    return "unknown";
}

std::vector<Violation> validate(const CoverageSolution& sol, const CoverageInstance& inst, double tol) {
    std::vector<Violation> out;
    if (sol.status == SolveStatus::Infeasible) return out;

    const std::size_t n1 = inst.n_new();
    const std::size_t n2 = inst.n_existing;
    const std::size_t nj = inst.n_stations();
    auto add = [&](ConstraintKind kind, std::size_t index, double amount, std::string msg) {
        out.push_back({kind, index, amount, std::move(msg)});
    };

    const bool shaped = sol.open_new.size() == n1 && sol.expand.size() == n2 && sol.grid_active.size() == nj &&
                        sol.voltage_active.size() == nj && sol.flow_new.rows == n1 && sol.flow_new.cols == n1 &&
                        sol.flow_existing.rows == n1 && sol.flow_existing.cols == n2 &&
                        sol.flow_new.data.size() == n1 * n1 && sol.flow_existing.data.size() == n1 * n2 &&
                        sol.ports_new.size() == n1 && sol.ports_existing.size() == n2;
    if (!shaped) {
        add(ConstraintKind::Shape, 0, 0.0, "solution dimensions do not match the instance");
        return out;
    }

    auto check_binary = [&](double v, std::size_t j, const char* name) {
        const double off = std::min(std::abs(v), std::abs(v - 1.0));
        if (off > tol) add(ConstraintKind::Integrality, j, off, std::string(name) + " is not binary");
    };
    for (std::size_t j = 0; j < n1; ++j) check_binary(sol.open_new[j], j, "open_new");
    for (std::size_t j = 0; j < n2; ++j) check_binary(sol.expand[j], n1 + j, "expand");
    for (std::size_t j = 0; j < nj; ++j) {
        check_binary(sol.grid_active[j], j, "grid_active");
        check_binary(sol.voltage_active[j], j, "voltage_active");
    }

    for (const double v : sol.flow_new.data) {
        if (v < -tol) add(ConstraintKind::Nonnegativity, 0, -v, "negative flow to a new station");
    }
    for (const double v : sol.flow_existing.data) {
        if (v < -tol) add(ConstraintKind::Nonnegativity, 0, -v, "negative flow to an existing station");
    }
    for (std::size_t j = 0; j < n1; ++j) {
        if (sol.ports_new[j] < -tol) add(ConstraintKind::Nonnegativity, j, -sol.ports_new[j], "negative ports");
    }
    for (std::size_t j = 0; j < n2; ++j) {
        if (sol.ports_existing[j] < -tol) {
            add(ConstraintKind::Nonnegativity, n1 + j, -sol.ports_existing[j], "negative ports");
        }
    }

    for (std::size_t i = 0; i < n1; ++i) {
        double served = 0.0;
        for (std::size_t j = 0; j < n1; ++j) served += sol.flow_new(i, j);
        for (std::size_t j = 0; j < n2; ++j) served += sol.flow_existing(i, j);
        const double shortfall = inst.demand[i] - served;
        if (shortfall > tol) {
            add(ConstraintKind::DemandSatisfaction, i, shortfall,
                "demand point " + std::to_string(i) + " is short by " + std::to_string(shortfall));
        }
    }

    for (std::size_t j = 0; j < n1; ++j) {
        double inflow = 0.0;
        for (std::size_t i = 0; i < n1; ++i) inflow += sol.flow_new(i, j);
        const double excess = inflow - sol.ports_new[j] * sol.open_new[j];
        if (excess > tol) {
            add(ConstraintKind::StationCapacity, j, excess, "new station " + std::to_string(j) + " over capacity");
        }
        if (sol.ports_new[j] - inst.new_cap > tol) {
            add(ConstraintKind::PortCap, j, sol.ports_new[j] - inst.new_cap,
                "new station " + std::to_string(j) + " exceeds the port cap");
        }
    }
    for (std::size_t j = 0; j < n2; ++j) {
        double inflow = 0.0;
        for (std::size_t i = 0; i < n1; ++i) inflow += sol.flow_existing(i, j);
        const double excess = inflow - sol.ports_existing[j] * sol.expand[j];
        if (excess > tol) {
            add(ConstraintKind::StationCapacity, n1 + j, excess,
                "existing station " + std::to_string(j) + " over capacity");
        }
        if (sol.ports_existing[j] - inst.existing_cap > tol) {
            add(ConstraintKind::PortCap, n1 + j, sol.ports_existing[j] - inst.existing_cap,
                "existing station " + std::to_string(j) + " exceeds the port cap");
        }
    }

    double opened = 0.0;
    for (const double y : sol.open_new) opened += y;
    if (opened - static_cast<double>(inst.max_new_stations) > tol) {
        add(ConstraintKind::OpeningLimit, 0, opened - static_cast<double>(inst.max_new_stations),
            "too many new stations opened");
    }

    for (std::size_t j = 0; j < nj; ++j) {
        const double active = j < n1 ? sol.open_new[j] : sol.expand[j - n1];
        if (std::abs(sol.grid_active[j] - active) > tol || std::abs(sol.voltage_active[j] - active) > tol) {
            add(ConstraintKind::IndicatorLink, j, std::abs(sol.grid_active[j] - active),
                "grid indicators of station " + std::to_string(j) + " disagree with its activation");
        }
    }

    const double recomputed = evaluate_objective(inst, sol);
    const double diff = std::abs(recomputed - sol.objective);
    if (diff > 1e-6 * std::max(1.0, std::abs(recomputed))) {
        add(ConstraintKind::Objective, 0, diff, "reported objective differs from the recomputed value");
    }
    return out;
}

nlohmann::json to_json(const CoverageInstance& inst) {
    return {{"format", "evplan.coverage_instance"},
            {"format_version", kFormatVersion},
            {"n_new", inst.n_new()},
            {"n_existing", inst.n_existing},
            {"n_buses", inst.n_buses},
            {"demand", inst.demand},
            {"open_cost", inst.open_cost},
            {"expand_cost", inst.expand_cost},
            {"port_cost", inst.port_cost},
            {"dist_new", matrix_json(inst.dist_new)},
            {"dist_existing", matrix_json(inst.dist_existing)},
            {"bus_distance", matrix_json(inst.bus_distance)},
            {"voltage_priority", matrix_json(inst.voltage_priority)},
            {"new_cap", inst.new_cap},
            {"existing_cap", inst.existing_cap},
            {"max_new_stations", inst.max_new_stations},
            {"big_m", inst.big_m}};
}

CoverageInstance instance_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "evplan.coverage_instance") {
            throw InstanceError("not a coverage instance document");
        }
        if (j.at("format_version").get<int>() != kFormatVersion) {
            throw InstanceError("unsupported instance format version");
        }
        CoverageInstance inst;
        inst.demand = j.at("demand").get<std::vector<double>>();
        if (j.at("n_new").get<std::size_t>() != inst.demand.size()) {
            throw InstanceError("n_new does not match the demand vector");
        }
        inst.n_existing = j.at("n_existing").get<std::size_t>();
        inst.n_buses = j.at("n_buses").get<std::size_t>();
        inst.open_cost = j.at("open_cost").get<double>();
        inst.expand_cost = j.at("expand_cost").get<double>();
        inst.port_cost = j.at("port_cost").get<double>();
        inst.dist_new = matrix_from(j.at("dist_new"));
        inst.dist_existing = matrix_from(j.at("dist_existing"));
        inst.bus_distance = matrix_from(j.at("bus_distance"));
        inst.voltage_priority = matrix_from(j.at("voltage_priority"));
        inst.new_cap = j.at("new_cap").get<double>();
        inst.existing_cap = j.at("existing_cap").get<double>();
        inst.max_new_stations = j.at("max_new_stations").get<std::size_t>();
        inst.big_m = j.at("big_m").get<double>();
        validate_instance(inst);
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw InstanceError(std::string("malformed instance document: ") + e.what());
    }
}

nlohmann::json to_json(const CoverageSolution& sol) {
    nlohmann::json j = {{"format", "evplan.coverage_solution"},
                        {"format_version", kFormatVersion},
                        {"status", to_string(sol.status)},
                        {"nodes", sol.nodes},
                        {"infeasibility_witness", sol.infeasibility_witness}};
    if (sol.status == SolveStatus::Infeasible || sol.open_new.size() + sol.expand.size() == 0) {
        if (sol.status != SolveStatus::Infeasible) j["bound"] = sol.bound;
        return j;
    }
    j["objective"] = sol.objective;
    j["bound"] = sol.bound;
    j["root_bound"] = sol.root_bound;
    j["open_new"] = sol.open_new;
    j["expand"] = sol.expand;
    j["grid_active"] = sol.grid_active;
    j["voltage_active"] = sol.voltage_active;
    j["flow_new"] = matrix_json(sol.flow_new);
    j["flow_existing"] = matrix_json(sol.flow_existing);
    j["ports_new"] = sol.ports_new;
    j["ports_existing"] = sol.ports_existing;
    return j;
}

CoverageSolution solution_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "evplan.coverage_solution") {
            throw InstanceError("not a coverage solution document");
        }
        CoverageSolution sol;
        const auto status = j.at("status").get<std::string>();
        if (status == "Optimal") sol.status = SolveStatus::Optimal;
        else if (status == "Infeasible") sol.status = SolveStatus::Infeasible;
        else if (status == "GapLimit") sol.status = SolveStatus::GapLimit;
        else throw InstanceError("unknown solution status '" + status + "'");
        sol.nodes = j.value("nodes", std::size_t{0});
        sol.infeasibility_witness = j.value("infeasibility_witness", std::vector<std::string>{});
        if (!j.contains("open_new")) {
            sol.bound = j.value("bound", 0.0);
            return sol;
        }
        sol.objective = j.at("objective").get<double>();
        sol.bound = j.at("bound").get<double>();
        sol.root_bound = j.value("root_bound", 0.0);
        sol.open_new = j.at("open_new").get<std::vector<double>>();
        sol.expand = j.at("expand").get<std::vector<double>>();
        sol.grid_active = j.at("grid_active").get<std::vector<double>>();
        sol.voltage_active = j.at("voltage_active").get<std::vector<double>>();
        sol.flow_new = matrix_from(j.at("flow_new"));
        sol.flow_existing = matrix_from(j.at("flow_existing"));
        sol.ports_new = j.at("ports_new").get<std::vector<double>>();
        sol.ports_existing = j.at("ports_existing").get<std::vector<double>>();
        return sol;
    } catch (const nlohmann::json::exception& e) {
        throw InstanceError(std::string("malformed solution document: ") + e.what());
    }
}

nlohmann::json to_json(const std::vector<Violation>& violations) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : violations) {
        arr.push_back({{"constraint", to_string(v.kind)}, {"index", v.index}, {"amount", v.amount}, {"message", v.message}});
    }
    return arr;
}

}  // namespace evplan::coverage
