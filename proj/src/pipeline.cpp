#include "evplan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "evplan/ingest.hpp"
#include "evplan/text.hpp"

namespace evplan::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw PipelineError("config", kExitConfig, msg); }

/// Strict view of one JSON object: every key must be read before finish().
class ObjectReader {
  public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) config_error(where() + " must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
                    throw std::invalid_argument("expected a nonnegative integer");
                }
            }
            out = v.get<T>();
        } catch (const std::exception& e) {
            config_error(where() + "." + key + ": " + e.what());
        }
    }

    ObjectReader child(const char* key) {
        seen_.insert(key);
        return ObjectReader(j_.at(key), path_ + "." + key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) config_error("unknown key '" + where() + "." + key + "'");
        }
    }

  private:
    std::string where() const { return path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require_config(bool ok, const std::string& msg) {
    if (!ok) config_error(msg);
}

void check_config(const PipelineConfig& c) {
    try {
        geo::validate(c.bbox);
        c.gbt.validate();
    } catch (const std::exception& e) {
        config_error(e.what());
    }
    require_config(c.cell_km > 0.0, "cell_km must be positive");
    require_config(!c.poi_csv.empty(), "poi_csv is required");
    require_config(!c.charger_csv.empty(), "charger_csv is required");
    require_config(c.train_share > 0.0 && c.train_share <= 1.0, "train_share must be in (0, 1]");
    require_config(c.smote_k >= 1, "smote_k must be at least 1");
    require_config(c.expand_cost > 0.0 && c.open_cost > c.expand_cost, "costs must satisfy open > expand > 0");
    require_config(c.port_cost >= 0.0, "port cost must be nonnegative");
    require_config(c.new_cap > 0.0 && c.existing_cap > 0.0, "port caps must be positive");
    require_config(c.screening_threshold > 0.0 && c.screening_threshold < 1.0, "screening_threshold must be in (0, 1)");
    require_config(c.validation_v_limit > 0.0 && c.validation_v_limit < 1.0, "validation_v_limit must be in (0, 1)");
    require_config(c.kw_per_port >= 0.0, "kw_per_port must be nonnegative");
    require_config(c.charger_power_factor > 0.0 && c.charger_power_factor <= 1.0, "charger_power_factor must be in (0, 1]");
    require_config(c.solver.time_limit_s > 0.0 && c.solver.abs_gap >= 0.0 && c.solver.max_nodes > 0,
                   "solver limits must be positive");
    require_config(!c.output_dir.empty(), "output_dir must not be empty");
}

json metrics_json(const std::vector<demand::Sample>& rows, const demand::GbtModel& model) {
    if (rows.empty()) return nullptr;
    std::vector<double> y;
    std::vector<double> p;
    for (const auto& s : rows) {
        y.push_back(s.target);
        p.push_back(demand::predict(model, s.features));
    }
    json out = {{"rows", rows.size()}, {"mse", demand::mean_squared_error(y, p)}};
    try {
        out["r2"] = demand::r2_score(y, p);
    } catch (const demand::ModelError&) {
        out["r2"] = nullptr;  // constant target
    }
    return out;
}

json bbox_json(const geo::BoundingBox& b) {
    return {{"north", b.north}, {"south", b.south}, {"east", b.east}, {"west", b.west}};
}

json point_json(const geo::GeoPoint& p) { return {{"lat", p.lat}, {"lon", p.lon}}; }

json flow_summary(const power_flow::PowerFlowResult& r) {
    double vmin = 1.0;
    for (const double v : r.v_pu) vmin = std::min(vmin, v);
    double imax = 0.0;
    for (const double i : r.i_amps) imax = std::max(imax, i);
    return {{"converged", r.converged}, {"iterations", r.iterations}, {"min_v_pu", vmin},
            {"max_i_a", imax},          {"losses_kw", r.losses_kw},   {"slack_p_kw", r.slack_p_kw},
            {"slack_q_kvar", r.slack_q_kvar}};
}

template <typename F>
auto staged(const char* stage, int code, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(stage, code, e.what());
    }
}

}  // namespace

PipelineError::PipelineError(std::string stage, int exit_code, const std::string& message)
    : std::runtime_error(stage + ": " + message), stage_(std::move(stage)), exit_code_(exit_code) {}

fs::path PipelineConfig::resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
    PipelineConfig c;
    c.base_dir = base_dir;
    ObjectReader root(j, "config");
    int version = 0;
    root.get("version", version);
    if (version != kConfigVersion) config_error("config.version must be " + std::to_string(kConfigVersion));

    if (!root.has("bbox")) config_error("config.bbox is required");
    {
        auto r = root.child("bbox");
        r.get("north", c.bbox.north);
        r.get("south", c.bbox.south);
        r.get("east", c.bbox.east);
        r.get("west", c.bbox.west);
        r.finish();
    }
    root.get("cell_km", c.cell_km);
    root.get("use_poi_counts", c.use_poi_counts);
    root.get("poi_csv", c.poi_csv);
    root.get("charger_csv", c.charger_csv);

    if (root.has("feeder")) {
        auto r = root.child("feeder");
        r.get("file", c.feeder_file);
        if (r.has("synthetic")) {
            auto s = r.child("synthetic");
            auto& p = c.synthetic_feeder;
            s.get("n_buses", p.n_buses);
            s.get("branching", p.branching);
            s.get("kv", p.kv);
            s.get("span_km", p.span_km);
            s.get("r_ohm_per_km", p.r_ohm_per_km);
            s.get("x_ohm_per_km", p.x_ohm_per_km);
            s.get("load_kw_min", p.load_kw_min);
            s.get("load_kw_max", p.load_kw_max);
            s.get("power_factor", p.power_factor);
            s.get("ampacity_a", p.ampacity_a);
            s.get("seed", p.seed);
            s.finish();
        }
        if (r.has("file") && r.has("synthetic")) config_error("config.feeder takes either 'file' or 'synthetic'");
        r.finish();
    }

    if (root.has("gbt")) {
        auto r = root.child("gbt");
        r.get("rounds", c.gbt.rounds);
        r.get("max_depth", c.gbt.max_depth);
        r.get("learning_rate", c.gbt.learning_rate);
        r.get("row_subsample", c.gbt.row_subsample);
        r.get("feature_subsample", c.gbt.feature_subsample);
        r.get("l2_leaf_reg", c.gbt.l2_leaf_reg);
        r.get("min_split_gain", c.gbt.min_split_gain);
        r.get("min_child_weight", c.gbt.min_child_weight);
        r.finish();
    }
    root.get("train_share", c.train_share);
    root.get("smote_k", c.smote_k);

    if (root.has("costs")) {
        auto r = root.child("costs");
        r.get("open", c.open_cost);
        c.expand_cost = 0.2 * c.open_cost;
        r.get("expand", c.expand_cost);
        r.get("port", c.port_cost);
        r.finish();
    }
    if (root.has("caps")) {
        auto r = root.child("caps");
        r.get("new_ports", c.new_cap);
        r.get("existing_ports", c.existing_cap);
        r.get("max_new_stations", c.max_new_stations);
        r.finish();
    }
    root.get("screening_threshold", c.screening_threshold);
    root.get("validation_v_limit", c.validation_v_limit);
    root.get("kw_per_port", c.kw_per_port);
    root.get("charger_power_factor", c.charger_power_factor);
    if (root.has("seeds")) {
        auto r = root.child("seeds");
        r.get("smote", c.seeds.smote);
        r.get("gbt", c.seeds.gbt);
        r.get("solver", c.seeds.solver);
        r.finish();
    }
    if (root.has("solver")) {
        auto r = root.child("solver");
        r.get("time_limit_s", c.solver.time_limit_s);
        r.get("abs_gap", c.solver.abs_gap);
        r.get("max_nodes", c.solver.max_nodes);
        r.get("integrality_tol", c.solver.integrality_tol);
        r.finish();
    }
    root.get("emit_profiles", c.emit_profiles);
    root.get("output_dir", c.output_dir);
    root.finish();
    check_config(c);
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = ingest::read_file(path);
    } catch (const std::exception& e) {
        config_error(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        config_error("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

json to_json(const PipelineConfig& c) {
    const auto& s = c.synthetic_feeder;
    json feeder;
    if (c.feeder_file.empty()) {
        feeder["synthetic"] = {{"n_buses", s.n_buses},           {"branching", s.branching},
                               {"kv", s.kv},                     {"span_km", s.span_km},
                               {"r_ohm_per_km", s.r_ohm_per_km}, {"x_ohm_per_km", s.x_ohm_per_km},
                               {"load_kw_min", s.load_kw_min},   {"load_kw_max", s.load_kw_max},
                               {"power_factor", s.power_factor}, {"ampacity_a", s.ampacity_a},
                               {"seed", s.seed}};
    } else {
        feeder["file"] = c.feeder_file;
    }
    const auto& g = c.gbt;
    return {{"version", kConfigVersion},
            {"bbox", bbox_json(c.bbox)},
            {"cell_km", c.cell_km},
            {"use_poi_counts", c.use_poi_counts},
            {"poi_csv", c.poi_csv},
            {"charger_csv", c.charger_csv},
            {"feeder", feeder},
            {"gbt",
             {{"rounds", g.rounds},
              {"max_depth", g.max_depth},
              {"learning_rate", g.learning_rate},
              {"row_subsample", g.row_subsample},
              {"feature_subsample", g.feature_subsample},
              {"l2_leaf_reg", g.l2_leaf_reg},
              {"min_split_gain", g.min_split_gain},
              {"min_child_weight", g.min_child_weight}}},
            {"train_share", c.train_share},
            {"smote_k", c.smote_k},
            {"costs", {{"open", c.open_cost}, {"expand", c.expand_cost}, {"port", c.port_cost}}},
            {"caps",
             {{"new_ports", c.new_cap}, {"existing_ports", c.existing_cap}, {"max_new_stations", c.max_new_stations}}},
            {"screening_threshold", c.screening_threshold},
            {"validation_v_limit", c.validation_v_limit},
            {"kw_per_port", c.kw_per_port},
            {"charger_power_factor", c.charger_power_factor},
            {"seeds", {{"smote", c.seeds.smote}, {"gbt", c.seeds.gbt}, {"solver", c.seeds.solver}}},
            {"solver",
             {{"time_limit_s", c.solver.time_limit_s},
              {"abs_gap", c.solver.abs_gap},
              {"max_nodes", c.solver.max_nodes},
              {"integrality_tol", c.solver.integrality_tol}}},
            {"emit_profiles", c.emit_profiles},
            {"output_dir", c.output_dir}};
}

IngestResult ingest(const PipelineConfig& c) {
    return staged("ingest", kExitIngest, [&] {
        IngestResult r;
        const auto pois = ingest::read_pois(ingest::read_file(c.resolve(c.poi_csv)), c.poi_csv);
        auto chargers = ingest::read_chargers(ingest::read_file(c.resolve(c.charger_csv)), c.bbox.center(), c.charger_csv);
        r.grid = geo::partition(c.bbox, c.cell_km);
        r.dropped = geo::assign_points(r.grid, pois, chargers.sites);
        r.pois = pois.size();
        r.chargers_rejected = chargers.rejected;
        for (const auto& s : chargers.sites) {
            if (c.bbox.contains(s.location)) r.chargers.push_back(s);
        }
        return r;
    });
}

TrainResult train(const PipelineConfig& c, const IngestResult& in) {
    return staged("train", kExitModel, [&] {
        TrainResult r;
        const auto sets = demand::build_datasets(in.grid, c.use_poi_counts);
        if (sets.train.rows.empty()) throw demand::ModelError("no C1 or C4 cells to train on");

        std::size_t c1 = 0;
        for (const auto& s : sets.train.rows) c1 += s.label == geo::CellClass::C1 ? 1 : 0;
        const std::size_t minority = std::min(c1, sets.train.rows.size() - c1);
        if (minority >= 2) {
            r.balance = demand::balance_classes(sets.train.rows, c.smote_k, c.seeds.smote);
        } else {
            r.balance.rows = sets.train.rows;
            r.balance.minority_before = minority;
            r.balance.majority = sets.train.rows.size() - minority;
        }

        const auto split = demand::stratified_split(r.balance.rows, c.train_share, c.seeds.gbt);
        if (split.train.empty()) throw demand::ModelError("the training split is empty");
        r.model = demand::fit(split.train, c.gbt, c.seeds.gbt);
        r.train_rows = split.train.size();
        r.test_rows = split.test.size();
        r.metrics = {{"format", "evplan.metrics"},
                     {"train", metrics_json(split.train, r.model)},
                     {"test", metrics_json(split.test, r.model)},
                     {"smote_applied", r.balance.applied},
                     {"minority_before", r.balance.minority_before},
                     {"majority", r.balance.majority}};
        return r;
    });
}

std::vector<demand::DemandEstimate> predict(const demand::GbtModel& model, const PipelineConfig& c,
                                            const IngestResult& in) {
    return staged("predict", kExitModel, [&] {
        const auto sets = demand::build_datasets(in.grid, c.use_poi_counts);
        return demand::estimate_demand(model, in.grid, sets.predict);
    });
}

NetworkResult network(const PipelineConfig& c, const IngestResult& in,
                      const std::vector<demand::DemandEstimate>& estimates) {
    return staged("network", kExitIngest, [&] {
        NetworkResult r;
        grid::Feeder raw = c.feeder_file.empty() ? grid::synthetic_feeder(c.synthetic_feeder)
                                                 : grid::parse_feeder(ingest::read_file(c.resolve(c.feeder_file)));
        r.feeder = grid::georegister(raw, c.bbox);

        // Existing chargers are part of the base case, on their nearest bus.
        std::vector<std::size_t> all(r.feeder.buses.size());
        for (std::size_t b = 0; b < all.size(); ++b) all[b] = b;
        std::vector<power_flow::StationLoad> existing;
        for (const auto& s : in.chargers) {
            const auto nb = grid::nearest_bus(s.location, r.feeder, all);
            existing.push_back({r.feeder.buses[nb.bus].id, static_cast<double>(s.ports)});
        }
        r.feeder = power_flow::integrate_chargers(r.feeder, existing, c.kw_per_port, c.charger_power_factor);
        r.base_flow = power_flow::solve_bfs(r.feeder);
        if (!r.base_flow.converged) throw grid::GridError("base-case power flow did not converge");

        for (const auto& e : estimates) r.stations.push_back(e.center);
        for (const auto& s : in.chargers) r.stations.push_back(s.location);
        r.matrices = grid::grid_matrices(r.feeder, r.stations, r.base_flow.v_pu, c.screening_threshold);

        auto& inst = r.instance;
        const std::size_t n1 = estimates.size();
        const std::size_t n2 = in.chargers.size();
        for (const auto& e : estimates) inst.demand.push_back(coverage::ceil_ports(e.demand));
        inst.n_existing = n2;
        inst.n_buses = r.matrices.pool.size();
        inst.open_cost = c.open_cost;
        inst.expand_cost = c.expand_cost;
        inst.port_cost = c.port_cost;
        inst.dist_new = coverage::Matrix(n1, n1);
        inst.dist_existing = coverage::Matrix(n1, n2);
        for (std::size_t i = 0; i < n1; ++i) {
            for (std::size_t j = 0; j < n1; ++j) inst.dist_new(i, j) = geo::haversine_km(r.stations[i], r.stations[j]);
            for (std::size_t j = 0; j < n2; ++j) {
                inst.dist_existing(i, j) = geo::haversine_km(r.stations[i], in.chargers[j].location);
            }
        }
        inst.bus_distance = r.matrices.bus_distance;
        inst.voltage_priority = r.matrices.voltage_priority;
        inst.new_cap = c.new_cap;
        inst.existing_cap = c.existing_cap;
        inst.max_new_stations = c.max_new_stations;
        inst.big_m = std::max(c.new_cap, c.existing_cap);
        coverage::validate_instance(inst);
        return r;
    });
}

coverage::CoverageSolution solve(const PipelineConfig& c, const coverage::CoverageInstance& instance) {
    return staged("solve", kExitInfeasible, [&] { return coverage::solve(instance, c.solver); });
}

GridCheck check_grid(const PipelineConfig& c, const NetworkResult& net, const coverage::CoverageSolution& plan) {
    return staged("validate", kExitViolations, [&] {
        GridCheck g;
        for (const auto& a : net.matrices.assignment) g.station_bus.push_back(net.feeder.buses[a.bus].id);
        const auto loads = power_flow::station_loads(plan, g.station_bus);
        g.post_feeder = power_flow::integrate_chargers(net.feeder, loads, c.kw_per_port, c.charger_power_factor);
        g.post_flow = power_flow::solve_bfs(g.post_feeder);
        if (!g.post_flow.converged) throw power_flow::PowerFlowError("post-integration power flow did not converge");
        g.report = power_flow::validate_grid(g.post_feeder, net.base_flow, g.post_flow, c.validation_v_limit);
        return g;
    });
}

json cells_geojson(const geo::CellGrid& grid, const std::vector<demand::DemandEstimate>* estimates) {
    std::vector<const demand::DemandEstimate*> by_cell(grid.cells.size(), nullptr);
    if (estimates) {
        for (const auto& e : *estimates) {
            if (e.cell_index < by_cell.size()) by_cell[e.cell_index] = &e;
        }
    }
    json features = json::array();
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const auto& cell = grid.cells[i];
        const auto& b = cell.bounds;
        json ring = json::array({json::array({b.west, b.south}), json::array({b.east, b.south}),
                                 json::array({b.east, b.north}), json::array({b.west, b.north}),
                                 json::array({b.west, b.south})});
        json poi = json::object();
        for (std::size_t k = 0; k < geo::kPoiCategoryCount; ++k) {
            poi[std::string(geo::to_string(static_cast<geo::PoiCategory>(k)))] = cell.poi_counts[k];
        }
        json props = {{"index", i},
                      {"row", cell.row},
                      {"col", cell.col},
                      {"class", std::string(geo::to_string(cell.classification))},
                      {"port_count", cell.port_count},
                      {"center", point_json(cell.center)},
                      {"poi_counts", poi}};
        if (by_cell[i]) props["demand"] = by_cell[i]->demand;
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                            {"properties", props}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

PlanReport run(const PipelineConfig& c) {
    using clock = std::chrono::steady_clock;
    PlanReport out;
    json timings = json::object();
    auto timed = [&](const char* stage, auto&& f) {
        const auto t0 = clock::now();
        auto result = f();
        timings[stage] = std::chrono::duration<double>(clock::now() - t0).count();
        return result;
    };
    const fs::path dir = c.resolve(c.output_dir);

    const IngestResult in = timed("ingest", [&] { return ingest(c); });
    const TrainResult tr = timed("train", [&] { return train(c, in); });
    const auto estimates = timed("predict", [&] { return predict(tr.model, c, in); });
    const NetworkResult net = timed("network", [&] { return network(c, in, estimates); });
    const auto plan = timed("solve", [&] { return solve(c, net.instance); });

    auto& rep = out.report;
    rep["format"] = "evplan.plan_report";
    rep["format_version"] = 1;
    rep["tool_version"] = kToolVersion;
    rep["config"] = to_json(c);
    rep["seeds"] = {{"smote", c.seeds.smote}, {"gbt", c.seeds.gbt}, {"solver", c.seeds.solver}};
    const auto classes = geo::count_classes(in.grid);
    rep["ingest"] = {{"cells", in.grid.cells.size()},
                     {"rows", in.grid.rows},
                     {"cols", in.grid.cols},
                     {"pois", in.pois},
                     {"pois_dropped", in.dropped.pois_dropped},
                     {"chargers", in.chargers.size()},
                     {"chargers_dropped", in.dropped.chargers_dropped},
                     {"chargers_rejected", in.chargers_rejected},
                     {"classes", {{"C1", classes.c1}, {"C2", classes.c2}, {"C3", classes.c3}, {"C4", classes.c4}}}};
    rep["demand_model"] = tr.metrics;
    json est = json::array();
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const auto& e = estimates[i];
        est.push_back({{"station", i},
                       {"cell", e.cell_index},
                       {"row", e.row},
                       {"col", e.col},
                       {"center", point_json(e.center)},
                       {"demand", e.demand},
                       {"demand_ports", net.instance.demand[i]}});
    }
    rep["demand_estimates"] = est;
    json pool = json::array();
    for (const auto p : net.matrices.pool) pool.push_back(net.feeder.buses[p].id);
    rep["network"] = {{"feeder", net.feeder.name},
                      {"buses", net.feeder.buses.size()},
                      {"lines", net.feeder.lines.size()},
                      {"screening_threshold", c.screening_threshold},
                      {"candidate_pool", pool},
                      {"base_case", flow_summary(net.base_flow)}};
    rep["coverage"] = coverage::to_json(plan);

    write_json(dir / "model.json", demand::to_json(tr.model));
    write_json(dir / "metrics.json", tr.metrics);
    write_json(dir / "demand.json", demand::to_json(estimates));
    write_json(dir / "instance.json", coverage::to_json(net.instance));
    write_json(dir / "solution.json", coverage::to_json(plan));
    write_json(dir / "cells.geojson", cells_geojson(in.grid, &estimates));

    // A search limit reached before any incumbent leaves no plan to check.
    if (plan.status == coverage::SolveStatus::Infeasible || plan.open_new.size() != net.instance.n_new()) {
        rep["status"] = coverage::to_string(plan.status);
        rep["constraint_violations"] = json::array();
        rep["bus_assignments"] = json::array();
        out.exit_code = kExitInfeasible;
    } else {
        const auto violations = coverage::validate(plan, net.instance);
        const GridCheck g = timed("validate", [&] { return check_grid(c, net, plan); });

        json assignments = json::array();
        const std::size_t n1 = plan.open_new.size();
        for (std::size_t j = 0; j < net.matrices.assignment.size(); ++j) {
            const bool is_new = j < n1;
            const double active = is_new ? plan.open_new[j] : plan.expand[j - n1];
            const double ports = is_new ? plan.ports_new[j] : plan.ports_existing[j - n1];
            assignments.push_back({{"station", j},
                                   {"kind", is_new ? "new" : "existing"},
                                   {"location", point_json(net.stations[j])},
                                   {"active", active > 0.5},
                                   {"ports", ports},
                                   {"bus", g.station_bus[j]},
                                   {"distance_km", net.matrices.assignment[j].distance_km}});
        }
        rep["status"] = coverage::to_string(plan.status);
        rep["constraint_violations"] = coverage::to_json(violations);
        rep["bus_assignments"] = assignments;
        rep["grid"] = {{"pre", flow_summary(net.base_flow)},
                       {"post", flow_summary(g.post_flow)},
                       {"v_limit", c.validation_v_limit},
                       {"added_loads", g.post_feeder.loads.size() - net.feeder.loads.size()},
                       {"validation", power_flow::to_json(g.report)}};
        if (c.emit_profiles) {
            write_text(dir / "voltage_profile.csv", power_flow::voltage_profile_csv(g.report));
            write_text(dir / "line_current.csv", power_flow::line_current_csv(g.report));
        }
        if (!violations.empty() || !g.report.ok()) out.exit_code = kExitViolations;
    }

    out.timings = timings;
    write_json(dir / "plan_report.json", rep);
    write_json(dir / "run_timings.json", out.timings);
    return out;
}

}  // namespace evplan::pipeline
