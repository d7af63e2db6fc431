// Command-line front end for the planning pipeline.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "evplan/coverage.hpp"
#include "evplan/demand.hpp"
#include "evplan/geo.hpp"
#include "evplan/ingest.hpp"
#include "evplan/pipeline.hpp"

namespace fs = std::filesystem;
namespace pl = evplan::pipeline;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::string output_dir;
    std::optional<std::uint64_t> smote_seed;
    std::optional<std::uint64_t> gbt_seed;
    std::optional<std::uint64_t> solver_seed;
    std::optional<std::size_t> max_new_stations;
    std::optional<double> time_limit;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("-c,--config", c.config, "pipeline config JSON");
    if (config_required) opt->required();
    cmd->add_option("-o,--output-dir", c.output_dir, "override the configured output directory");
    cmd->add_option("--smote-seed", c.smote_seed, "override seeds.smote");
    cmd->add_option("--gbt-seed", c.gbt_seed, "override seeds.gbt");
    cmd->add_option("--solver-seed", c.solver_seed, "override seeds.solver");
    cmd->add_option("--max-new-stations", c.max_new_stations, "override caps.max_new_stations");
    cmd->add_option("--time-limit", c.time_limit, "solver time limit, seconds");
}

pl::PipelineConfig load(const Common& c) {
    pl::PipelineConfig cfg = pl::load_config(c.config);
    if (!c.output_dir.empty()) cfg.output_dir = fs::absolute(c.output_dir).string();
    if (c.smote_seed) cfg.seeds.smote = *c.smote_seed;
    if (c.gbt_seed) cfg.seeds.gbt = *c.gbt_seed;
    if (c.solver_seed) cfg.seeds.solver = *c.solver_seed;
    if (c.max_new_stations) cfg.max_new_stations = *c.max_new_stations;
    if (c.time_limit) cfg.solver.time_limit_s = *c.time_limit;
    return cfg;
}

json read_json(const std::string& path) {
    try {
        return json::parse(evplan::ingest::read_file(path));
    } catch (const json::exception& e) {
        throw evplan::ingest::IngestError("'" + path + "' is not valid JSON: " + e.what());
    }
}

fs::path out_dir(const pl::PipelineConfig& cfg) { return cfg.resolve(cfg.output_dir); }

int solution_exit(const evplan::coverage::CoverageSolution& sol) {
    return sol.status == evplan::coverage::SolveStatus::Infeasible ? pl::kExitInfeasible : pl::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Siting and sizing of EV charging infrastructure on a distribution feeder"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pl::kToolVersion);

    Common partition_opts;
    auto* partition = app.add_subcommand("partition", "partition the bounding box into cells and write GeoJSON");
    add_common(partition, partition_opts, false);
    std::vector<double> bbox_arg;
    double cell_km = 0.0;
    std::string partition_out;
    partition->add_option("--bbox", bbox_arg, "north south east west")->expected(4);
    partition->add_option("--cell-km", cell_km, "cell size, km");
    partition->add_option("--out", partition_out, "output GeoJSON path");

    Common train_opts;
    auto* train = app.add_subcommand("train", "fit the demand model and write model.json and metrics.json");
    add_common(train, train_opts, true);

    Common predict_opts;
    std::string model_path;
    auto* predict = app.add_subcommand("predict", "estimate demand for prediction cells and write demand.json");
    add_common(predict, predict_opts, true);
    predict->add_option("--model", model_path, "model JSON (default: <output_dir>/model.json)");

    Common solve_opts;
    std::string instance_path, demand_path, solution_out;
    auto* solve = app.add_subcommand("solve", "solve the siting/sizing problem");
    add_common(solve, solve_opts, false);
    solve->add_option("--instance", instance_path, "solve a saved instance JSON");
    solve->add_option("--demand", demand_path, "demand JSON used to build the instance (default: <output_dir>/demand.json)");
    solve->add_option("--out", solution_out, "solution JSON path");

    Common validate_opts;
    std::string v_instance, v_solution;
    auto* validate = app.add_subcommand("validate", "check a solution against every constraint of an instance");
    add_common(validate, validate_opts, false);
    validate->add_option("--instance", v_instance, "instance JSON (default: <output_dir>/instance.json)");
    validate->add_option("--solution", v_solution, "solution JSON (default: <output_dir>/solution.json)");

    Common run_opts;
    std::optional<bool> emit_profiles;
    auto* run = app.add_subcommand("run", "run every stage and write the plan report");
    add_common(run, run_opts, true);
    run->add_flag("--emit-profiles,!--no-emit-profiles", emit_profiles, "write voltage and line-current CSV profiles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pl::kExitConfig;
    }

    try {
        if (partition->parsed()) {
            evplan::geo::CellGrid grid;
            fs::path out = partition_out;
            if (!partition_opts.config.empty()) {
                auto cfg = load(partition_opts);
                if (bbox_arg.size() == 4) cfg.bbox = {bbox_arg[0], bbox_arg[1], bbox_arg[2], bbox_arg[3]};
                if (cell_km > 0.0) cfg.cell_km = cell_km;
                grid = pl::ingest(cfg).grid;
                if (out.empty()) out = out_dir(cfg) / "cells.geojson";
            } else {
                if (bbox_arg.size() != 4 || !(cell_km > 0.0)) {
                    std::cerr << "error: partition needs --config, or --bbox and --cell-km\n";
                    return pl::kExitConfig;
                }
                try {
                    grid = evplan::geo::partition({bbox_arg[0], bbox_arg[1], bbox_arg[2], bbox_arg[3]}, cell_km);
                } catch (const std::invalid_argument& e) {
                    throw pl::PipelineError("config", pl::kExitConfig, e.what());
                }
                if (out.empty()) out = "cells.geojson";
            }
            pl::write_json(out, pl::cells_geojson(grid));
            std::cout << grid.rows << " x " << grid.cols << " = " << grid.cells.size() << " cells -> " << out.string()
                      << "\n";
            return pl::kExitOk;
        }

        if (train->parsed()) {
            const auto cfg = load(train_opts);
            const auto in = pl::ingest(cfg);
            const auto tr = pl::train(cfg, in);
            pl::write_json(out_dir(cfg) / "model.json", evplan::demand::to_json(tr.model));
            pl::write_json(out_dir(cfg) / "metrics.json", tr.metrics);
            std::cout << tr.metrics.dump() << "\n";
            return pl::kExitOk;
        }

        if (predict->parsed()) {
            const auto cfg = load(predict_opts);
            const fs::path mp = model_path.empty() ? out_dir(cfg) / "model.json" : fs::path(model_path);
            evplan::demand::GbtModel model;
            try {
                model = evplan::demand::model_from_json(read_json(mp.string()));
            } catch (const std::exception& e) {
                throw pl::PipelineError("predict", pl::kExitModel, e.what());
            }
            const auto in = pl::ingest(cfg);
            const auto est = pl::predict(model, cfg, in);
            pl::write_json(out_dir(cfg) / "demand.json", evplan::demand::to_json(est));
            std::cout << est.size() << " demand estimates -> " << (out_dir(cfg) / "demand.json").string() << "\n";
            return pl::kExitOk;
        }

        if (solve->parsed()) {
            evplan::coverage::CoverageSolution sol;
            fs::path out = solution_out;
            if (!instance_path.empty()) {
                evplan::coverage::CoverageInstance inst;
                try {
                    inst = evplan::coverage::instance_from_json(read_json(instance_path));
                } catch (const std::exception& e) {
                    throw pl::PipelineError("solve", pl::kExitIngest, e.what());
                }
                pl::PipelineConfig cfg;
                if (!solve_opts.config.empty()) cfg = load(solve_opts);
                if (solve_opts.time_limit) cfg.solver.time_limit_s = *solve_opts.time_limit;
                if (solve_opts.max_new_stations) inst.max_new_stations = *solve_opts.max_new_stations;
                sol = pl::solve(cfg, inst);
                if (out.empty()) out = "solution.json";
            } else {
                if (solve_opts.config.empty()) {
                    std::cerr << "error: solve needs --instance or --config\n";
                    return pl::kExitConfig;
                }
                const auto cfg = load(solve_opts);
                const fs::path dp = demand_path.empty() ? out_dir(cfg) / "demand.json" : fs::path(demand_path);
                std::vector<evplan::demand::DemandEstimate> est;
                try {
                    est = evplan::demand::demand_from_json(read_json(dp.string()));
                } catch (const std::exception& e) {
                    throw pl::PipelineError("solve", pl::kExitModel, e.what());
                }
                const auto in = pl::ingest(cfg);
                const auto net = pl::network(cfg, in, est);
                pl::write_json(out_dir(cfg) / "instance.json", evplan::coverage::to_json(net.instance));
                sol = pl::solve(cfg, net.instance);
                if (out.empty()) out = out_dir(cfg) / "solution.json";
            }
            pl::write_json(out, evplan::coverage::to_json(sol));
            std::cout << evplan::coverage::to_string(sol.status) << " -> " << out.string() << "\n";
            for (const auto& w : sol.infeasibility_witness) std::cout << "  witness: " << w << "\n";
            return solution_exit(sol);
        }

        if (validate->parsed()) {
            fs::path ip = v_instance;
            fs::path sp = v_solution;
            if (ip.empty() || sp.empty()) {
                if (validate_opts.config.empty()) {
                    std::cerr << "error: validate needs --instance and --solution, or --config\n";
                    return pl::kExitConfig;
                }
                const auto cfg = load(validate_opts);
                if (ip.empty()) ip = out_dir(cfg) / "instance.json";
                if (sp.empty()) sp = out_dir(cfg) / "solution.json";
            }
            evplan::coverage::CoverageInstance inst;
            evplan::coverage::CoverageSolution sol;
            try {
                inst = evplan::coverage::instance_from_json(read_json(ip.string()));
                sol = evplan::coverage::solution_from_json(read_json(sp.string()));
            } catch (const std::exception& e) {
                throw pl::PipelineError("validate", pl::kExitIngest, e.what());
            }
            const auto violations = evplan::coverage::validate(sol, inst);
            std::cout << evplan::coverage::to_json(violations).dump(2) << "\n";
            if (sol.status == evplan::coverage::SolveStatus::Infeasible) return pl::kExitInfeasible;
            return violations.empty() ? pl::kExitOk : pl::kExitViolations;
        }

        if (run->parsed()) {
            auto cfg = load(run_opts);
            if (emit_profiles) cfg.emit_profiles = *emit_profiles;
            const auto report = pl::run(cfg);
            std::cout << "status " << report.report.at("status").get<std::string>() << " -> "
                      << (out_dir(cfg) / "plan_report.json").string() << "\n";
            return report.exit_code;
        }
    } catch (const pl::PipelineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const evplan::ingest::IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pl::kExitIngest;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pl::kExitConfig;
    }
    return pl::kExitOk;
}
