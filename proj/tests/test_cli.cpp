#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "evplan/ingest.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSmoke = EVPLAN_SMOKE_DIR;

struct Outcome {
    int code = -1;
    std::string out;
};

// Runs the CLI with stdout and stderr captured to a file next to `dir`.
Outcome cli(const fs::path& dir, const std::string& args) {
    fs::create_directories(dir);
    const fs::path log = dir / "cli.log";
    const std::string cmd = std::string("\"") + EVPLAN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = evplan::ingest::read_file(log);
    return o;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("evplan_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) { return evplan::ingest::read_file(p); }

std::string config_arg() { return "--config \"" + (kSmoke / "config.json").string() + "\""; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("partition of the study box writes one feature per cell") {
    const auto dir = scratch("partition");
    const auto o = cli(dir, "partition --bbox 33.0165 32.6769 -96.5688 -96.9282 --cell-km 2 --out \"" +
                                (dir / "cells.geojson").string() + "\"");
    REQUIRE(o.code == 0);
    const auto j = json::parse(slurp(dir / "cells.geojson"));
    CHECK(j.at("features").size() == 323);
}

TEST_CASE("train then predict produce metrics and demand files") {
    const auto dir = scratch("train");
    const std::string common = config_arg() + " -o \"" + dir.string() + "\"";
    REQUIRE(cli(dir, "train " + common).code == 0);
    const auto metrics = json::parse(slurp(dir / "metrics.json"));
    CHECK(metrics.at("train").contains("mse"));
    CHECK(metrics.at("train").contains("r2"));
    REQUIRE(cli(dir, "predict " + common).code == 0);
    const auto demand = json::parse(slurp(dir / "demand.json"));
    CHECK(demand.at("cells").size() == 7);
}

TEST_CASE("solve on a saved instance is accepted by validate") {
    const auto dir = scratch("solve");
    const std::string common = config_arg() + " -o \"" + dir.string() + "\"";
    REQUIRE(cli(dir, "run " + common).code == 0);
    const auto inst = (dir / "instance.json").string();
    const auto sol = (dir / "resolved.json").string();
    REQUIRE(cli(dir, "solve --instance \"" + inst + "\" --out \"" + sol + "\"").code == 0);
    const auto v = cli(dir, "validate --instance \"" + inst + "\" --solution \"" + sol + "\"");
    CHECK(v.code == 0);
    CHECK(slurp(sol) == slurp(dir / "solution.json"));
}

TEST_CASE("run equals the manual composition of the subcommands") {
    const auto a = scratch("compose_run");
    const auto b = scratch("compose_manual");
    REQUIRE(cli(a, "run " + config_arg() + " -o \"" + a.string() + "\"").code == 0);
    const std::string common = config_arg() + " -o \"" + b.string() + "\"";
    REQUIRE(cli(b, "train " + common).code == 0);
    REQUIRE(cli(b, "predict " + common).code == 0);
    REQUIRE(cli(b, "solve " + common).code == 0);
    REQUIRE(cli(b, "validate " + common).code == 0);
    for (const char* f : {"model.json", "metrics.json", "demand.json", "instance.json", "solution.json"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
}

TEST_CASE("exit codes distinguish failure classes") {
    const auto dir = scratch("codes");
    CHECK(cli(dir, "").code == 2);
    CHECK(cli(dir, "frobnicate").code == 2);
    CHECK(cli(dir, "run --config \"" + (dir / "nope.json").string() + "\"").code == 2);

    const auto bad_poi = dir / "bad_poi";
    fs::create_directories(bad_poi);
    fs::copy_file(kSmoke / "config.json", bad_poi / "config.json");
    fs::copy_file(kSmoke / "chargers.csv", bad_poi / "chargers.csv");
    {
        std::FILE* f = std::fopen((bad_poi / "pois.csv").c_str(), "w");
        std::fputs("lat,lon,category\n32.8,-96.8,airport\n", f);
        std::fclose(f);
    }
    const auto ingest_fail = cli(dir, "run --config \"" + (bad_poi / "config.json").string() + "\" -o \"" +
                                          (dir / "o1").string() + "\"");
    CHECK(ingest_fail.code == 3);
    CHECK(ingest_fail.out.find("ingest") != std::string::npos);

    const auto infeasible = cli(dir, "run " + config_arg() + " --max-new-stations 0 -o \"" + (dir / "o2").string() + "\"");
    CHECK(infeasible.code == 5);
}

}  // TEST_SUITE
