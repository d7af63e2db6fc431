#include <doctest.h>

#include <cmath>
#include <complex>

#include "evplan/grid.hpp"
#include "evplan/power_flow.hpp"
#include "evplan/rng.hpp"
#include "support/oracles.hpp"

using namespace evplan;
using namespace evplan::power_flow;
using grid::Feeder;

namespace {

using cplx = std::complex<double>;

Feeder two_bus(double r, double x, double p_kw, double q_kvar) {
    Feeder f;
    f.buses = {{"s", 0, 0, 12.47, true, {}}, {"d", 1, 0, 12.47, false, {}}};
    f.lines = {{"l", "s", "d", r, x, grid::kDefaultAmpacityA}};
    if (p_kw != 0.0 || q_kvar != 0.0) f.loads = {{"d", p_kw, q_kvar}};
    return f;
}

struct Balance {
    double slack_kw = 0.0;
    double load_kw = 0.0;
    double losses_kw = 0.0;
};

// Power balance recomputed from the reported voltages only: branch currents
// from Ohm's law, losses from those currents, slack injection from the slack
// bus voltage and its outgoing currents.
Balance balance_from_voltages(const Feeder& f, const PowerFlowResult& r) {
    const double v_base = f.buses[0].base_kv * 1000.0 / std::sqrt(3.0);
    auto phasor = [&](std::size_t b) { return std::polar(r.v_pu[b] * v_base, r.v_angle_rad[b]); };
    const std::size_t slack = f.slack_index();
    Balance out;
    cplx slack_s = 0.0;
    for (const auto& line : f.lines) {
        const std::size_t a = *f.find_bus(line.from);
        const std::size_t b = *f.find_bus(line.to);
        const cplx z(line.r_ohm, line.x_ohm);
        const cplx i = (phasor(a) - phasor(b)) / z;
        out.losses_kw += 3.0 * std::norm(i) * line.r_ohm / 1000.0;
        if (a == slack) slack_s += phasor(a) * std::conj(i);
        if (b == slack) slack_s -= phasor(b) * std::conj(i);
    }
    out.slack_kw = 3.0 * slack_s.real() / 1000.0;
    for (const auto& l : f.loads) out.load_kw += l.p_kw;
    return out;
}

PowerFlowResult fake_result(std::vector<double> v, std::vector<double> i) {
    PowerFlowResult r;
    r.v_angle_rad.assign(v.size(), 0.0);
    r.v_pu = std::move(v);
    r.i_amps = std::move(i);
    r.converged = true;
    return r;
}

}  // namespace

TEST_SUITE("power_flow") {

TEST_CASE("an unloaded feeder sits at 1 pu with no losses") {
    const auto f = grid::synthetic_feeder({8, 2, 12.47, 0.8, 0.3, 0.4, 0, 0, 0.95, 600, 1});
    Feeder empty = f;
    empty.loads.clear();
    const auto r = solve_bfs(empty);
    CHECK(r.converged);
    for (const double v : r.v_pu) CHECK(v == 1.0);
    CHECK(r.losses_kw == 0.0);
    CHECK(r.slack_p_kw == 0.0);
}

TEST_CASE("two-bus case matches the closed form") {
    // tests/oracles/oracles.py: quadratic in |V2|^2
    const auto r = solve_bfs(two_bus(0.8, 1.2, 2500.0, 900.0), {1e-13, 100});
    REQUIRE(r.converged);
    CHECK(std::abs(r.v_pu[1] - 0.97967000369809436) <= 1e-9);
    CHECK(r.i_amps[0] == doctest::Approx(125.57276554046756).epsilon(1e-9));
    CHECK(r.losses_kw == doctest::Approx(37.844446669154972).epsilon(1e-9));
}

TEST_CASE("default tolerance already meets the closed form at 1e-9") {
    const auto r = solve_bfs(two_bus(0.8, 1.2, 2500.0, 900.0));
    REQUIRE(r.converged);
    CHECK(std::abs(r.v_pu[1] - 0.97967000369809436) <= 1e-9);
}

TEST_CASE("voltages agree with full Newton on random feeders") {
    Rng rng(21);
    for (int t = 0; t < 40; ++t) {
        const auto f = oracle::random_feeder(rng, 2 + rng.below(40), 400.0);
        const auto bfs = solve_bfs(f);
        const auto nr = oracle::newton_power_flow(f);
        REQUIRE(bfs.converged);
        REQUIRE(nr.converged);
        for (std::size_t b = 0; b < f.buses.size(); ++b) {
            CHECK(std::abs(bfs.v_pu[b] - nr.v_pu[b]) <= 1e-6);
            CHECK(std::abs(bfs.v_angle_rad[b] - nr.angle_rad[b]) <= 1e-6);
        }
    }
}

TEST_CASE("slack injection balances loads plus losses") {
    Rng rng(22);
    for (int t = 0; t < 40; ++t) {
        const auto f = oracle::random_feeder(rng, 2 + rng.below(40), 400.0);
        const auto r = solve_bfs(f);
        REQUIRE(r.converged);
        double load = 0.0;
        for (const auto& l : f.loads) load += l.p_kw;
        const double scale = std::max(1.0, std::abs(r.slack_p_kw));
        CHECK(std::abs(r.slack_p_kw - (load + r.losses_kw)) <= 1e-6 * scale);

        const auto b = balance_from_voltages(f, r);
        const double vscale = std::max(1.0, std::abs(b.slack_kw));
        CHECK(std::abs(b.slack_kw - (b.load_kw + b.losses_kw)) <= 1e-6 * vscale);
        CHECK(std::abs(b.losses_kw - r.losses_kw) <= 1e-6 * vscale);
    }
}

TEST_CASE("more load never raises any voltage") {
    auto f = grid::synthetic_feeder({15, 2, 12.47, 0.8, 0.3, 0.4, 20, 80, 0.95, 600, 4});
    auto prev = solve_bfs(f);
    for (int step = 0; step < 5; ++step) {
        for (auto& l : f.loads) {
            l.p_kw *= 1.5;
            l.q_kvar *= 1.5;
        }
        const auto next = solve_bfs(f);
        REQUIRE(next.converged);
        for (std::size_t b = 0; b < f.buses.size(); ++b) CHECK(next.v_pu[b] <= prev.v_pu[b] + 1e-12);
        CHECK(next.losses_kw >= prev.losses_kw);
        prev = next;
    }
}

TEST_CASE("solves are deterministic") {
    Rng rng(23);
    const auto f = oracle::random_feeder(rng, 30, 300.0);
    CHECK(solve_bfs(f) == solve_bfs(f));
}

TEST_CASE("non-radial and mixed-base feeders are rejected") {
    auto f = two_bus(1, 1, 10, 0);
    f.lines.push_back({"l2", "s", "d", 1, 1, 600});
    CHECK_THROWS_AS(solve_bfs(f), PowerFlowError);
    auto g = two_bus(1, 1, 10, 0);
    g.buses[1].base_kv = 4.16;
    CHECK_THROWS_AS(solve_bfs(g), PowerFlowError);
}

TEST_CASE("voltage collapse is reported as non-convergence") {
    // far beyond the maximum transferable power of the line
    const auto r = solve_bfs(two_bus(5.0, 5.0, 200000.0, 0.0));
    CHECK_FALSE(r.converged);
}

TEST_CASE("charger integration adds station load") {
    const auto f = two_bus(0.5, 0.5, 100.0, 20.0);
    CHECK(integrate_chargers(f, {}) == f);
    CHECK(integrate_chargers(f, {{"d", 0.0}}) == f);

    const auto g = integrate_chargers(f, {{"d", 4.0}});
    CHECK(g.bus_load_kw("d") == doctest::Approx(124.0));
    CHECK(g.bus_load_kvar("d") == doctest::Approx(20.0));
    CHECK(f.loads.size() == 1);

    const auto h = integrate_chargers(f, {{"d", 4.0}, {"d", 2.0}, {"s", 1.0}}, 7.0, 0.9);
    CHECK(h.bus_load_kw("d") == doctest::Approx(142.0));
    CHECK(h.bus_load_kw("s") == doctest::Approx(7.0));
    CHECK(h.bus_load_kvar("d") == doctest::Approx(20.0 + 42.0 * std::tan(std::acos(0.9))));

    CHECK_THROWS_AS(integrate_chargers(f, {{"nowhere", 1.0}}), grid::GridError);
}

TEST_CASE("station loads follow the plan's activity flags") {
    coverage::CoverageSolution plan;
    plan.open_new = {1.0, 0.0};
    plan.expand = {0.0, 1.0};
    plan.ports_new = {5.0, 0.0};
    plan.ports_existing = {0.0, 3.0};
    const auto loads = station_loads(plan, {"a", "b", "c", "d"});
    REQUIRE(loads.size() == 2);
    CHECK(loads[0].bus == "a");
    CHECK(loads[0].ports == 5.0);
    CHECK(loads[1].bus == "d");
    CHECK(loads[1].ports == 3.0);
}

TEST_CASE("validation flags exactly the boundary violations") {
    Feeder f;
    f.buses = {{"s", 0, 0, 12.47, true, {}}, {"a", 1, 0, 12.47, false, {}}, {"b", 2, 0, 12.47, false, {}},
               {"c", 3, 0, 12.47, false, {}}};
    f.lines = {{"l1", "s", "a", 1, 1, 600}, {"l2", "a", "b", 1, 1, 600}, {"l3", "b", "c", 1, 1, 600}};
    const auto pre = fake_result({1.0, 0.99, 0.98, 0.97}, {10, 10, 10});
    const auto post = fake_result({1.0, 0.81, 0.8, 0.7999999}, {600.1, 600.0, 599.9});
    const auto rep = validate_grid(f, pre, post);
    CHECK(rep.buses_below_limit == std::vector<std::string>{"c"});
    CHECK(rep.lines_over_ampacity == std::vector<std::string>{"l1"});
    CHECK(rep.min_v_pu == 0.7999999);
    CHECK_FALSE(rep.ok());
    CHECK(rep.buses.size() == 4);
    CHECK(rep.lines[0].post_i_a == 600.1);

    const auto clean = validate_grid(f, pre, pre);
    CHECK(clean.ok());

    auto bad = post;
    bad.converged = false;
    CHECK_THROWS(validate_grid(f, pre, bad));
}

TEST_CASE("validation on a solved feeder with low ampacity") {
    auto f = two_bus(0.5, 0.5, 0.0, 0.0);
    f = integrate_chargers(f, {{"d", 100.0}});
    const auto pre = solve_bfs(two_bus(0.5, 0.5, 0.0, 0.0));
    const auto post = solve_bfs(f);
    REQUIRE(post.converged);
    f.lines[0].ampacity_a = post.i_amps[0];
    CHECK(validate_grid(f, pre, post).ok());
    f.lines[0].ampacity_a = post.i_amps[0] * (1.0 - 1e-9);
    CHECK(validate_grid(f, pre, post).lines_over_ampacity.size() == 1);
}

TEST_CASE("profile CSVs list every bus and line") {
    auto f = grid::synthetic_feeder({6, 2, 12.47, 0.8, 0.3, 0.4, 20, 80, 0.95, 600, 2});
    const auto pre = solve_bfs(f);
    const auto rep = validate_grid(f, pre, pre);
    const auto v = voltage_profile_csv(rep);
    const auto i = line_current_csv(rep);
    CHECK(v.rfind("bus,pre_v_pu,post_v_pu\n", 0) == 0);
    CHECK(i.rfind("line,from,to,ampacity_a,pre_i_a,post_i_a\n", 0) == 0);
    CHECK(std::count(v.begin(), v.end(), '\n') == 7);
    CHECK(std::count(i.begin(), i.end(), '\n') == 6);
}

}  // TEST_SUITE
