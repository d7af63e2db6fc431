#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "evplan/geo.hpp"
#include "evplan/grid.hpp"
#include "evplan/rng.hpp"
#include "support/oracles.hpp"

using namespace evplan;
using namespace evplan::grid;

namespace {

const char* kThreeBus = R"(# three-bus test feeder
feeder demo
bus s x=0 y=0 kv=12.47 slack
bus a x=1 y=0 kv=12.47
bus b x=1 y=2 kv=12.47
line l1 from=s to=a r=0.2 x=0.3 amps=400
line l2 from=a to=b r=0.1 x=0.1
load a kw=50 kvar=10
load b kw=20
)";

FeederError::Kind kind_of(const std::string& text) {
    try {
        parse_feeder(text);
    } catch (const FeederError& e) {
        return e.kind();
    }
    FAIL("parsed without error: " << text);
    return FeederError::Kind::Syntax;
}

FeederError error_of(const std::string& text) {
    try {
        parse_feeder(text);
    } catch (const FeederError& e) {
        return e;
    }
    FAIL("parsed without error");
    return FeederError(FeederError::Kind::Syntax, 0, 0, "");
}

const geo::BoundingBox kBox{32.9, 32.8, -96.7, -96.8};

}  // namespace

TEST_SUITE("grid") {

TEST_CASE("parses a small feeder") {
    const auto f = parse_feeder(kThreeBus);
    CHECK(f.name == "demo");
    REQUIRE(f.buses.size() == 3);
    CHECK(f.buses[0].is_slack);
    CHECK(f.slack_index() == 0);
    CHECK(f.buses[2].y == 2.0);
    REQUIRE(f.lines.size() == 2);
    CHECK(f.lines[0].ampacity_a == 400.0);
    CHECK(f.lines[1].ampacity_a == kDefaultAmpacityA);
    CHECK(f.bus_load_kw("a") == 50.0);
    CHECK(f.bus_load_kvar("b") == 0.0);
    CHECK(f.find_bus("b") == 2u);
    CHECK_FALSE(f.find_bus("B").has_value());
}

TEST_CASE("keywords are case-insensitive and comments are ignored") {
    const auto f = parse_feeder("BUS s X=0 Y=0 KV=4.16 SLACK  # root\n\nBus t x=1 y=1 kv=4.16\nLINE l from=s TO=t r=1 x=1\n");
    CHECK(f.buses.size() == 2);
    CHECK(f.lines.size() == 1);
}

TEST_CASE("a cycle names the closing line and its location") {
    const std::string text =
        "bus s x=0 y=0 kv=12.47 slack\n"
        "bus a x=1 y=0 kv=12.47\n"
        "bus b x=1 y=1 kv=12.47\n"
        "line l1 from=s to=a r=1 x=1\n"
        "line l2 from=a to=b r=1 x=1\n"
        "line l3 from=b to=s r=1 x=1\n";
    const auto e = error_of(text);
    CHECK(e.kind() == FeederError::Kind::Cycle);
    CHECK(e.line() == 6);
    CHECK(e.column() >= 1);
    CHECK(e.detail().find("l3") != std::string::npos);
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
}

TEST_CASE("structural errors have distinct kinds") {
    const std::string s = "bus s x=0 y=0 kv=12.47 slack\n";
    CHECK(kind_of(s + "line l from=s to=q r=1 x=1\n") == FeederError::Kind::UnknownBus);
    CHECK(kind_of(s + "load q kw=1\n") == FeederError::Kind::UnknownBus);
    CHECK(kind_of(s + "bus s x=1 y=0 kv=12.47\n") == FeederError::Kind::DuplicateBus);
    CHECK(kind_of(s + "bus a x=1 y=0 kv=12.47\nbus b x=2 y=0 kv=12.47\nline l from=s to=a r=1 x=1\nline l from=a to=b r=1 x=1\n") ==
          FeederError::Kind::DuplicateLine);
    CHECK(kind_of("bus a x=1 y=0 kv=12.47\n") == FeederError::Kind::MissingSlack);
    CHECK(kind_of(s + "bus t x=1 y=0 kv=12.47 slack\n") == FeederError::Kind::MultipleSlack);
    CHECK(kind_of(s + "bus a x=1 y=0 kv=12.47\n") == FeederError::Kind::Disconnected);
    CHECK(kind_of(s + "transformer t1\n") == FeederError::Kind::Syntax);
    CHECK(kind_of(s + "bus a x=1 y=zero kv=12.47\n") == FeederError::Kind::InvalidValue);
    CHECK(kind_of("bus s x=0 y=0 kv=-1 slack\n") == FeederError::Kind::InvalidValue);
    CHECK(kind_of(s + "bus a x=1 y=0 kv=12.47\nline l from=s to=a r=-1 x=1\n") == FeederError::Kind::InvalidValue);
}

TEST_CASE("emit then parse reproduces the feeder") {
    const auto f = parse_feeder(kThreeBus);
    CHECK(parse_feeder(emit_feeder(f)) == f);
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto r = oracle::random_feeder(rng, 2 + rng.below(30), 500.0);
        CHECK(parse_feeder(emit_feeder(r)) == r);
    }
}

TEST_CASE("random feeders validate and adding any extra line breaks radiality") {
    Rng rng(4);
    for (int t = 0; t < 40; ++t) {
        auto f = oracle::random_feeder(rng, 3 + rng.below(20), 100.0);
        CHECK_NOTHROW(validate_feeder(f));
        const auto a = rng.below(f.buses.size());
        auto b = rng.below(f.buses.size());
        if (a == b) b = (b + 1) % f.buses.size();
        f.lines.push_back({"extra", f.buses[a].id, f.buses[b].id, 1.0, 1.0, kDefaultAmpacityA});
        CHECK_THROWS_AS(validate_feeder(f), FeederError);
    }
}

TEST_CASE("georegistration maps the local extent onto the box") {
    auto f = parse_feeder(kThreeBus);
    const auto g = georegister(f, kBox);
    // extent: x in [0, 1], y in [0, 2]
    CHECK(g.buses[0].location.lat == doctest::Approx(kBox.south).epsilon(1e-14));
    CHECK(g.buses[0].location.lon == doctest::Approx(kBox.west).epsilon(1e-14));
    CHECK(g.buses[2].location.lat == doctest::Approx(kBox.north).epsilon(1e-14));
    CHECK(g.buses[2].location.lon == doctest::Approx(kBox.east).epsilon(1e-14));
    const auto m = fit_affine(f, kBox);
    const auto mid = m.to_geo(0.5, 1.0);
    CHECK(mid.lat == doctest::Approx(32.85).epsilon(1e-14));
    CHECK(mid.lon == doctest::Approx(-96.75).epsilon(1e-14));

    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        const double x = rng.uniform(0, 1);
        const double y = rng.uniform(0, 2);
        const auto p = m.to_geo(x, y);
        CHECK(p.lat == doctest::Approx(kBox.south + (kBox.north - kBox.south) * y / 2.0).epsilon(1e-12));
        CHECK(p.lon == doctest::Approx(kBox.west + (kBox.east - kBox.west) * x).epsilon(1e-12));
        double bx = 0, by = 0;
        m.to_local(p, bx, by);
        CHECK(std::abs(bx - x) <= 1e-9);
        CHECK(std::abs(by - y) <= 1e-9);
    }

    auto flat = f;
    for (auto& b : flat.buses) b.y = 0.0;
    CHECK_THROWS_AS(fit_affine(flat, kBox), GridError);
}

TEST_CASE("nearest bus by great-circle distance") {
    auto f = georegister(parse_feeder(kThreeBus), kBox);
    const std::vector<std::size_t> all{0, 1, 2};
    const auto colocated = nearest_bus(f.buses[1].location, f, all);
    CHECK(colocated.bus == 1);
    CHECK(colocated.distance_km == 0.0);

    // equidistant buses tie to the smaller id
    Feeder twin;
    twin.buses = {Bus{"b", 0, 0, 12.47, true, {32.85, -96.76}}, Bus{"a", 0, 0, 12.47, false, {32.85, -96.74}}};
    CHECK(nearest_bus({32.85, -96.75}, twin, {0, 1}).bus == 1);

    CHECK_THROWS_AS(nearest_bus({32.85, -96.75}, f, {}), GridError);

    Rng rng(6);
    auto big = georegister(synthetic_feeder({20, 3, 12.47, 0.8, 0.3, 0.4, 20, 80, 0.95, 600, 9}), kBox);
    std::vector<std::size_t> idx(big.buses.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int t = 0; t < 50; ++t) {
        const geo::GeoPoint p{rng.uniform(kBox.south, kBox.north), rng.uniform(kBox.west, kBox.east)};
        const auto got = nearest_bus(p, big, idx);
        double best = INFINITY;
        for (const auto& b : big.buses) best = std::min(best, geo::haversine_km(p, b.location));
        CHECK(got.distance_km == best);
        // shrinking the pool never brings the nearest bus closer
        std::vector<std::size_t> half(idx.begin(), idx.begin() + static_cast<long>(idx.size() / 2));
        CHECK(nearest_bus(p, big, half).distance_km >= got.distance_km);
    }
}

TEST_CASE("screening keeps buses strictly above the threshold") {
    const std::string text =
        "bus s x=0 y=0 kv=12.47 slack\n"
        "bus b1 x=1 y=0 kv=12.47\n"
        "bus b2 x=2 y=0 kv=12.47\n"
        "bus b3 x=2 y=1 kv=12.47\n"
        "line l1 from=s to=b1 r=1 x=1\n"
        "line l2 from=b1 to=b2 r=1 x=1\n"
        "line l3 from=b2 to=b3 r=1 x=1\n";
    const auto f = georegister(parse_feeder(text), kBox);
    const std::vector<geo::GeoPoint> stations{f.buses[2].location, f.buses[3].location};

    const auto m = grid_matrices(f, stations, {1.0, 0.95, 0.89, 0.92});
    CHECK(m.pool == std::vector<std::size_t>{0, 1, 3});
    CHECK(m.bus_distance.rows == 3);
    CHECK(m.bus_distance.cols == 2);
    // station 0 sits on the excluded bus b2; its nearest pool bus is b3 or b1
    CHECK(m.assignment[1].bus == 3);
    CHECK(m.voltage_priority(2, 1) == doctest::Approx(1.0 - 0.92).epsilon(1e-15));
    CHECK(m.voltage_priority(0, 1) == 0.0);
    CHECK(m.voltage_priority(1, 1) == 0.0);
    for (std::size_t p = 0; p < 3; ++p) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(m.bus_distance(p, j) == geo::haversine_km(f.buses[m.pool[p]].location, stations[j]));
        }
    }

    const auto exact = grid_matrices(f, stations, {1.0, 0.90, 0.90, 0.90});
    CHECK(exact.pool == std::vector<std::size_t>{0});

    const auto flat = grid_matrices(f, stations, {1.0, 1.0, 1.0, 1.0});
    for (const double v : flat.voltage_priority.data) CHECK(v == 0.0);

    CHECK_THROWS_AS(grid_matrices(f, stations, {0.5, 0.5, 0.5, 0.5}), GridError);
    CHECK_THROWS_AS(grid_matrices(f, stations, {1.0, 1.0}), GridError);
}

TEST_CASE("synthetic feeders are valid and seeded") {
    SyntheticFeederParams p;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        p.seed = seed;
        p.n_buses = 2 + seed;
        const auto f = synthetic_feeder(p);
        CHECK(f.buses.size() == p.n_buses);
        CHECK(f.lines.size() == p.n_buses - 1);
        CHECK(f.buses[0].id == "b0");
        CHECK(f.buses[0].is_slack);
        CHECK_NOTHROW(validate_feeder(f));
        CHECK(synthetic_feeder(p) == f);
    }
}

}  // TEST_SUITE
