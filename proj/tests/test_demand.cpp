#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "evplan/demand.hpp"
#include "evplan/rng.hpp"

using namespace evplan;
using namespace evplan::demand;

namespace {

std::vector<FeatureVector> random_points(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<FeatureVector> out(n, FeatureVector(dim));
    for (auto& p : out) {
        for (auto& v : p) v = rng.uniform(-5.0, 5.0);
    }
    return out;
}

double dist2(const FeatureVector& a, const FeatureVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// True when s = a + u (b - a) for some u in [0, 1], coordinate-wise within tol.
bool on_segment(const FeatureVector& s, const FeatureVector& a, const FeatureVector& b, double tol) {
    std::size_t axis = 0;
    for (std::size_t i = 1; i < a.size(); ++i) {
        if (std::abs(b[i] - a[i]) > std::abs(b[axis] - a[axis])) axis = i;
    }
    const double span = b[axis] - a[axis];
    const double u = span == 0.0 ? 0.0 : (s[axis] - a[axis]) / span;
    if (u < -tol || u > 1.0 + tol) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] + u * (b[i] - a[i]) - s[i]) > tol) return false;
    }
    return true;
}

// Brute-force k nearest neighbours by (distance, index).
std::vector<std::size_t> knn(const std::vector<FeatureVector>& pts, std::size_t i, std::size_t k) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j != i) idx.push_back(j);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return dist2(pts[i], pts[a]) < dist2(pts[i], pts[b]);
    });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

bool explained_by_smote(const FeatureVector& s, const std::vector<FeatureVector>& minority, std::size_t k, double tol) {
    for (std::size_t i = 0; i < minority.size(); ++i) {
        for (const std::size_t j : knn(minority, i, k)) {
            if (on_segment(s, minority[i], minority[j], tol)) return true;
        }
    }
    return false;
}

// Deterministic target over six binary features.
double target_fn(const FeatureVector& x) {
    return 1.0 + 2.0 * x[0] + 1.5 * x[1] * x[2] + x[3] - 0.5 * x[4] + 0.75 * x[5] * x[0];
}

std::vector<Sample> binary_rows(Rng& rng, std::size_t n) {
    std::vector<Sample> rows;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.features.resize(kFeatureCount);
        for (auto& v : s.features) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        s.target = target_fn(s.features);
        s.label = i % 2 ? geo::CellClass::C1 : geo::CellClass::C4;
        rows.push_back(std::move(s));
    }
    return rows;
}

// Independent prediction: walk each tree by hand.
double manual_predict(const GbtModel& m, const FeatureVector& x) {
    double sum = 0.0;
    for (const auto& t : m.trees) {
        int id = 0;
        while (t.nodes[static_cast<std::size_t>(id)].feature >= 0) {
            const auto& n = t.nodes[static_cast<std::size_t>(id)];
            id = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        sum += t.nodes[static_cast<std::size_t>(id)].weight;
    }
    return m.base_score + m.params.learning_rate * sum;
}

}  // namespace

TEST_SUITE("demand") {

TEST_CASE("datasets take C1 and C4 for training and C3 for prediction") {
    auto grid = geo::partition({33.0, 32.9, -96.7, -96.8}, 2.0);
    REQUIRE(grid.cells.size() >= 4);
    std::vector<geo::Poi> pois{{grid.cells[0].center, geo::PoiCategory::School},
                               {grid.cells[1].center, geo::PoiCategory::Theater},
                               {grid.cells[1].center, geo::PoiCategory::Theater}};
    std::vector<geo::ChargerSite> chargers{{grid.cells[0].center, 3}, {grid.cells[2].center, 2}};
    geo::assign_points(grid, pois, chargers);
    // cell 0: C1, cell 1: C3, cell 2: C2, rest: C4
    const auto sets = build_datasets(grid);
    for (const auto& s : sets.train.rows) {
        CHECK((s.label == geo::CellClass::C1 || s.label == geo::CellClass::C4));
        CHECK(s.cell_index != 2);
    }
    CHECK(sets.train.rows.size() == grid.cells.size() - 2);
    REQUIRE(sets.predict.rows.size() == 1);
    CHECK(sets.predict.rows[0].cell_index == 1);
    CHECK(sets.predict.rows[0].features == FeatureVector{0, 0, 0, 0, 1, 0});
    CHECK(cell_features(grid.cells[1], true) == FeatureVector{0, 0, 0, 0, 2, 0});
    CHECK(sets.train.rows.front().target == 3.0);
}

TEST_CASE("smote output size, originals first, determinism") {
    Rng rng(1);
    const auto minority = random_points(rng, 12, 4);
    const auto out = smote(minority, 5, 40, 99);
    REQUIRE(out.size() == 40);
    for (std::size_t i = 0; i < minority.size(); ++i) CHECK(out[i] == minority[i]);
    CHECK(out == smote(minority, 5, 40, 99));
    CHECK(out != smote(minority, 5, 40, 100));
    CHECK(smote(minority, 5, 12, 1) == minority);
}

TEST_CASE("every synthetic point lies on a segment to one of its k nearest neighbours") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + rng.below(15);
        const std::size_t k = 1 + rng.below(6);
        const auto minority = random_points(rng, n, 3);
        const auto out = smote(minority, k, n + 30, rng.next());
        for (std::size_t i = n; i < out.size(); ++i) CHECK(explained_by_smote(out[i], minority, k, 1e-9));
    }
}

TEST_CASE("smote preconditions") {
    Rng rng(2);
    const auto one = random_points(rng, 1, 3);
    const auto pts = random_points(rng, 5, 3);
    CHECK_THROWS_AS(smote(one, 5, 4, 1), ModelError);
    CHECK_THROWS_AS(smote(pts, 0, 10, 1), ModelError);
    CHECK_THROWS_AS(smote(pts, 5, 4, 1), ModelError);
}

TEST_CASE("class balancing raises the minority to the majority count") {
    Rng rng(4);
    std::vector<Sample> rows;
    for (int i = 0; i < 50; ++i) rows.push_back({{1, 0, 1, 0, 0, 1}, 3.0 + rng.uniform(0, 2), geo::CellClass::C1, 0, false});
    for (int i = 0; i < 81; ++i) rows.push_back({{0, 0, 0, 0, 0, 0}, 0.0, geo::CellClass::C4, 0, false});
    const auto r = balance_classes(rows, 5, 8);
    std::size_t c1 = 0, c4 = 0, synthetic = 0;
    for (const auto& s : r.rows) {
        (s.label == geo::CellClass::C1 ? c1 : c4)++;
        synthetic += s.synthetic ? 1 : 0;
    }
    CHECK(c1 == 81);
    CHECK(c4 == 81);
    CHECK(synthetic == 31);
    CHECK(r.applied);
    CHECK(r.minority_label == geo::CellClass::C1);
}

TEST_CASE("stratified split keeps rounded shares per class") {
    Rng rng(6);
    std::vector<Sample> rows;
    for (int i = 0; i < 81; ++i) rows.push_back({{0}, 0.0, geo::CellClass::C1, 0, false});
    for (int i = 0; i < 33; ++i) rows.push_back({{0}, 1.0, geo::CellClass::C4, 0, false});
    const auto s = stratified_split(rows, 0.7, 1);
    std::size_t c1 = 0;
    for (const auto& r : s.train) c1 += r.label == geo::CellClass::C1 ? 1 : 0;
    CHECK(c1 == 57);                       // round(0.7 * 81)
    CHECK(s.train.size() - c1 == 23);      // round(0.7 * 33)
    CHECK(s.test.size() == rows.size() - s.train.size());
    CHECK(stratified_split(rows, 0.7, 1).train.size() == s.train.size());
}

TEST_CASE("metrics match the closed-form oracle") {
    const std::vector<double> y{3.0, 0.0, 1.5, 4.0, 2.0};
    const std::vector<double> p{2.5, 0.5, 1.0, 4.5, 2.0};
    CHECK(mean_squared_error(y, p) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(r2_score(y, p) == doctest::Approx(0.8913043478260869).epsilon(1e-15));
    const std::vector<double> flat{1.0, 1.0};
    CHECK_THROWS_AS(r2_score(flat, flat), ModelError);
}

TEST_CASE("gbt structure and prediction formula") {
    Rng rng(10);
    const auto rows = binary_rows(rng, 200);
    GbtParams params;
    params.rounds = 60;
    params.max_depth = 3;
    params.learning_rate = 0.1;
    const auto model = fit(rows, params, 5);
    CHECK(model.trees.size() <= params.rounds);
    for (const auto& t : model.trees) CHECK(t.depth() <= params.max_depth);
    for (const auto& r : rows) {
        CHECK(model.raw_predict(r.features) == doctest::Approx(manual_predict(model, r.features)).epsilon(1e-12));
    }
    CHECK(fit(rows, params, 5) == model);
}

TEST_CASE("training loss is non-increasing per round without subsampling") {
    Rng rng(11);
    const auto rows = binary_rows(rng, 150);
    GbtParams params;
    params.rounds = 100;
    params.row_subsample = 1.0;
    params.feature_subsample = 1.0;
    params.learning_rate = 0.05;
    const auto model = fit(rows, params, 1);
    double prev = INFINITY;
    for (std::size_t t = 0; t <= model.trees.size(); ++t) {
        double mse = 0.0;
        for (const auto& r : rows) {
            const double e = model.raw_predict(r.features, t) - r.target;
            mse += e * e;
        }
        mse /= static_cast<double>(rows.size());
        CHECK(mse <= prev + 1e-12);
        prev = mse;
    }
}

TEST_CASE("predictions are clamped at zero and arity is checked") {
    std::vector<Sample> rows;
    for (int i = 0; i < 20; ++i) {
        rows.push_back({{static_cast<double>(i % 2), 0, 0, 0, 0, 0}, i % 2 ? -5.0 : 1.0, geo::CellClass::C4, 0, false});
    }
    GbtParams params;
    params.rounds = 50;
    params.learning_rate = 0.3;
    const auto model = fit(rows, params, 1);
    const FeatureVector neg{1, 0, 0, 0, 0, 0};
    CHECK(model.raw_predict(neg) < 0.0);
    CHECK(predict(model, neg) == 0.0);
    const FeatureVector short_x{1, 0};
    CHECK_THROWS_AS(predict(model, short_x), ModelError);
}

TEST_CASE("model and demand JSON round-trip exactly") {
    Rng rng(12);
    const auto rows = binary_rows(rng, 80);
    GbtParams params;
    params.rounds = 30;
    const auto model = fit(rows, params, 9);
    const auto back = model_from_json(nlohmann::json::parse(to_json(model).dump()));
    CHECK(back == model);

    std::vector<DemandEstimate> est{{3, 1, 2, {32.81, -96.8}, 2.75}, {7, 2, 0, {32.9, -96.7}, 0.1 + 0.2}};
    const auto est_back = demand_from_json(nlohmann::json::parse(to_json(est).dump()));
    REQUIRE(est_back.size() == 2);
    CHECK(est_back[1].demand == est[1].demand);
    CHECK(est_back[0].center == est[0].center);
    CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), ModelError);
}

TEST_CASE("hyperparameters are validated") {
    GbtParams p;
    CHECK_NOTHROW(p.validate());
    CHECK(p.rounds == 500);
    CHECK(p.max_depth == 8);
    CHECK(p.learning_rate == 0.01);
    p.row_subsample = 0.0;
    CHECK_THROWS_AS(p.validate(), ModelError);
}

}  // TEST_SUITE
