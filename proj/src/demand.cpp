#include "evplan/demand.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "evplan/rng.hpp"

namespace evplan::demand {

namespace {

// Split gains within this margin of gamma are treated as no improvement.
constexpr double kGainEpsilon = 1e-12;

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

void check_arity(std::span<const double> x, std::size_t expected) {
    if (x.size() != expected) {
        throw ModelError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                         std::to_string(expected));
    }
}

struct TreeBuilder {
    const std::vector<Sample>& rows;
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    const std::vector<std::size_t>& features;
    const GbtParams& params;
    RegressionTree tree;

    struct SplitChoice {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };

    double leaf_value(double g, double h) const { return -g / (h + params.l2_leaf_reg); }
    double score(double g, double h) const { return g * g / (h + params.l2_leaf_reg); }

    SplitChoice best_split(const std::vector<std::size_t>& idx, double g_sum, double h_sum) const {
        SplitChoice best;
        const double parent = score(g_sum, h_sum);
        std::vector<std::size_t> order(idx);
        for (const std::size_t f : features) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double xa = rows[a].features[f];
                const double xb = rows[b].features[f];
                return xa < xb || (xa == xb && a < b);
            });
            double gl = 0.0;
            double hl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                gl += grad[order[k]];
                hl += hess[order[k]];
                const double here = rows[order[k]].features[f];
                const double next = rows[order[k + 1]].features[f];
                if (!(here < next)) continue;
                const double gr = g_sum - gl;
                const double hr = h_sum - hl;
                if (hl < params.min_child_weight || hr < params.min_child_weight) continue;
                const double gain = 0.5 * (score(gl, hl) + score(gr, hr) - parent);
                if (gain > params.min_split_gain + kGainEpsilon && gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.threshold = here + (next - here) / 2.0;
                }
            }
        }
        return best;
    }

    int grow(const std::vector<std::size_t>& idx, std::size_t depth) {
        double g_sum = 0.0;
        double h_sum = 0.0;
        for (const std::size_t i : idx) {
            g_sum += grad[i];
            h_sum += hess[i];
        }
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes[id].weight = leaf_value(g_sum, h_sum);
        if (depth >= params.max_depth || idx.size() < 2) return id;

        const SplitChoice split = best_split(idx, g_sum, h_sum);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (const std::size_t i : idx) {
            (rows[i].features[static_cast<std::size_t>(split.feature)] < split.threshold ? left : right)
                .push_back(i);
        }
        tree.nodes[id].feature = split.feature;
        tree.nodes[id].threshold = split.threshold;
        tree.nodes[id].weight = 0.0;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        tree.nodes[id].left = l;
        tree.nodes[id].right = r;
        return id;
    }
};

nlohmann::json node_to_json(const RegressionTree& tree, int id) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf()) return {{"leaf", n.weight}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"left", node_to_json(tree, n.left)},
            {"right", node_to_json(tree, n.right)}};
}

int node_from_json(const nlohmann::json& j, RegressionTree& tree, std::size_t feature_count) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    if (j.contains("leaf")) {
        tree.nodes[static_cast<std::size_t>(id)].weight = j.at("leaf").get<double>();
        return id;
    }
    const int feature = j.at("feature").get<int>();
    if (feature < 0 || static_cast<std::size_t>(feature) >= feature_count) {
        throw ModelError("tree node references feature " + std::to_string(feature));
    }
    tree.nodes[static_cast<std::size_t>(id)].feature = feature;
    tree.nodes[static_cast<std::size_t>(id)].threshold = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), tree, feature_count);
    const int r = node_from_json(j.at("right"), tree, feature_count);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
}

}  // namespace

FeatureVector cell_features(const geo::GridCell& cell, bool use_counts) {
    FeatureVector x(kFeatureCount);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        x[k] = use_counts ? static_cast<double>(cell.poi_counts[k]) : (cell.poi_flags[k] ? 1.0 : 0.0);
    }
    return x;
}

CellDatasets build_datasets(const geo::CellGrid& grid, bool use_counts) {
    CellDatasets out;
    out.train.role = Dataset::Role::Train;
    out.predict.role = Dataset::Role::Predict;
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const auto& cell = grid.cells[i];
        Sample s;
        s.features = cell_features(cell, use_counts);
        s.target = static_cast<double>(cell.port_count);
        s.label = cell.classification;
        s.cell_index = i;
        switch (cell.classification) {
            case geo::CellClass::C1:
            case geo::CellClass::C4: out.train.rows.push_back(std::move(s)); break;
            case geo::CellClass::C3: out.predict.rows.push_back(std::move(s)); break;
            case geo::CellClass::C2: break;
        }
    }
    return out;
}

std::vector<FeatureVector> smote(std::span<const FeatureVector> minority, std::size_t k,
                                 std::size_t target_count, std::uint64_t seed) {
    const std::size_t n = minority.size();
    if (n < 2) throw ModelError("SMOTE needs at least two minority samples, got " + std::to_string(n));
    if (k < 1) throw ModelError("SMOTE neighbour count must be at least 1");
    if (target_count < n) {
        throw ModelError("SMOTE target count " + std::to_string(target_count) +
                         " is below the minority size " + std::to_string(n));
    }
    const std::size_t dims = minority[0].size();
    for (const auto& x : minority) {
        if (x.size() != dims) throw ModelError("SMOTE samples have inconsistent dimensions");
    }

    std::vector<FeatureVector> out(minority.begin(), minority.end());
    if (target_count == n) return out;

    const std::size_t kk = std::min(k, n - 1);
    std::vector<std::vector<std::size_t>> neighbours(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.emplace_back(squared_distance(minority[i], minority[j]), j);
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
        for (std::size_t m = 0; m < kk; ++m) neighbours[i].push_back(d[m].second);
    }

    Rng rng(seed);
    out.reserve(target_count);
    while (out.size() < target_count) {
        const std::size_t i = rng.below(n);
        const std::size_t j = neighbours[i][rng.below(kk)];
        const double u = rng.uniform_closed();
        FeatureVector s(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            s[d] = minority[i][d] + u * (minority[j][d] - minority[i][d]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

BalanceResult balance_classes(const std::vector<Sample>& train, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> c1;
    std::vector<std::size_t> c4;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].label == geo::CellClass::C1) c1.push_back(i);
        else if (train[i].label == geo::CellClass::C4) c4.push_back(i);
        else throw ModelError("training rows must be labelled C1 or C4");
    }

    BalanceResult result;
    result.rows = train;
    const bool c1_minor = c1.size() < c4.size();
    const auto& minor = c1_minor ? c1 : c4;
    result.minority_label = c1_minor ? geo::CellClass::C1 : geo::CellClass::C4;
    result.minority_before = minor.size();
    result.majority = std::max(c1.size(), c4.size());
    if (c1.size() == c4.size()) return result;

    std::vector<FeatureVector> points;
    points.reserve(minor.size());
    for (const std::size_t i : minor) {
        FeatureVector p = train[i].features;
        p.push_back(train[i].target);
        points.push_back(std::move(p));
    }
    const auto augmented = smote(points, k, result.majority, seed);
    for (std::size_t m = minor.size(); m < augmented.size(); ++m) {
        Sample s;
        s.features.assign(augmented[m].begin(), augmented[m].end() - 1);
        s.target = augmented[m].back();
        s.label = result.minority_label;
        s.cell_index = 0;
        s.synthetic = true;
        result.rows.push_back(std::move(s));
    }
    result.applied = true;
    return result;
}

Split stratified_split(const std::vector<Sample>& rows, double train_share, std::uint64_t seed) {
    if (!(train_share > 0.0 && train_share <= 1.0)) {
        throw ModelError("train share must be in (0, 1]");
    }
    Rng rng(seed);
    std::vector<bool> to_train(rows.size(), false);
    for (const auto label : {geo::CellClass::C1, geo::CellClass::C2, geo::CellClass::C3, geo::CellClass::C4}) {
        std::vector<std::size_t> group;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].label == label) group.push_back(i);
        }
        if (group.empty()) continue;
        rng.shuffle(group.begin(), group.end());
        const auto n_train = static_cast<std::size_t>(std::lround(train_share * static_cast<double>(group.size())));
        for (std::size_t m = 0; m < n_train && m < group.size(); ++m) to_train[group[m]] = true;
    }
    Split split;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        (to_train[i] ? split.train : split.test).push_back(rows[i]);
    }
    return split;
}

void GbtParams::validate() const {
    if (rounds == 0) throw ModelError("rounds must be positive");
    if (max_depth == 0) throw ModelError("max_depth must be positive");
    if (!(learning_rate > 0.0)) throw ModelError("learning_rate must be positive");
    if (!(row_subsample > 0.0 && row_subsample <= 1.0)) throw ModelError("row_subsample must be in (0, 1]");
    if (!(feature_subsample > 0.0 && feature_subsample <= 1.0)) {
        throw ModelError("feature_subsample must be in (0, 1]");
    }
    if (!(l2_leaf_reg >= 0.0)) throw ModelError("l2_leaf_reg must be nonnegative");
    if (!(min_split_gain >= 0.0)) throw ModelError("min_split_gain must be nonnegative");
    if (!(min_child_weight >= 0.0)) throw ModelError("min_child_weight must be nonnegative");
}

double RegressionTree::leaf_weight(std::span<const double> x) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
        const auto& n = nodes[id];
        id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return nodes[id].weight;
}

std::size_t RegressionTree::depth() const {
    std::size_t deepest = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [id, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes[id].is_leaf()) {
            stack.emplace_back(static_cast<std::size_t>(nodes[id].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes[id].right), d + 1);
        }
    }
    return deepest;
}

double GbtModel::raw_predict(std::span<const double> x, std::optional<std::size_t> tree_limit) const {
    check_arity(x, feature_count);
    const std::size_t count = std::min(tree_limit.value_or(trees.size()), trees.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < count; ++t) sum += trees[t].leaf_weight(x);
    return base_score + params.learning_rate * sum;
}

GbtModel fit(const std::vector<Sample>& train, const GbtParams& params, std::uint64_t seed) {
    params.validate();
    if (train.empty()) throw ModelError("cannot fit on an empty dataset");
    const std::size_t n_features = train.front().features.size();
    if (n_features == 0) throw ModelError("samples have no features");
    for (const auto& s : train) check_arity(s.features, n_features);

    GbtModel model;
    model.params = params;
    model.seed = seed;
    model.feature_count = n_features;

    const std::size_t n = train.size();
    double sum = 0.0;
    for (const auto& s : train) sum += s.target;
    model.base_score = sum / static_cast<double>(n);

    const auto [lo, hi] = std::minmax_element(train.begin(), train.end(),
                                              [](const Sample& a, const Sample& b) { return a.target < b.target; });
    if (lo->target == hi->target) {
        model.base_score = lo->target;
        return model;
    }

    Rng rng(seed);
    std::vector<double> pred(n, model.base_score);
    std::vector<double> grad(n);
    const std::vector<double> hess(n, 1.0);
    std::vector<std::size_t> all_features(n_features);
    std::iota(all_features.begin(), all_features.end(), std::size_t{0});
    const auto n_sampled_features = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(params.feature_subsample * static_cast<double>(n_features))));

    model.trees.reserve(params.rounds);
    for (std::size_t round = 0; round < params.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - train[i].target;

        std::vector<std::size_t> rows;
        if (params.row_subsample < 1.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.bernoulli(params.row_subsample)) rows.push_back(i);
            }
            if (rows.empty()) rows.push_back(rng.below(n));
        } else {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }

        std::vector<std::size_t> features = all_features;
        if (n_sampled_features < n_features) {
            rng.shuffle(features.begin(), features.end());
            features.resize(n_sampled_features);
            std::sort(features.begin(), features.end());
        }

        TreeBuilder builder{train, grad, hess, features, params, {}};
        builder.grow(rows, 0);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += params.learning_rate * builder.tree.leaf_weight(train[i].features);
        }
        model.trees.push_back(std::move(builder.tree));
    }
    return model;
}

double predict(const GbtModel& model, std::span<const double> features) {
    return std::max(0.0, model.raw_predict(features));
}

double mean_squared_error(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw ModelError("metric inputs differ in length");
    if (y_true.empty()) throw ModelError("metric inputs are empty");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double r = y_true[i] - y_pred[i];
        s += r * r;
    }
    return s / static_cast<double>(y_true.size());
}

double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw ModelError("metric inputs differ in length");
    if (y_true.empty()) throw ModelError("metric inputs are empty");
    double mean = 0.0;
    for (const double y : y_true) mean += y;
    mean /= static_cast<double>(y_true.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
        ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
    }
    if (ss_tot == 0.0) throw ModelError("R^2 is undefined for a constant target");
    return 1.0 - ss_res / ss_tot;
}

Metrics metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    return {mean_squared_error(y_true, y_pred), r2_score(y_true, y_pred)};
}

std::vector<DemandEstimate> estimate_demand(const GbtModel& model, const geo::CellGrid& grid,
                                            const Dataset& predict_set) {
    std::vector<DemandEstimate> out;
    out.reserve(predict_set.rows.size());
    for (const auto& s : predict_set.rows) {
        if (s.cell_index >= grid.cells.size()) throw ModelError("prediction row references an unknown cell");
        const auto& cell = grid.cells[s.cell_index];
        out.push_back({s.cell_index, cell.row, cell.col, cell.center, predict(model, s.features)});
    }
    return out;
}

nlohmann::json to_json(const GbtModel& model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : model.trees) trees.push_back(node_to_json(t, 0));
    const auto& p = model.params;
    return {{"format", "evplan.gbt_model"},
            {"format_version", kModelFormatVersion},
            {"base_score", model.base_score},
            {"seed", model.seed},
            {"feature_count", model.feature_count},
            {"params",
             {{"rounds", p.rounds},
              {"max_depth", p.max_depth},
              {"learning_rate", p.learning_rate},
              {"row_subsample", p.row_subsample},
              {"feature_subsample", p.feature_subsample},
              {"l2_leaf_reg", p.l2_leaf_reg},
              {"min_split_gain", p.min_split_gain},
              {"min_child_weight", p.min_child_weight}}},
            {"trees", trees}};
}

GbtModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "evplan.gbt_model") throw ModelError("not a GBT model document");
        if (j.at("format_version").get<int>() != kModelFormatVersion) {
            throw ModelError("unsupported model format version " + j.at("format_version").dump());
        }
        GbtModel m;
        m.base_score = j.at("base_score").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.feature_count = j.at("feature_count").get<std::size_t>();
        const auto& p = j.at("params");
        m.params.rounds = p.at("rounds").get<std::size_t>();
        m.params.max_depth = p.at("max_depth").get<std::size_t>();
        m.params.learning_rate = p.at("learning_rate").get<double>();
        m.params.row_subsample = p.at("row_subsample").get<double>();
        m.params.feature_subsample = p.at("feature_subsample").get<double>();
        m.params.l2_leaf_reg = p.at("l2_leaf_reg").get<double>();
        m.params.min_split_gain = p.at("min_split_gain").get<double>();
        m.params.min_child_weight = p.at("min_child_weight").get<double>();
        for (const auto& t : j.at("trees")) {
            RegressionTree tree;
            node_from_json(t, tree, m.feature_count);
            m.trees.push_back(std::move(tree));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model document: ") + e.what());
    }
}

nlohmann::json to_json(const std::vector<DemandEstimate>& estimates) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& e : estimates) {
        cells.push_back({{"cell_index", e.cell_index},
                         {"row", e.row},
                         {"col", e.col},
                         {"lat", e.center.lat},
                         {"lon", e.center.lon},
                         {"demand", e.demand}});
    }
    return {{"format", "evplan.demand"}, {"format_version", 1}, {"cells", cells}};
}

std::vector<DemandEstimate> demand_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "evplan.demand") throw ModelError("not a demand document");
        std::vector<DemandEstimate> out;
        for (const auto& c : j.at("cells")) {
            DemandEstimate e;
            e.cell_index = c.at("cell_index").get<std::size_t>();
            e.row = c.at("row").get<std::size_t>();
            e.col = c.at("col").get<std::size_t>();
            e.center = {c.at("lat").get<double>(), c.at("lon").get<double>()};
            e.demand = c.at("demand").get<double>();
            if (!(e.demand >= 0.0)) throw ModelError("demand must be nonnegative");
            out.push_back(e);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed demand document: ") + e.what());
    }
}

}  // namespace evplan::demand
