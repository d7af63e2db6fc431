#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evplan/geo.hpp"

namespace evplan::demand {

inline constexpr std::size_t kFeatureCount = geo::kPoiCategoryCount;

class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using FeatureVector = std::vector<double>;

struct Sample {
    FeatureVector features;
    double target = 0.0;
    geo::CellClass label = geo::CellClass::C4;
    std::size_t cell_index = 0;  // index into the originating CellGrid
    bool synthetic = false;
};

struct Dataset {
    enum class Role { Train, Predict };
    Role role = Role::Train;
    std::vector<Sample> rows;
};

/// Feature vector of a cell: binary POI presence, or raw counts when asked.
FeatureVector cell_features(const geo::GridCell& cell, bool use_counts = false);

/// Training rows from C1 and C4 cells, prediction rows from C3 cells.
/// C2 cells are dropped.
struct CellDatasets {
    Dataset train;
    Dataset predict;
};
CellDatasets build_datasets(const geo::CellGrid& grid, bool use_counts = false);

// ---------------------------------------------------------------------------
// SMOTE

/// Oversamples `minority` to exactly `target_count` points.
///
/// The originals come first, in input order. Each synthetic point is
/// x + u * (nn - x) for a uniformly drawn minority sample x, one of its k
/// nearest minority neighbours nn (Euclidean, ties by index) and u ~ U[0,1].
std::vector<FeatureVector> smote(std::span<const FeatureVector> minority, std::size_t k,
                                 std::size_t target_count, std::uint64_t seed);

struct BalanceResult {
    std::vector<Sample> rows;
    std::size_t minority_before = 0;
    std::size_t majority = 0;
    geo::CellClass minority_label = geo::CellClass::C1;
    bool applied = false;
};

/// Raises the smaller of the C1/C4 classes to the size of the larger one.
/// Targets are interpolated alongside features (appended as the last
/// coordinate for neighbour search). Throws ModelError when the minority class
/// has fewer than two rows.
BalanceResult balance_classes(const std::vector<Sample>& train, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Train/test split

struct Split {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Seeded, stratified by label. Each class contributes round(share * n) rows to
/// the training side.
Split stratified_split(const std::vector<Sample>& rows, double train_share, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees

struct GbtParams {
    std::size_t rounds = 500;
    std::size_t max_depth = 8;
    double learning_rate = 0.01;
    double row_subsample = 0.7;
    double feature_subsample = 0.8;
    double l2_leaf_reg = 1.0;       // lambda
    double min_split_gain = 0.0;    // gamma
    double min_child_weight = 1.0;  // minimum hessian sum per child

    void validate() const;
    bool operator==(const GbtParams&) const = default;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left when x[feature] < threshold
    int left = -1;
    int right = -1;
    double weight = 0.0;  // leaf weight before shrinkage

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double leaf_weight(std::span<const double> x) const;
    std::size_t depth() const;
    bool operator==(const RegressionTree&) const = default;
};

struct GbtModel {
    std::vector<RegressionTree> trees;
    double base_score = 0.0;
    GbtParams params;
    std::uint64_t seed = 0;
    std::size_t feature_count = kFeatureCount;

    /// base_score + learning_rate * sum of leaf weights over the first
    /// `tree_limit` trees (all trees by default). Not clamped.
    double raw_predict(std::span<const double> x,
                       std::optional<std::size_t> tree_limit = std::nullopt) const;

    bool operator==(const GbtModel&) const = default;
};

/// Squared-error boosting with second-order split gain.
GbtModel fit(const std::vector<Sample>& train, const GbtParams& params, std::uint64_t seed);

/// max(0, raw prediction). Throws ModelError on feature arity mismatch.
double predict(const GbtModel& model, std::span<const double> features);

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
    double mse = 0.0;
    double r2 = 0.0;
};

double mean_squared_error(std::span<const double> y_true, std::span<const double> y_pred);
/// Throws ModelError when y_true is constant.
double r2_score(std::span<const double> y_true, std::span<const double> y_pred);
Metrics metrics(std::span<const double> y_true, std::span<const double> y_pred);

// ---------------------------------------------------------------------------
// Demand estimates and serialization

struct DemandEstimate {
    std::size_t cell_index = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    geo::GeoPoint center;
    double demand = 0.0;  // predicted ports, >= 0
};

std::vector<DemandEstimate> estimate_demand(const GbtModel& model, const geo::CellGrid& grid,
                                            const Dataset& predict_set);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const GbtModel& model);
GbtModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::vector<DemandEstimate>& estimates);
std::vector<DemandEstimate> demand_from_json(const nlohmann::json& j);

}  // namespace evplan::demand
