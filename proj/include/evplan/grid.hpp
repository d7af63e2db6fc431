#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evplan/coverage.hpp"
#include "evplan/geo.hpp"

namespace evplan::grid {

inline constexpr double kDefaultAmpacityA = 600.0;
inline constexpr double kDefaultScreeningThreshold = 0.90;

struct Bus {
    std::string id;
    double x = 0.0;  // local coordinates, arbitrary planar units
    double y = 0.0;
    double base_kv = 0.0;  // line-to-line
    bool is_slack = false;
    geo::GeoPoint location;

    bool operator==(const Bus&) const = default;
};

struct Line {
    std::string id;
    std::string from;
    std::string to;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double ampacity_a = kDefaultAmpacityA;

    bool operator==(const Line&) const = default;
};

struct Load {
    std::string bus;
    double p_kw = 0.0;
    double q_kvar = 0.0;

    bool operator==(const Load&) const = default;
};

struct Feeder {
    std::string name;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Load> loads;

    std::optional<std::size_t> find_bus(std::string_view id) const noexcept;
    std::size_t slack_index() const;
    /// Sum of all loads attached to a bus.
    double bus_load_kw(std::string_view id) const noexcept;
    double bus_load_kvar(std::string_view id) const noexcept;

    bool operator==(const Feeder&) const = default;
};

class FeederError : public std::runtime_error {
  public:
    enum class Kind {
        Syntax,
        InvalidValue,
        UnknownBus,
        DuplicateBus,
        DuplicateLine,
        Cycle,
        MissingSlack,
        MultipleSlack,
        Disconnected,
    };

    FeederError(Kind kind, std::size_t line, std::size_t column, const std::string& message);

    Kind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }      // 1-based; 0 when not from text
    std::size_t column() const noexcept { return column_; }  // 1-based; 0 when not from text
    const std::string& detail() const noexcept { return detail_; }

  private:
    Kind kind_;
    std::size_t line_;
    std::size_t column_;
    std::string detail_;
};

const char* to_string(FeederError::Kind k) noexcept;

/// Statements, one per line, '#' starts a comment:
///   feeder <name>
///   bus <id> x=<f> y=<f> kv=<f> [slack]
///   line <id> from=<bus> to=<bus> r=<ohm> x=<ohm> [amps=<f>]
///   load <bus> kw=<f> kvar=<f>
/// Keywords and keys are case-insensitive; ids are case-sensitive.
Feeder parse_feeder(std::string_view text);

/// Inverse of parse_feeder; numbers use the shortest round-trip form.
std::string emit_feeder(const Feeder& feeder);

/// Structural checks for feeders built in code: ids, values, one slack,
/// spanning tree. Errors carry no text location.
void validate_feeder(const Feeder& feeder);

class GridError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Affine map from the local extent of a feeder onto a bounding box:
/// min x -> west, max x -> east, min y -> south, max y -> north.
struct AffineMap {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;
    geo::BoundingBox bbox;

    geo::GeoPoint to_geo(double x, double y) const noexcept;
    void to_local(const geo::GeoPoint& p, double& x, double& y) const noexcept;
};

/// Throws GridError when all x or all y coordinates coincide.
AffineMap fit_affine(const Feeder& feeder, const geo::BoundingBox& anchor);
Feeder georegister(const Feeder& feeder, const geo::BoundingBox& anchor);

struct NearestBus {
    std::size_t bus = 0;  // index into feeder.buses
    double distance_km = 0.0;
};

/// Haversine-nearest bus among `candidates` (bus indices); ties go to the
/// lexicographically smallest id. Throws GridError on an empty pool.
NearestBus nearest_bus(const geo::GeoPoint& station, const Feeder& feeder, const std::vector<std::size_t>& candidates);

struct GridMatrices {
    std::vector<std::size_t> pool;           // candidate bus indices, feeder order
    coverage::Matrix bus_distance;           // pool x stations, km
    coverage::Matrix voltage_priority;       // pool x stations
    std::vector<NearestBus> assignment;      // per station, nearest pool bus
};

/// Screens buses by minimum voltage (strictly above `threshold`), then builds
/// the distance and voltage-priority coefficients. The voltage term of a
/// station is 1 - vmin of its assigned pool bus; other rows of its column are
/// zero.
GridMatrices grid_matrices(const Feeder& feeder, const std::vector<geo::GeoPoint>& stations,
                           const std::vector<double>& vmin_pu, double threshold = kDefaultScreeningThreshold);

struct SyntheticFeederParams {
    std::size_t n_buses = 12;
    std::size_t branching = 2;  // max children per bus
    double kv = 12.47;
    double span_km = 0.8;       // nominal line length
    double r_ohm_per_km = 0.3;
    double x_ohm_per_km = 0.4;
    double load_kw_min = 20.0;
    double load_kw_max = 80.0;
    double power_factor = 0.95;
    double ampacity_a = kDefaultAmpacityA;
    std::uint64_t seed = 1;

    bool operator==(const SyntheticFeederParams&) const = default;
};

/// Random radial feeder rooted at a slack bus "b0"; local coordinates are in km.
Feeder synthetic_feeder(const SyntheticFeederParams& params);

}  // namespace evplan::grid
