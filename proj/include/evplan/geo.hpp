#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evplan::geo {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct GeoPoint {
    double lat = 0.0;  // degrees
    double lon = 0.0;  // degrees

    bool operator==(const GeoPoint&) const = default;
};

bool is_valid(const GeoPoint& p) noexcept;

/// Throws std::invalid_argument if the point is outside [-90,90] x [-180,180].
GeoPoint checked_point(double lat, double lon);

struct BoundingBox {
    double north = 0.0;
    double south = 0.0;
    double east = 0.0;
    double west = 0.0;

    bool contains(const GeoPoint& p) const noexcept {
        return p.lat >= south && p.lat <= north && p.lon >= west && p.lon <= east;
    }
    GeoPoint center() const noexcept { return {(north + south) / 2.0, (east + west) / 2.0}; }

    bool operator==(const BoundingBox&) const = default;
};

/// Rejects boxes with zero or negative extent and out-of-range corners.
void validate(const BoundingBox& bbox);

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(const GeoPoint& a, const GeoPoint& b) noexcept;

/// North-south extent of the box, measured along its middle meridian.
double height_km(const BoundingBox& bbox) noexcept;
/// East-west extent of the box, measured along its middle parallel.
double width_km(const BoundingBox& bbox) noexcept;

inline constexpr std::size_t kPoiCategoryCount = 6;

enum class PoiCategory {
    GasStation = 0,
    GroceryStore,
    CafeRestaurant,
    ShoppingMall,
    Theater,
    School,
};

std::string_view to_string(PoiCategory c) noexcept;
/// Accepts the canonical snake_case names plus common spellings
/// ("Gas Station", "cafe & restaurant", "mall", ...). Case-insensitive.
std::optional<PoiCategory> parse_poi_category(std::string_view name);

enum class CellClass { C1, C2, C3, C4 };

std::string_view to_string(CellClass c) noexcept;
std::optional<CellClass> parse_cell_class(std::string_view name);

/// Charger present x POI present.
constexpr CellClass classify(bool has_charger, bool has_poi) noexcept {
    if (has_charger) return has_poi ? CellClass::C1 : CellClass::C2;
    return has_poi ? CellClass::C3 : CellClass::C4;
}

struct GridCell {
    std::size_t row = 0;
    std::size_t col = 0;
    GeoPoint center;
    BoundingBox bounds;
    std::array<bool, kPoiCategoryCount> poi_flags{};
    std::array<int, kPoiCategoryCount> poi_counts{};
    int port_count = 0;
    CellClass classification = CellClass::C4;

    bool has_poi() const noexcept;
};

/// Row-major grid anchored at the south-west corner of the box.
///
/// Rows and columns have the nominal cell size; the last row and column are
/// clipped to the box so the cells tile it exactly.
struct CellGrid {
    BoundingBox bbox;
    double cell_km = 0.0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double lat_step = 0.0;  // degrees per full row
    double lon_step = 0.0;  // degrees per full column
    std::vector<GridCell> cells;

    std::size_t index(std::size_t row, std::size_t col) const noexcept { return row * cols + col; }

    /// Cell owning the point; points on a shared edge go to the lower index.
    /// std::nullopt for points outside the box.
    std::optional<std::size_t> locate(const GeoPoint& p) const noexcept;
};

CellGrid partition(const BoundingBox& bbox, double cell_km);

struct Poi {
    GeoPoint location;
    PoiCategory category = PoiCategory::GasStation;
};

struct ChargerSite {
    GeoPoint location;
    int ports = 0;
};

struct AssignmentStats {
    std::size_t pois_dropped = 0;
    std::size_t chargers_dropped = 0;
};

/// Bins POIs and chargers into the grid cells and sets each cell's class.
/// Points outside the box are skipped and counted.
AssignmentStats assign_points(CellGrid& grid, const std::vector<Poi>& pois,
                              const std::vector<ChargerSite>& chargers);

struct ClassCounts {
    std::size_t c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    std::size_t total() const noexcept { return c1 + c2 + c3 + c4; }
};

ClassCounts count_classes(const CellGrid& grid) noexcept;

}  // namespace evplan::geo
