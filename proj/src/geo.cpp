#include "evplan/geo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace evplan::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Ratios this close to an integer are treated as that integer before taking
// the ceiling, so a box that is exactly N cells wide does not grow a sliver.
constexpr double kCountSlack = 1e-9;

std::size_t cell_count(double extent_km, double cell_km) {
    const double ratio = extent_km / cell_km;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio - kCountSlack)));
}

std::string normalize_name(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char ch : name) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// Index of the strip containing `v` among strips [lo + k*step, lo + (k+1)*step],
// shared edges resolved toward the lower strip.
std::size_t strip_index(double v, double lo, double step, std::size_t count) {
    const double t = (v - lo) / step;
    long long k = static_cast<long long>(std::ceil(t)) - 1;
    k = std::clamp<long long>(k, 0, static_cast<long long>(count) - 1);
    auto idx = static_cast<std::size_t>(k);
    while (idx > 0 && v <= lo + static_cast<double>(idx) * step) --idx;
    while (idx + 1 < count && v > lo + static_cast<double>(idx + 1) * step) ++idx;
    return idx;
}

}  // namespace

bool is_valid(const GeoPoint& p) noexcept {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
           p.lon >= -180.0 && p.lon <= 180.0;
}

GeoPoint checked_point(double lat, double lon) {
    GeoPoint p{lat, lon};
    if (!is_valid(p)) {
        throw std::invalid_argument("coordinate out of range: (" + std::to_string(lat) + ", " +
                                    std::to_string(lon) + ")");
    }
    return p;
}

void validate(const BoundingBox& bbox) {
    if (!is_valid({bbox.north, bbox.east}) || !is_valid({bbox.south, bbox.west})) {
        throw std::invalid_argument("bounding box corner out of range");
    }
    if (!(bbox.north > bbox.south)) {
        throw std::invalid_argument("bounding box has no latitude extent (north <= south)");
    }
    if (!(bbox.east > bbox.west)) {
        throw std::invalid_argument("bounding box has no longitude extent (east <= west)");
    }
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) noexcept {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double height_km(const BoundingBox& bbox) noexcept {
    const double mid_lon = (bbox.east + bbox.west) / 2.0;
    return haversine_km({bbox.south, mid_lon}, {bbox.north, mid_lon});
}

double width_km(const BoundingBox& bbox) noexcept {
    const double mid_lat = (bbox.north + bbox.south) / 2.0;
    return haversine_km({mid_lat, bbox.west}, {mid_lat, bbox.east});
}

std::string_view to_string(PoiCategory c) noexcept {
    switch (c) {
        case PoiCategory::GasStation: return "gas_station";
        case PoiCategory::GroceryStore: return "grocery_store";
        case PoiCategory::CafeRestaurant: return "cafe_restaurant";
        case PoiCategory::ShoppingMall: return "shopping_mall";
        case PoiCategory::Theater: return "theater";
        case PoiCategory::School: return "school";
    }
    return "unknown";
}

std::optional<PoiCategory> parse_poi_category(std::string_view name) {
    const std::string key = normalize_name(name);
    if (key == "gasstation" || key == "gas") return PoiCategory::GasStation;
    if (key == "grocerystore" || key == "grocery") return PoiCategory::GroceryStore;
    if (key == "caferestaurant" || key == "cafe" || key == "restaurant")
        return PoiCategory::CafeRestaurant;
    if (key == "shoppingmall" || key == "mall") return PoiCategory::ShoppingMall;
    if (key == "theater" || key == "theatre") return PoiCategory::Theater;
    if (key == "school") return PoiCategory::School;
    return std::nullopt;
}

std::string_view to_string(CellClass c) noexcept {
    switch (c) {
        case CellClass::C1: return "C1";
        case CellClass::C2: return "C2";
        case CellClass::C3: return "C3";
        case CellClass::C4: return "C4";
    }
    return "C?";
}

std::optional<CellClass> parse_cell_class(std::string_view name) {
    if (name == "C1") return CellClass::C1;
    if (name == "C2") return CellClass::C2;
    if (name == "C3") return CellClass::C3;
    if (name == "C4") return CellClass::C4;
    return std::nullopt;
}

bool GridCell::has_poi() const noexcept {
    return std::any_of(poi_flags.begin(), poi_flags.end(), [](bool f) { return f; });
}

std::optional<std::size_t> CellGrid::locate(const GeoPoint& p) const noexcept {
    if (!bbox.contains(p)) return std::nullopt;
    const std::size_t r = strip_index(p.lat, bbox.south, lat_step, rows);
    const std::size_t c = strip_index(p.lon, bbox.west, lon_step, cols);
    return index(r, c);
}

CellGrid partition(const BoundingBox& bbox, double cell_km) {
    if (!(cell_km > 0.0) || !std::isfinite(cell_km)) {
        throw std::invalid_argument("cell size must be positive");
    }
    validate(bbox);

    CellGrid grid;
    grid.bbox = bbox;
    grid.cell_km = cell_km;

    const double h = height_km(bbox);
    const double w = width_km(bbox);
    if (!(h > 0.0) || !(w > 0.0)) throw std::invalid_argument("bounding box has zero area");

    grid.rows = cell_count(h, cell_km);
    grid.cols = cell_count(w, cell_km);
    grid.lat_step = (bbox.north - bbox.south) * (cell_km / h);
    grid.lon_step = (bbox.east - bbox.west) * (cell_km / w);

    grid.cells.reserve(grid.rows * grid.cols);
    for (std::size_t r = 0; r < grid.rows; ++r) {
        const double south = bbox.south + static_cast<double>(r) * grid.lat_step;
        const double north = (r + 1 == grid.rows)
                                 ? bbox.north
                                 : bbox.south + static_cast<double>(r + 1) * grid.lat_step;
        for (std::size_t c = 0; c < grid.cols; ++c) {
            const double west = bbox.west + static_cast<double>(c) * grid.lon_step;
            const double east = (c + 1 == grid.cols)
                                    ? bbox.east
                                    : bbox.west + static_cast<double>(c + 1) * grid.lon_step;
            GridCell cell;
            cell.row = r;
            cell.col = c;
            cell.bounds = {north, south, east, west};
            cell.center = {(north + south) / 2.0, (east + west) / 2.0};
            grid.cells.push_back(cell);
        }
    }
    return grid;
}

AssignmentStats assign_points(CellGrid& grid, const std::vector<Poi>& pois,
                              const std::vector<ChargerSite>& chargers) {
    AssignmentStats stats;
    for (auto& cell : grid.cells) {
        cell.poi_flags.fill(false);
        cell.poi_counts.fill(0);
        cell.port_count = 0;
    }
    for (const auto& poi : pois) {
        const auto idx = grid.locate(poi.location);
        if (!idx) {
            ++stats.pois_dropped;
            continue;
        }
        const auto k = static_cast<std::size_t>(poi.category);
        grid.cells[*idx].poi_flags[k] = true;
        ++grid.cells[*idx].poi_counts[k];
    }
    for (const auto& charger : chargers) {
        const auto idx = grid.locate(charger.location);
        if (!idx) {
            ++stats.chargers_dropped;
            continue;
        }
        grid.cells[*idx].port_count += charger.ports;
    }
    for (auto& cell : grid.cells) {
        cell.classification = classify(cell.port_count > 0, cell.has_poi());
    }
    return stats;
}

ClassCounts count_classes(const CellGrid& grid) noexcept {
    ClassCounts counts;
    for (const auto& cell : grid.cells) {
        switch (cell.classification) {
            case CellClass::C1: ++counts.c1; break;
            case CellClass::C2: ++counts.c2; break;
            case CellClass::C3: ++counts.c3; break;
            case CellClass::C4: ++counts.c4; break;
        }
    }
    return counts;
}

}  // namespace evplan::geo
