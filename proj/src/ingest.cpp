#include "evplan/ingest.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "evplan/plus_code.hpp"
#include "evplan/text.hpp"

namespace evplan::ingest {

namespace {

struct Record {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

std::vector<Record> records(std::string_view csv) {
    std::vector<Record> out;
    std::size_t line_no = 0;
    while (!csv.empty()) {
        ++line_no;
        const auto nl = csv.find('\n');
        const std::string_view line = csv.substr(0, nl);
        csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
        if (text::trim(line).empty()) continue;
        auto fields = text::split_csv_line(line);
        for (auto& f : fields) f = std::string(text::trim(f));
        out.push_back({line_no, std::move(fields)});
    }
    return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
    throw IngestError(source + ":" + std::to_string(line) + ": " + msg);
}

bool looks_like_header(const Record& r) {
    return !r.fields.empty() && !text::parse_double(r.fields[0]) && !olc::is_valid(r.fields[0]);
}

double coordinate(const std::string& source, const Record& r, std::size_t i, const char* what) {
    const auto v = text::parse_double(r.fields[i]);
    if (!v) fail(source, r.line, std::string("bad ") + what + " '" + r.fields[i] + "'");
    return *v;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<geo::Poi> read_pois(std::string_view csv, const std::string& source) {
    auto rows = records(csv);
    std::vector<geo::Poi> out;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Record& r = rows[k];
        if (k == 0 && looks_like_header(r)) continue;
        if (r.fields.size() != 3) fail(source, r.line, "expected lat,lon,category");
        const double lat = coordinate(source, r, 0, "latitude");
        const double lon = coordinate(source, r, 1, "longitude");
        const auto cat = geo::parse_poi_category(r.fields[2]);
        if (!cat) fail(source, r.line, "unknown POI category '" + r.fields[2] + "'");
        try {
            out.push_back({geo::checked_point(lat, lon), *cat});
        } catch (const std::invalid_argument& e) {
            fail(source, r.line, e.what());
        }
    }
    return out;
}

ChargerRows read_chargers(std::string_view csv, const geo::GeoPoint& reference, const std::string& source) {
    auto rows = records(csv);
    ChargerRows out;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Record& r = rows[k];
        if (k == 0 && looks_like_header(r)) continue;
        if (r.fields.size() != 2 && r.fields.size() != 3) fail(source, r.line, "expected plus_code,ports or lat,lon,ports");

        const auto ports = text::parse_double(r.fields.back());
        if (!ports || *ports == 0.0) {
            ++out.rejected;
            continue;
        }
        if (*ports < 0.0 || *ports != std::floor(*ports)) {
            fail(source, r.line, "port count must be a positive integer, got '" + r.fields.back() + "'");
        }

        geo::GeoPoint location;
        try {
            if (r.fields.size() == 2) {
                location = olc::decode_plus_code(r.fields[0], reference);
            } else {
                location = geo::checked_point(coordinate(source, r, 0, "latitude"), coordinate(source, r, 1, "longitude"));
            }
        } catch (const std::invalid_argument& e) {
            fail(source, r.line, e.what());
        }
        out.sites.push_back({location, static_cast<int>(*ports)});
    }
    return out;
}

}  // namespace evplan::ingest
