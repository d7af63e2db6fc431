#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evplan/geo.hpp"

namespace evplan::ingest {

class IngestError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

/// `lat,lon,category`, optional header row. Unknown categories are errors.
std::vector<geo::Poi> read_pois(std::string_view csv, const std::string& source = "poi csv");

struct ChargerRows {
    std::vector<geo::ChargerSite> sites;
    std::size_t rejected = 0;  // zero or unknown port counts
};

/// Either `plus_code,ports` or `lat,lon,ports` per row, optional header.
/// Short plus codes are recovered against `reference`. Rows whose port count
/// is zero, empty or not a number are skipped and counted.
ChargerRows read_chargers(std::string_view csv, const geo::GeoPoint& reference,
                          const std::string& source = "charger csv");

}  // namespace evplan::ingest
