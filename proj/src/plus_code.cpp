#include "evplan/plus_code.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>

namespace evplan::olc {

namespace {

constexpr int kEncodingBase = 20;
constexpr int kGridColumns = 4;
constexpr int kGridRows = 5;
constexpr std::int64_t kPairPrecision = 8000;            // 1/8000 degree per unit after 5 pairs
constexpr std::int64_t kPairFirstPlaceValue = 160000;    // 20^4
constexpr std::int64_t kGridLatFirstPlaceValue = 625;    // 5^4
constexpr std::int64_t kGridLngFirstPlaceValue = 256;    // 4^4
constexpr std::int64_t kFinalLatPrecision = 25000000;    // 8000 * 5^5
constexpr std::int64_t kFinalLngPrecision = 8192000;     // 8000 * 4^5
constexpr std::int64_t kGridLatScale = kFinalLatPrecision / kPairPrecision;  // 3125
constexpr std::int64_t kGridLngScale = kFinalLngPrecision / kPairPrecision;  // 1024

int digit_value(char ch) noexcept {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const auto pos = kAlphabet.find(up);
    return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

double clip_latitude(double lat) { return std::clamp(lat, -90.0, 90.0); }

double normalize_longitude(double lon) {
    while (lon < -180.0) lon += 360.0;
    while (lon >= 180.0) lon -= 360.0;
    return lon;
}

double latitude_precision(std::size_t code_length) {
    if (code_length <= kPairCodeLength) {
        return std::pow(static_cast<double>(kEncodingBase),
                        std::floor(static_cast<double>(code_length) / -2.0 + 2.0));
    }
    return std::pow(static_cast<double>(kEncodingBase), -3.0) /
           std::pow(static_cast<double>(kGridRows), static_cast<double>(code_length - kPairCodeLength));
}

// Throws the most specific error for a structurally invalid code.
void check_structure(std::string_view code) {
    const auto sep = code.find(kSeparator);
    for (std::size_t i = 0; i < code.size(); ++i) {
        const char ch = code[i];
        if (ch != kSeparator && ch != kPadding && digit_value(ch) < 0) {
            throw PlusCodeError(PlusCodeError::Kind::InvalidCharacter,
                                "plus code '" + std::string(code) + "' has invalid character '" +
                                    std::string(1, ch) + "' at position " + std::to_string(i + 1));
        }
    }
    if (sep == std::string_view::npos) {
        throw PlusCodeError(PlusCodeError::Kind::MissingSeparator,
                            "plus code '" + std::string(code) + "' has no '+' separator");
    }
    if (!is_valid(code)) {
        throw PlusCodeError(PlusCodeError::Kind::Malformed,
                            "plus code '" + std::string(code) + "' is malformed");
    }
}


// Correctly rounded to 14 decimal places, half-even on the exact binary value.
double round_14(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 14);
    double out = x;
    std::from_chars(buf, res.ptr, out);
    return out;
}

}  // namespace

geo::GeoPoint CodeArea::center() const noexcept {
    return {std::min(south + (north - south) / 2.0, 90.0), std::min(west + (east - west) / 2.0, 180.0)};
}

bool is_valid(std::string_view code) noexcept {
    if (code.empty()) return false;
    const auto sep = code.find(kSeparator);
    if (sep == std::string_view::npos) return false;
    if (code.find(kSeparator, sep + 1) != std::string_view::npos) return false;
    if (sep > kSeparatorPosition || sep % 2 == 1) return false;
    if (code.size() - sep - 1 == 1) return false;

    const auto pad = code.find(kPadding);
    if (pad != std::string_view::npos) {
        if (pad == 0) return false;
        // Padding is one even-length block that runs up to the separator.
        std::size_t end = pad;
        while (end < code.size() && code[end] == kPadding) ++end;
        if (end != sep) return false;
        if ((end - pad) % 2 == 1) return false;
        if (code.size() > sep + 1) return false;
    }
    for (char ch : code) {
        if (ch == kSeparator || ch == kPadding) continue;
        if (digit_value(ch) < 0) return false;
    }
    return true;
}

bool is_short(std::string_view code) noexcept {
    if (!is_valid(code)) return false;
    const auto sep = code.find(kSeparator);
    return sep < kSeparatorPosition;
}

bool is_full(std::string_view code) noexcept {
    if (!is_valid(code) || is_short(code)) return false;
    const int first_lat = digit_value(code[0]) * kEncodingBase;
    if (first_lat >= 180) return false;
    if (code.size() > 1) {
        const int first_lng = digit_value(code[1]) * kEncodingBase;
        if (first_lng >= 360) return false;
    }
    return true;
}

std::string encode(double lat, double lon, std::size_t code_length) {
    if (code_length < 2 || (code_length < kPairCodeLength && code_length % 2 == 1)) {
        throw std::invalid_argument("invalid plus code length " + std::to_string(code_length));
    }
    code_length = std::min(code_length, kMaxDigits);
    lat = clip_latitude(lat);
    lon = normalize_longitude(lon);
    if (lat == 90.0) lat -= latitude_precision(code_length);

    // Snap to a micro-unit before truncating so values like 0.3 * 2.5e7 land
    // on the intended integer.
    auto to_units = [](double degrees_shifted, double scale) {
        const double v = std::round(degrees_shifted * scale * 1e6) / 1e6;
        return static_cast<std::int64_t>(std::floor(v));
    };
    std::int64_t lat_val = to_units(lat + 90.0, static_cast<double>(kFinalLatPrecision));
    std::int64_t lng_val = to_units(lon + 180.0, static_cast<double>(kFinalLngPrecision));
    lat_val = std::clamp<std::int64_t>(lat_val, 0, 180 * kFinalLatPrecision - 1);
    lng_val = ((lng_val % (360 * kFinalLngPrecision)) + 360 * kFinalLngPrecision) % (360 * kFinalLngPrecision);

    std::string digits(kMaxDigits, ' ');
    std::size_t pos = kMaxDigits;
    if (code_length > kPairCodeLength) {
        for (std::size_t i = 0; i < kMaxDigits - kPairCodeLength; ++i) {
            const auto lat_digit = lat_val % kGridRows;
            const auto lng_digit = lng_val % kGridColumns;
            digits[--pos] = kAlphabet[static_cast<std::size_t>(lat_digit * kGridColumns + lng_digit)];
            lat_val /= kGridRows;
            lng_val /= kGridColumns;
        }
    } else {
        lat_val /= kGridLatScale;
        lng_val /= kGridLngScale;
        pos = kPairCodeLength;
    }
    for (std::size_t i = 0; i < kPairCodeLength / 2; ++i) {
        digits[--pos] = kAlphabet[static_cast<std::size_t>(lng_val % kEncodingBase)];
        digits[--pos] = kAlphabet[static_cast<std::size_t>(lat_val % kEncodingBase)];
        lat_val /= kEncodingBase;
        lng_val /= kEncodingBase;
    }

    std::string code;
    if (code_length >= kSeparatorPosition) {
        code = digits.substr(0, kSeparatorPosition) + kSeparator +
               digits.substr(kSeparatorPosition, code_length - kSeparatorPosition);
    } else {
        code = digits.substr(0, code_length) + std::string(kSeparatorPosition - code_length, kPadding) +
               kSeparator;
    }
    return code;
}

CodeArea decode(std::string_view code) {
    check_structure(code);
    if (is_short(code)) {
        throw PlusCodeError(PlusCodeError::Kind::ShortCodeWithoutReference,
                            "plus code '" + std::string(code) +
                                "' is a short code and needs a reference location");
    }
    if (!is_full(code)) {
        throw PlusCodeError(PlusCodeError::Kind::Malformed,
                            "plus code '" + std::string(code) + "' is outside the valid range");
    }

    std::string digits;
    for (char ch : code) {
        if (ch == kSeparator || ch == kPadding) continue;
        digits.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    }
    if (digits.size() > kMaxDigits) digits.resize(kMaxDigits);

    std::int64_t pair_lat = 0;
    std::int64_t pair_lng = 0;
    std::int64_t pv = kPairFirstPlaceValue;
    const std::size_t pair_digits = std::min(digits.size(), kPairCodeLength);
    for (std::size_t i = 0; i < pair_digits; i += 2) {
        pair_lat += digit_value(digits[i]) * pv;
        pair_lng += digit_value(digits[i + 1]) * pv;
        if (i + 2 < pair_digits) pv /= kEncodingBase;
    }

    // Digit sums stay integral; the conversion to degrees and the rounding to
    // 14 decimals follow the reference decoder so results agree bit for bit.
    std::int64_t grid_lat = 0;
    std::int64_t grid_lng = 0;
    double lat_precision = static_cast<double>(pv) / static_cast<double>(kPairPrecision);
    double lng_precision = lat_precision;
    if (digits.size() > kPairCodeLength) {
        std::int64_t row_pv = kGridLatFirstPlaceValue;
        std::int64_t col_pv = kGridLngFirstPlaceValue;
        for (std::size_t i = kPairCodeLength; i < digits.size(); ++i) {
            const int v = digit_value(digits[i]);
            grid_lat += (v / kGridColumns) * row_pv;
            grid_lng += (v % kGridColumns) * col_pv;
            if (i + 1 < digits.size()) {
                row_pv /= kGridRows;
                col_pv /= kGridColumns;
            }
        }
        lat_precision = static_cast<double>(row_pv) / static_cast<double>(kFinalLatPrecision);
        lng_precision = static_cast<double>(col_pv) / static_cast<double>(kFinalLngPrecision);
    }

    const double lat = static_cast<double>(pair_lat - 90 * kPairPrecision) / static_cast<double>(kPairPrecision) +
                       static_cast<double>(grid_lat) / static_cast<double>(kFinalLatPrecision);
    const double lng = static_cast<double>(pair_lng - 180 * kPairPrecision) / static_cast<double>(kPairPrecision) +
                       static_cast<double>(grid_lng) / static_cast<double>(kFinalLngPrecision);
    CodeArea area;
    area.south = round_14(lat);
    area.west = round_14(lng);
    area.north = round_14(lat + lat_precision);
    area.east = round_14(lng + lng_precision);
    area.code_length = digits.size();
    return area;
}

std::string recover_nearest(std::string_view short_code, const geo::GeoPoint& reference) {
    if (!is_short(short_code)) {
        if (is_full(short_code)) return to_upper(short_code);
        check_structure(short_code);
        throw PlusCodeError(PlusCodeError::Kind::Malformed,
                            "plus code '" + std::string(short_code) + "' cannot be recovered");
    }
    const double ref_lat = clip_latitude(reference.lat);
    const double ref_lon = normalize_longitude(reference.lon);
    const std::string code = to_upper(short_code);

    const std::size_t padding_length = kSeparatorPosition - code.find(kSeparator);
    const double resolution = std::pow(20.0, 2.0 - static_cast<double>(padding_length) / 2.0);
    const double half = resolution / 2.0;

    const std::string prefix = encode(ref_lat, ref_lon).substr(0, padding_length);
    const CodeArea area = decode(prefix + code);
    geo::GeoPoint c = area.center();

    if (ref_lat + half < c.lat && c.lat - resolution >= -90.0) {
        c.lat -= resolution;
    } else if (ref_lat - half > c.lat && c.lat + resolution <= 90.0) {
        c.lat += resolution;
    }
    if (ref_lon + half < c.lon) {
        c.lon -= resolution;
    } else if (ref_lon - half > c.lon) {
        c.lon += resolution;
    }
    return encode(c.lat, c.lon, area.code_length);
}

geo::GeoPoint decode_plus_code(std::string_view code) { return decode(code).center(); }

geo::GeoPoint decode_plus_code(std::string_view code, const geo::GeoPoint& reference) {
    check_structure(code);
    if (is_short(code)) return decode(recover_nearest(code, reference)).center();
    return decode(code).center();
}

}  // namespace evplan::olc
