#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "evplan/geo.hpp"

/// Open Location Code ("plus code") encoding and decoding.
namespace evplan::olc {

inline constexpr std::string_view kAlphabet = "23456789CFGHJMPQRVWX";
inline constexpr char kSeparator = '+';
inline constexpr char kPadding = '0';
inline constexpr std::size_t kSeparatorPosition = 8;
inline constexpr std::size_t kPairCodeLength = 10;
inline constexpr std::size_t kMaxDigits = 15;

class PlusCodeError : public std::invalid_argument {
  public:
    enum class Kind {
        InvalidCharacter,
        MissingSeparator,
        ShortCodeWithoutReference,
        Malformed,
    };

    PlusCodeError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

struct CodeArea {
    double south = 0.0;
    double west = 0.0;
    double north = 0.0;
    double east = 0.0;
    std::size_t code_length = 0;

    geo::GeoPoint center() const noexcept;
};

/// Structural check only; does not throw.
bool is_valid(std::string_view code) noexcept;
bool is_full(std::string_view code) noexcept;
bool is_short(std::string_view code) noexcept;

/// `code_length` is the number of significant digits: 2, 4, 6, 8, or 10..15.
std::string encode(double lat, double lon, std::size_t code_length = kPairCodeLength);

/// Area covered by a full code. Short codes raise ShortCodeWithoutReference.
CodeArea decode(std::string_view code);

/// Expands a short code to the full code closest to `reference`.
std::string recover_nearest(std::string_view short_code, const geo::GeoPoint& reference);

/// Center of a full code.
geo::GeoPoint decode_plus_code(std::string_view code);
/// Center of a full or short code; short codes are resolved against `reference`.
geo::GeoPoint decode_plus_code(std::string_view code, const geo::GeoPoint& reference);

}  // namespace evplan::olc
