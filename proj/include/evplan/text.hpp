#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evplan::text {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view s);

std::string_view trim(std::string_view s) noexcept;
std::string lower(std::string_view s);

/// Splits one CSV record. Handles double-quoted fields with "" escapes; no
/// embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace evplan::text
