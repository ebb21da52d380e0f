#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace droopsim {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Whole-string decimal parse; std::nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

std::string_view trim(std::string_view s);

}  // namespace droopsim
