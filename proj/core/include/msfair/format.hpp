#pragma once

#include <span>
#include <string>

namespace msfair {

/// Shortest decimal text that round-trips to the same double. Locale
/// independent, so CSV output is byte-stable across machines.
std::string format_double(double value);

/// Fixed notation with `digits` fractional digits.
std::string format_fixed(double value, int digits);

/// Values joined by `sep` using format_double.
std::string join_doubles(std::span<const double> values, char sep);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& text);

}  // namespace msfair
