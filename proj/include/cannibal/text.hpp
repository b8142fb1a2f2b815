#ifndef CANNIBAL_TEXT_HPP
#define CANNIBAL_TEXT_HPP

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cannibal {

using Date = std::chrono::sys_days;

/// Strict YYYY-MM-DD.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date date);

/// ISO-8601 week number (1..53).
int iso_week_of_year(Date date);

namespace text {

std::string_view trim(std::string_view s);

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes. Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line);

std::string csv_field(std::string_view value);

std::optional<double> parse_real(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Shortest round-trip decimal in fixed notation ("1200", "0.25").
std::string format_real(double v);

}  // namespace text
}  // namespace cannibal

#endif  // CANNIBAL_TEXT_HPP
