#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace brp {

// Proleptic Gregorian calendar date, ISO-8601 on the wire.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend auto operator<=>(const Date&, const Date&) = default;

  static Date year_start(int y) { return {y, 1, 1}; }
  static Date year_end(int y) { return {y, 12, 31}; }
};

bool is_leap_year(int year) noexcept;
int days_in_month(int year, int month) noexcept;
bool is_valid(const Date& d) noexcept;

// Returns nullopt on anything that is not a valid YYYY-MM-DD date.
std::optional<Date> parse_date(std::string_view text);
std::string to_string(const Date& d);

// Whole calendar months from `from` up to the end of `until_year`
// (an event in December of until_year is 0 months old).
int months_until_year_end(const Date& from, int until_year) noexcept;

}  // namespace brp
