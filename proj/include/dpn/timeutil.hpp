#pragma once

#include <cstdint>
#include <string>

namespace dpn {

struct CivilTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
  int second = 0;
};

// Days since 1970-01-01 for a proleptic Gregorian civil date
// (Howard Hinnant's chrono-compatible algorithm).
int64_t days_from_civil(int y, int m, int d);
CivilTime civil_from_unix(int64_t t);
int64_t unix_from_civil(const CivilTime& c);

int weekday_from_unix(int64_t t);  // 0 = Monday .. 6 = Sunday
int hour_of_week(int64_t t);       // 0..167, Monday 00:00 -> 0
double hour_of_day(int64_t t);     // fractional, 0.0 .. <24.0
int day_of_year(int64_t t);        // 1-based

std::string iso8601(int64_t t);                 // "2023-07-01T06:15:00"
int64_t parse_iso8601(const std::string& s);    // throws std::invalid_argument
bool same_month(int64_t t, int year, int month);

}  // namespace dpn
