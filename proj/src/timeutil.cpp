#include "dpn/timeutil.hpp"

#include <cstdio>
#include <stdexcept>

namespace dpn {

int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

static void civil_from_days(int64_t z, int* yy, int* mm, int* dd) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t y = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  *dd = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  *mm = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  *yy = static_cast<int>(y + (*mm <= 2));
}

CivilTime civil_from_unix(int64_t t) {
  int64_t days = t / 86400;
  int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  CivilTime c;
  civil_from_days(days, &c.year, &c.month, &c.day);
  c.hour = static_cast<int>(rem / 3600);
  c.minute = static_cast<int>((rem % 3600) / 60);
  c.second = static_cast<int>(rem % 60);
  return c;
}

int64_t unix_from_civil(const CivilTime& c) {
  return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
         c.second;
}

int weekday_from_unix(int64_t t) {
  int64_t days = t / 86400;
  if (t % 86400 < 0) days -= 1;
  // 1970-01-01 was a Thursday; shift so Monday = 0
  int64_t w = (days + 3) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w);
}

int hour_of_week(int64_t t) {
  CivilTime c = civil_from_unix(t);
  return weekday_from_unix(t) * 24 + c.hour;
}

double hour_of_day(int64_t t) {
  int64_t rem = t % 86400;
  if (rem < 0) rem += 86400;
  return static_cast<double>(rem) / 3600.0;
}

int day_of_year(int64_t t) {
  CivilTime c = civil_from_unix(t);
  return static_cast<int>(days_from_civil(c.year, c.month, c.day) -
                          days_from_civil(c.year, 1, 1)) +
         1;
}

std::string iso8601(int64_t t) {
  CivilTime c = civil_from_unix(t);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", c.year, c.month, c.day, c.hour,
                c.minute, c.second);
  return std::string(buf);
}

int64_t parse_iso8601(const std::string& s) {
  CivilTime c;
  int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &c.year, &c.month, &c.day, &c.hour,
                      &c.minute, &c.second);
  if (n != 6 || c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour > 23 ||
      c.minute > 59 || c.second > 60)
    throw std::invalid_argument("bad timestamp: " + s);
  return unix_from_civil(c);
}

bool same_month(int64_t t, int year, int month) {
  CivilTime c = civil_from_unix(t);
  return c.year == year && c.month == month;
}

}  // namespace dpn
