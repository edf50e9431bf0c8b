#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dpn {

struct WeatherRecord {
  int64_t timestamp = 0;  // unix seconds, UTC civil time
  double t_out_c = 0;
  double rh_pct = 0;
  double dni_wm2 = 0;
};

struct WeatherSeries {
  int64_t step_seconds = 900;
  std::vector<WeatherRecord> records;

  const WeatherRecord& at(int i) const { return records[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(records.size()); }
};

// Cold-climate synthetic series: seasonal + diurnal temperature with OU
// noise, clear-sky DNI envelope modulated by an OU cloud factor, slow OU
// humidity. Fully determined by (start, n_steps, step_seconds, seed).
WeatherSeries generate_weather(int64_t start_unix, int n_steps, int64_t step_seconds,
                               uint64_t seed);

void write_weather_csv(const std::string& path, const WeatherSeries& w);
WeatherSeries read_weather_csv(const std::string& path);  // throws on malformed rows

}  // namespace dpn
