#include "dpn/weather.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dpn/rng.hpp"
#include "dpn/timeutil.hpp"

namespace dpn {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;

double clampd(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// mean-reverting step: x_{k+1} = x_k + (mu - x_k) * dt/tau + sig * sqrt(2*dt/tau) * n
double ou_step(double x, double mu, double tau_s, double sig, double dt_s, double n) {
  double a = dt_s / tau_s;
  return x + (mu - x) * a + sig * std::sqrt(2.0 * a) * n;
}
}  // namespace

WeatherSeries generate_weather(int64_t start_unix, int n_steps, int64_t step_seconds,
                               uint64_t seed) {
  if (n_steps <= 0 || step_seconds <= 0) throw std::invalid_argument("bad weather grid");
  WeatherSeries w;
  w.step_seconds = step_seconds;
  w.records.resize(static_cast<size_t>(n_steps));

  Rng temp_rng = substream(seed, 0xA1);
  Rng cloud_rng = substream(seed, 0xA2);
  Rng rh_rng = substream(seed, 0xA3);

  double dt = static_cast<double>(step_seconds);
  double temp_dev = 0.0;  // OU deviation around the deterministic profile
  double cloud = 0.6;
  double rh = 60.0;

  for (int k = 0; k < n_steps; ++k) {
    int64_t t = start_unix + static_cast<int64_t>(k) * step_seconds;
    double doy = static_cast<double>(day_of_year(t));
    double hod = hour_of_day(t);

    // seasonal base: mid-January trough near -12 C, mid-July around -2 C
    double seasonal = -7.0 - 5.0 * std::cos(kTau * (doy - 15.0) / 365.25);
    double diurnal = 4.0 * std::sin(kTau * (hod - 9.0) / 24.0);
    temp_dev = ou_step(temp_dev, 0.0, 12.0 * 3600.0, 3.0, dt, temp_rng.normal());
    double t_out = clampd(seasonal + diurnal + temp_dev, -25.0, 5.0);

    // short days in winter; envelope is a stretched half-sine over daylight
    double daylen = 9.0 + 3.0 * std::cos(kTau * (doy - 172.0) / 365.25);
    double sunrise = 12.0 - daylen / 2.0;
    double frac = (hod - sunrise) / daylen;
    double envelope = 0.0;
    if (frac > 0.0 && frac < 1.0) envelope = 700.0 * std::pow(std::sin(kTau / 2.0 * frac), 1.2);
    cloud = clampd(ou_step(cloud, 0.6, 6.0 * 3600.0, 0.3, dt, cloud_rng.normal()), 0.0, 1.0);
    double dni = envelope * cloud;

    rh = clampd(ou_step(rh, 60.0, 24.0 * 3600.0, 15.0, dt, rh_rng.normal()), 20.0, 95.0);

    w.records[static_cast<size_t>(k)] = WeatherRecord{t, t_out, rh, dni};
  }
  return w;
}

void write_weather_csv(const std::string& path, const WeatherSeries& w) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "timestamp,t_out_c,rh_pct,dni_wm2\n";
  char buf[160];
  for (const auto& r : w.records) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", iso8601(r.timestamp).c_str(),
                  r.t_out_c, r.rh_pct, r.dni_wm2);
    f << buf;
  }
}

WeatherSeries read_weather_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty weather file: " + path);
  if (line != "timestamp,t_out_c,rh_pct,dni_wm2")
    throw std::runtime_error("bad weather header: " + line);
  WeatherSeries w;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string ts, a, b, c;
    if (!std::getline(ss, ts, ',') || !std::getline(ss, a, ',') || !std::getline(ss, b, ',') ||
        !std::getline(ss, c))
      throw std::runtime_error("bad weather row: " + line);
    WeatherRecord r;
    r.timestamp = parse_iso8601(ts);
    r.t_out_c = std::stod(a);
    r.rh_pct = std::stod(b);
    r.dni_wm2 = std::stod(c);
    w.records.push_back(r);
  }
  if (w.records.size() >= 2) w.step_seconds = w.records[1].timestamp - w.records[0].timestamp;
  return w;
}

}  // namespace dpn
