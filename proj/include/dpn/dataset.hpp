#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dpn/thermal_sim.hpp"
#include "dpn/weather.hpp"

namespace dpn {

constexpr int kDistDim = 7;  // t_out, rh, dni, hour sin/cos, day-of-week sin/cos

struct Observation {
  double zone_temp_c = 0;
  double hvac_w = 0;  // mean electrical power over the interval ending at the row's timestamp
};

struct Action {
  double setpoint_c = 21.0;
};

struct Disturbance {
  std::array<double, kDistDim> v{};
  static Disturbance from(const WeatherRecord& r);
};

struct NormStats {
  double temp_mean = 0, temp_std = 1;
  double power_mean = 0, power_std = 1;
  double setpoint_mean = 0, setpoint_std = 1;
  std::array<double, kDistDim> dist_mean{};
  std::array<double, kDistDim> dist_std{1, 1, 1, 1, 1, 1, 1};  // identity by default

  double norm_temp(double x) const { return (x - temp_mean) / temp_std; }
  double norm_power(double x) const { return (x - power_mean) / power_std; }
  double norm_setpoint(double x) const { return (x - setpoint_mean) / setpoint_std; }
  double denorm_temp(double x) const { return x * temp_std + temp_mean; }
  double denorm_power(double x) const { return x * power_std + power_mean; }
  double denorm_setpoint(double x) const { return x * setpoint_std + setpoint_mean; }
  Eigen::VectorXd norm_dist(const Disturbance& d) const;
};

struct ZoneSeries {
  std::vector<Observation> obs;
  std::vector<Action> act;
};

struct Dataset {
  int64_t step_seconds = 900;
  std::vector<int64_t> timestamps;
  std::vector<Disturbance> disturbances;  // shared across zones
  std::vector<ZoneSeries> zones;
  NormStats stats;

  int n_rows() const { return static_cast<int>(timestamps.size()); }
  int n_zones() const { return static_cast<int>(zones.size()); }
};

struct DatasetSplit {
  Dataset train, val, test;
};

// Independent per-zone staircase excitation: setpoint levels uniform on
// [17, 23] C snapped to a 0.25 C grid, hold lengths uniform on [4, 192]
// steps (1 h .. 2 days at 15 min).
std::vector<std::vector<double>> excitation_schedule(int n_zones, int n_steps, uint64_t seed);

// Drives the simulator over the weather series with the given per-zone
// setpoint schedule. The first warmup_steps are simulated but not recorded
// so initial transients and the undefined first power reading never enter
// the data. Row k holds (T_k, mean power over the step ending at k, the
// setpoint applied over [k, k+1), disturbances at k).
// stats_months selects which "YYYY-MM" months feed the normalization stats;
// empty means all recorded rows.
Dataset collect(Simulator& sim, const std::vector<std::vector<double>>& schedule,
                const WeatherSeries& weather, int warmup_steps = 96,
                const std::vector<std::string>& stats_months = {});

// Chronological month-based split; normalization stats are recomputed from
// the train partition and copied to val and test.
DatasetSplit split(const Dataset& d, const std::vector<std::string>& train_months,
                   const std::string& val_month, const std::string& test_month);

NormStats compute_stats(const Dataset& d);

void write_dataset(const std::string& dir, const Dataset& d);
Dataset read_dataset(const std::string& dir);

// Normalized, per-zone training arrays.
struct ZoneView {
  int n = 0;
  Eigen::VectorXd temp_n, power_n, act_n;
  Eigen::MatrixXd dist_n;  // n x kDistDim
};
ZoneView make_zone_view(const Dataset& d, int zone);

}  // namespace dpn
