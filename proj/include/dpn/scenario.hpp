#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dpn/orchestrator.hpp"
#include "dpn/rssm.hpp"
#include "dpn/ssm.hpp"

namespace dpn {

// The shipped desk-scale experiment: an 18-zone building over one synthetic
// winter, staircase excitation for data collection, two months of training
// data, one validation month, a 28-day test month, and daily morning DR
// windows over that month.
struct ScenarioSpec {
  int n_floors = 3;
  int zones_per_floor = 6;
  int64_t sim_start = 0;      // warmup begins here
  int warmup_steps = 96;      // one day; recorded data starts after it
  int n_sim_rows = 0;         // warmup + recorded span
  std::vector<std::string> train_months;
  std::string val_month;
  std::string test_month;
  int event_from_hour = 6;
  int event_to_hour = 9;      // [from, to) UTC
  SsmConfig ssm;
  RssmConfig rssm;
};

ScenarioSpec scenario_spec();

Building scenario_building(uint64_t seed);
WeatherSeries scenario_weather(const ScenarioSpec& s, uint64_t seed);
// Excitation staircases + simulation + normalization from the train months.
Dataset scenario_collect(const ScenarioSpec& s, const Building& b, const WeatherSeries& wx,
                         uint64_t seed);
DatasetSplit scenario_split(const ScenarioSpec& s, const Dataset& d);

// One model per zone; per-zone seeds derive from `seed` so different seeds
// give independent trainings. on_zone (optional) fires after each zone.
std::vector<Ssm> train_zone_ssms(const Dataset& train, const SsmConfig& base, uint64_t seed,
                                 const std::function<void(int)>& on_zone = {});
std::vector<Rssm> train_zone_rssms(const Dataset& train, const RssmConfig& base, uint64_t seed,
                                   const std::function<void(int)>& on_zone = {});

// Constant-setpoint building power for weather rows [row0, row1), simulated
// from a warm start `warmup` steps earlier. Entry k is the power over the
// step that applies weather row row0+k.
std::vector<double> baseline_building_power(const Building& b, const WeatherSeries& wx, int row0,
                                            int row1, double setpoint_c, int warmup = 96);

// Daily [from_hour, to_hour) windows intersected with weather rows
// [row0, row1), as half-open row ranges.
std::vector<std::pair<int, int>> daily_windows(const WeatherSeries& wx, int row0, int row1,
                                               int from_hour, int to_hour);

// First and one-past-last weather row of a "YYYY-MM" month.
std::pair<int, int> month_rows(const WeatherSeries& wx, const std::string& month);

// One flat cap for all windows, picked from the baseline: depth * the largest
// window mean, lowered if needed until at least min_days windows exceed it.
struct CapCalibration {
  double p_max_w = 0;
  std::vector<double> window_mean_w;
  int action_days = 0;
};
CapCalibration calibrate_cap(const std::vector<double>& baseline_w, int row0,
                             const std::vector<std::pair<int, int>>& windows, double depth = 0.75,
                             int min_days = 10);

std::vector<DrEvent> make_events(const std::vector<std::pair<int, int>>& windows, double p_max_w);

ControlConfig scenario_control_config(PlannerKind kind, double nu, TransportKind transport,
                                      uint64_t seed);

}  // namespace dpn
