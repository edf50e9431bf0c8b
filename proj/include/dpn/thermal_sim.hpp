#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dpn/weather.hpp"

namespace dpn {

struct ZoneParams {
  double capacitance_j_per_c = 6.0e6;
  double r_out_c_per_w = 0.015;
  double heater_max_w = 5000.0;
  double gain_w_per_c = 1200.0;    // proportional tracker
  double deadband_c = 0.1;
  double solar_aperture_m2 = 0.8;  // effective area scaling DNI to zone gain
  std::array<double, 168> internal_gain_w{};  // indexed by hour-of-week

  void validate(int zone_id) const;  // throws std::invalid_argument
};

struct Edge {
  int i = 0;
  int j = 0;
  double r_c_per_w = 0.05;
};

struct BuildingTopology {
  int n_zones = 0;
  std::vector<Edge> edges;

  void validate() const;
};

struct Building {
  BuildingTopology topology;
  std::vector<ZoneParams> zones;
  uint64_t seed = 0;
};

struct SimState {
  int64_t t = 0;                        // unix seconds
  std::vector<double> temps_c;
  std::vector<double> heater_powers_w;  // mean electrical power over the last step
};

// Proportional thermostat with a deadband; never cools, saturates at the
// heater rating.
double heater_power(double temp_c, double setpoint_c, const ZoneParams& z);

// Advances dt_s with forward-Euler substeps no longer than max_substep_s.
// Inter-zone fluxes are accumulated in edge-list order so relabeling zones
// together with their edges reproduces trajectories bit-exactly.
SimState sim_step(const SimState& s, const std::vector<double>& setpoints_c,
                  const WeatherRecord& wx, double dt_s, const Building& b,
                  double max_substep_s = 60.0);

class Simulator {
 public:
  Simulator(Building b, double dt_s, double init_temp_c = 20.0);

  const SimState& state() const { return state_; }
  void set_time(int64_t t) { state_.t = t; }
  int n_zones() const { return building_.topology.n_zones; }
  const Building& building() const { return building_; }
  double dt_s() const { return dt_s_; }

  // applies setpoints over [t, t+dt); state().heater_powers_w afterwards is
  // the mean power over that interval
  void step(const std::vector<double>& setpoints_c, const WeatherRecord& wx);

 private:
  Building building_;
  SimState state_;
  double dt_s_;
};

// Three-floor grid layout (2 x 3 rooms per floor), deterministic parameter
// jitter from the seed, heavier envelope coupling on the top and ground
// floors.
Building default_building(int n_floors, int zones_per_floor, uint64_t seed);

std::string building_to_json(const Building& b);
Building building_from_json(const std::string& text);
void write_building_json(const std::string& path, const Building& b);
Building read_building_json(const std::string& path);

}  // namespace dpn
