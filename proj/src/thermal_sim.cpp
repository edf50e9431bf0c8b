#include "dpn/thermal_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dpn/rng.hpp"
#include "dpn/timeutil.hpp"

namespace dpn {

void ZoneParams::validate(int zone_id) const {
  auto bad = [zone_id](const std::string& what) {
    throw std::invalid_argument("zone " + std::to_string(zone_id) + ": " + what);
  };
  if (!(capacitance_j_per_c > 0)) bad("capacitance must be positive");
  if (!(r_out_c_per_w > 0)) bad("envelope resistance must be positive");
  if (!(heater_max_w >= 0)) bad("heater rating must be nonnegative");
  if (!(gain_w_per_c > 0)) bad("tracker gain must be positive");
  if (!(deadband_c >= 0)) bad("deadband must be nonnegative");
  if (!(solar_aperture_m2 >= 0)) bad("solar aperture must be nonnegative");
  for (double g : internal_gain_w)
    if (!(g >= 0) || !std::isfinite(g)) bad("internal gains must be finite and nonnegative");
}

void BuildingTopology::validate() const {
  if (n_zones <= 0) throw std::invalid_argument("building needs at least one zone");
  for (const auto& e : edges) {
    if (e.i < 0 || e.i >= n_zones || e.j < 0 || e.j >= n_zones || e.i == e.j)
      throw std::invalid_argument("edge endpoints out of range");
    if (!(e.r_c_per_w > 0)) throw std::invalid_argument("edge resistance must be positive");
  }
}

double heater_power(double temp_c, double setpoint_c, const ZoneParams& z) {
  double e = setpoint_c - temp_c;
  if (e <= z.deadband_c) return 0.0;
  return std::min(z.gain_w_per_c * e, z.heater_max_w);
}

SimState sim_step(const SimState& s, const std::vector<double>& setpoints_c,
                  const WeatherRecord& wx, double dt_s, const Building& b,
                  double max_substep_s) {
  const int n = b.topology.n_zones;
  if (static_cast<int>(s.temps_c.size()) != n || static_cast<int>(setpoints_c.size()) != n)
    throw std::invalid_argument("state/setpoint size mismatch");
  if (!(dt_s > 0) || !(max_substep_s > 0)) throw std::invalid_argument("bad step sizes");

  const int how = hour_of_week(s.t);
  const int n_sub = static_cast<int>(std::ceil(dt_s / max_substep_s));
  const double h = dt_s / n_sub;

  SimState out;
  out.t = s.t + static_cast<int64_t>(std::llround(dt_s));
  out.temps_c = s.temps_c;
  out.heater_powers_w.assign(static_cast<size_t>(n), 0.0);

  std::vector<double> flux(static_cast<size_t>(n));
  std::vector<double> heat(static_cast<size_t>(n));
  for (int k = 0; k < n_sub; ++k) {
    for (int i = 0; i < n; ++i) {
      const ZoneParams& z = b.zones[static_cast<size_t>(i)];
      double q = heater_power(out.temps_c[static_cast<size_t>(i)],
                              setpoints_c[static_cast<size_t>(i)], z);
      heat[static_cast<size_t>(i)] = q;
      out.heater_powers_w[static_cast<size_t>(i)] += q;
      flux[static_cast<size_t>(i)] =
          (wx.t_out_c - out.temps_c[static_cast<size_t>(i)]) / z.r_out_c_per_w + q +
          z.internal_gain_w[static_cast<size_t>(how)] + z.solar_aperture_m2 * wx.dni_wm2;
    }
    for (const auto& e : b.topology.edges) {
      double f = (out.temps_c[static_cast<size_t>(e.j)] - out.temps_c[static_cast<size_t>(e.i)]) /
                 e.r_c_per_w;
      flux[static_cast<size_t>(e.i)] += f;
      flux[static_cast<size_t>(e.j)] -= f;
    }
    for (int i = 0; i < n; ++i)
      out.temps_c[static_cast<size_t>(i)] +=
          h * flux[static_cast<size_t>(i)] / b.zones[static_cast<size_t>(i)].capacitance_j_per_c;
  }
  for (int i = 0; i < n; ++i) out.heater_powers_w[static_cast<size_t>(i)] /= n_sub;
  return out;
}

Simulator::Simulator(Building b, double dt_s, double init_temp_c)
    : building_(std::move(b)), dt_s_(dt_s) {
  building_.topology.validate();
  if (static_cast<int>(building_.zones.size()) != building_.topology.n_zones)
    throw std::invalid_argument("zone-count mismatch between params and topology");
  for (int i = 0; i < building_.topology.n_zones; ++i)
    building_.zones[static_cast<size_t>(i)].validate(i);
  state_.temps_c.assign(static_cast<size_t>(building_.topology.n_zones), init_temp_c);
  state_.heater_powers_w.assign(static_cast<size_t>(building_.topology.n_zones), 0.0);
}

void Simulator::step(const std::vector<double>& setpoints_c, const WeatherRecord& wx) {
  state_ = sim_step(state_, setpoints_c, wx, dt_s_, building_);
}

Building default_building(int n_floors, int zones_per_floor, uint64_t seed) {
  if (n_floors <= 0 || zones_per_floor <= 0) throw std::invalid_argument("bad building shape");
  const int n = n_floors * zones_per_floor;
  const int cols = zones_per_floor >= 3 ? (zones_per_floor + 1) / 2 : zones_per_floor;

  Building b;
  b.seed = seed;
  b.topology.n_zones = n;
  b.zones.resize(static_cast<size_t>(n));

  for (int f = 0; f < n_floors; ++f) {
    for (int r = 0; r < zones_per_floor; ++r) {
      int id = f * zones_per_floor + r;
      Rng rng = substream(seed, 0xB0, static_cast<uint64_t>(id));
      auto jit = [&rng]() { return rng.uniform(0.8, 1.2); };
      ZoneParams z;
      z.capacitance_j_per_c = 6.0e6 * jit();
      z.r_out_c_per_w = 0.015 * jit();
      // middle floors lose less through the envelope
      if (f > 0 && f < n_floors - 1) z.r_out_c_per_w *= 1.5;
      z.heater_max_w = 5000.0;
      z.gain_w_per_c = 1200.0 * jit();
      z.deadband_c = 0.1;
      z.solar_aperture_m2 = 0.8 * jit();
      double base = 80.0 * jit();
      double office = 220.0 * jit();
      for (int hw = 0; hw < 168; ++hw) {
        int dow = hw / 24, hod = hw % 24;
        bool busy = dow < 5 && hod >= 8 && hod < 18;
        z.internal_gain_w[static_cast<size_t>(hw)] = base + (busy ? office : 0.0);
      }
      b.zones[static_cast<size_t>(id)] = z;
    }
  }

  auto add_edge = [&b, seed](int i, int j) {
    Rng rng = substream(seed, 0xB1, static_cast<uint64_t>(i), static_cast<uint64_t>(j));
    b.topology.edges.push_back(Edge{i, j, 0.05 * rng.uniform(0.8, 1.2)});
  };
  for (int f = 0; f < n_floors; ++f) {
    for (int r = 0; r < zones_per_floor; ++r) {
      int id = f * zones_per_floor + r;
      int row = r / cols, col = r % cols;
      if (col + 1 < cols && r + 1 < zones_per_floor) add_edge(id, id + 1);
      if ((row + 1) * cols + col < zones_per_floor) add_edge(id, id + cols);
      if (f + 1 < n_floors) add_edge(id, id + zones_per_floor);
    }
  }
  return b;
}

std::string building_to_json(const Building& b) {
  nlohmann::json j;
  j["seed"] = b.seed;
  j["n_zones"] = b.topology.n_zones;
  j["zones"] = nlohmann::json::array();
  for (const auto& z : b.zones) {
    nlohmann::json zj;
    zj["capacitance_j_per_c"] = z.capacitance_j_per_c;
    zj["r_out_c_per_w"] = z.r_out_c_per_w;
    zj["heater_max_w"] = z.heater_max_w;
    zj["gain_w_per_c"] = z.gain_w_per_c;
    zj["deadband_c"] = z.deadband_c;
    zj["solar_aperture_m2"] = z.solar_aperture_m2;
    zj["internal_gain_w"] = z.internal_gain_w;
    j["zones"].push_back(zj);
  }
  j["adjacency"] = nlohmann::json::array();
  for (const auto& e : b.topology.edges) j["adjacency"].push_back({e.i, e.j, e.r_c_per_w});
  return j.dump(2);
}

Building building_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Building b;
  b.seed = j.value("seed", 0ull);
  b.topology.n_zones = j.at("n_zones").get<int>();
  for (const auto& zj : j.at("zones")) {
    ZoneParams z;
    z.capacitance_j_per_c = zj.at("capacitance_j_per_c").get<double>();
    z.r_out_c_per_w = zj.at("r_out_c_per_w").get<double>();
    z.heater_max_w = zj.at("heater_max_w").get<double>();
    z.gain_w_per_c = zj.at("gain_w_per_c").get<double>();
    z.deadband_c = zj.at("deadband_c").get<double>();
    z.solar_aperture_m2 = zj.at("solar_aperture_m2").get<double>();
    auto gains = zj.at("internal_gain_w");
    if (gains.size() != 168) throw std::invalid_argument("internal_gain_w needs 168 entries");
    for (size_t k = 0; k < 168; ++k) z.internal_gain_w[k] = gains[k].get<double>();
    b.zones.push_back(z);
  }
  for (const auto& ej : j.at("adjacency")) {
    if (ej.size() != 3) throw std::invalid_argument("adjacency rows are [i, j, r]");
    b.topology.edges.push_back(
        Edge{ej[0].get<int>(), ej[1].get<int>(), ej[2].get<double>()});
  }
  b.topology.validate();
  if (static_cast<int>(b.zones.size()) != b.topology.n_zones)
    throw std::invalid_argument("zone-count mismatch between params and topology");
  for (int i = 0; i < b.topology.n_zones; ++i) b.zones[static_cast<size_t>(i)].validate(i);
  return b;
}

void write_building_json(const std::string& path, const Building& b) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << building_to_json(b) << "\n";
}

Building read_building_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return building_from_json(ss.str());
}

}  // namespace dpn
