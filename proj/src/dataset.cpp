#include "dpn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dpn/json_io.hpp"
#include "dpn/rng.hpp"
#include "dpn/timeutil.hpp"

namespace dpn {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;

std::string month_key(int64_t t) {
  CivilTime c = civil_from_unix(t);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", c.year, c.month);
  return std::string(buf);
}

double snap_quarter(double x) { return std::round(x * 4.0) / 4.0; }
}  // namespace

Disturbance Disturbance::from(const WeatherRecord& r) {
  Disturbance d;
  double hod = hour_of_day(r.timestamp);
  double dowf = weekday_from_unix(r.timestamp) + hod / 24.0;
  d.v = {r.t_out_c,
         r.rh_pct,
         r.dni_wm2,
         std::sin(kTau * hod / 24.0),
         std::cos(kTau * hod / 24.0),
         std::sin(kTau * dowf / 7.0),
         std::cos(kTau * dowf / 7.0)};
  return d;
}

Eigen::VectorXd NormStats::norm_dist(const Disturbance& d) const {
  Eigen::VectorXd out(kDistDim);
  for (int k = 0; k < kDistDim; ++k)
    out[k] = (d.v[static_cast<size_t>(k)] - dist_mean[static_cast<size_t>(k)]) /
             dist_std[static_cast<size_t>(k)];
  return out;
}

std::vector<std::vector<double>> excitation_schedule(int n_zones, int n_steps, uint64_t seed) {
  if (n_zones <= 0 || n_steps <= 0) throw std::invalid_argument("bad schedule shape");
  std::vector<std::vector<double>> sched(static_cast<size_t>(n_zones));
  for (int z = 0; z < n_zones; ++z) {
    Rng rng = substream(seed, 0xC0, static_cast<uint64_t>(z));
    auto& s = sched[static_cast<size_t>(z)];
    s.reserve(static_cast<size_t>(n_steps));
    double prev = -1.0;
    while (static_cast<int>(s.size()) < n_steps) {
      double level;
      do {
        level = snap_quarter(rng.uniform(17.0, 23.0));
      } while (level == prev);  // adjacent holds must actually change level
      prev = level;
      int hold = rng.uniform_int(4, 192);
      for (int k = 0; k < hold && static_cast<int>(s.size()) < n_steps; ++k) s.push_back(level);
    }
  }
  return sched;
}

Dataset collect(Simulator& sim, const std::vector<std::vector<double>>& schedule,
                const WeatherSeries& weather, int warmup_steps,
                const std::vector<std::string>& stats_months) {
  const int n_zones = sim.n_zones();
  const int n_steps = weather.size();
  if (static_cast<int>(schedule.size()) != n_zones)
    throw std::invalid_argument("schedule zone count mismatch");
  for (const auto& s : schedule)
    if (static_cast<int>(s.size()) < n_steps)
      throw std::invalid_argument("schedule shorter than weather");
  if (warmup_steps < 1 || warmup_steps >= n_steps)
    throw std::invalid_argument("warmup must be in [1, n_steps)");

  sim.set_time(weather.at(0).timestamp);
  std::vector<double> sp(static_cast<size_t>(n_zones));

  Dataset d;
  d.step_seconds = weather.step_seconds;
  d.zones.resize(static_cast<size_t>(n_zones));
  for (int k = 0; k < n_steps; ++k) {
    if (k >= warmup_steps) {
      d.timestamps.push_back(weather.at(k).timestamp);
      d.disturbances.push_back(Disturbance::from(weather.at(k)));
      for (int z = 0; z < n_zones; ++z) {
        d.zones[static_cast<size_t>(z)].obs.push_back(
            Observation{sim.state().temps_c[static_cast<size_t>(z)],
                        sim.state().heater_powers_w[static_cast<size_t>(z)]});
        d.zones[static_cast<size_t>(z)].act.push_back(
            Action{schedule[static_cast<size_t>(z)][static_cast<size_t>(k)]});
      }
    }
    for (int z = 0; z < n_zones; ++z)
      sp[static_cast<size_t>(z)] = schedule[static_cast<size_t>(z)][static_cast<size_t>(k)];
    sim.step(sp, weather.at(k));
  }

  if (stats_months.empty()) {
    d.stats = compute_stats(d);
  } else {
    std::set<std::string> keep(stats_months.begin(), stats_months.end());
    Dataset sub;
    sub.step_seconds = d.step_seconds;
    sub.zones.resize(static_cast<size_t>(n_zones));
    for (int k = 0; k < d.n_rows(); ++k) {
      if (!keep.count(month_key(d.timestamps[static_cast<size_t>(k)]))) continue;
      sub.timestamps.push_back(d.timestamps[static_cast<size_t>(k)]);
      sub.disturbances.push_back(d.disturbances[static_cast<size_t>(k)]);
      for (int z = 0; z < n_zones; ++z) {
        sub.zones[static_cast<size_t>(z)].obs.push_back(
            d.zones[static_cast<size_t>(z)].obs[static_cast<size_t>(k)]);
        sub.zones[static_cast<size_t>(z)].act.push_back(
            d.zones[static_cast<size_t>(z)].act[static_cast<size_t>(k)]);
      }
    }
    if (sub.n_rows() == 0) throw std::invalid_argument("stats_months matched no rows");
    d.stats = compute_stats(sub);
  }
  return d;
}

NormStats compute_stats(const Dataset& d) {
  if (d.n_rows() == 0 || d.n_zones() == 0) throw std::invalid_argument("empty dataset");
  auto finish = [](double sum, double sumsq, int64_t n, double* mean, double* std) {
    *mean = sum / static_cast<double>(n);
    double var = sumsq / static_cast<double>(n) - *mean * *mean;
    *std = std::sqrt(std::max(var, 0.0));
    if (*std < 1e-8) *std = 1e-8;  // keep normalization well defined for flat features
  };

  NormStats s;
  double ts = 0, tss = 0, ps = 0, pss = 0, as = 0, ass = 0;
  int64_t n_obs = 0;
  for (const auto& z : d.zones) {
    for (const auto& o : z.obs) {
      ts += o.zone_temp_c;
      tss += o.zone_temp_c * o.zone_temp_c;
      ps += o.hvac_w;
      pss += o.hvac_w * o.hvac_w;
      ++n_obs;
    }
    for (const auto& a : z.act) {
      as += a.setpoint_c;
      ass += a.setpoint_c * a.setpoint_c;
    }
  }
  finish(ts, tss, n_obs, &s.temp_mean, &s.temp_std);
  finish(ps, pss, n_obs, &s.power_mean, &s.power_std);
  finish(as, ass, n_obs, &s.setpoint_mean, &s.setpoint_std);
  for (int k = 0; k < kDistDim; ++k) {
    double ds = 0, dss = 0;
    for (const auto& dist : d.disturbances) {
      double v = dist.v[static_cast<size_t>(k)];
      ds += v;
      dss += v * v;
    }
    finish(ds, dss, d.n_rows(), &s.dist_mean[static_cast<size_t>(k)],
           &s.dist_std[static_cast<size_t>(k)]);
  }
  return s;
}

DatasetSplit split(const Dataset& d, const std::vector<std::string>& train_months,
                   const std::string& val_month, const std::string& test_month) {
  auto member = [&](int64_t t) -> int {
    std::string key = month_key(t);
    for (const auto& m : train_months)
      if (m == key) return 0;
    if (key == val_month) return 1;
    if (key == test_month) return 2;
    return -1;
  };

  DatasetSplit out;
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  for (auto* p : parts) {
    p->step_seconds = d.step_seconds;
    p->zones.resize(static_cast<size_t>(d.n_zones()));
  }
  int last_part = -1;
  for (int k = 0; k < d.n_rows(); ++k) {
    int part = member(d.timestamps[static_cast<size_t>(k)]);
    if (part < 0) continue;
    if (part < last_part)
      throw std::invalid_argument("split months must be chronologically ordered");
    last_part = part;
    Dataset* p = parts[part];
    p->timestamps.push_back(d.timestamps[static_cast<size_t>(k)]);
    p->disturbances.push_back(d.disturbances[static_cast<size_t>(k)]);
    for (int z = 0; z < d.n_zones(); ++z) {
      p->zones[static_cast<size_t>(z)].obs.push_back(
          d.zones[static_cast<size_t>(z)].obs[static_cast<size_t>(k)]);
      p->zones[static_cast<size_t>(z)].act.push_back(
          d.zones[static_cast<size_t>(z)].act[static_cast<size_t>(k)]);
    }
  }
  if (out.train.n_rows() == 0 || out.val.n_rows() == 0 || out.test.n_rows() == 0)
    throw std::invalid_argument("every split partition needs rows");
  out.train.stats = compute_stats(out.train);
  out.val.stats = out.train.stats;
  out.test.stats = out.train.stats;
  return out;
}

void write_dataset(const std::string& dir, const Dataset& d) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  char buf[256];
  for (int z = 0; z < d.n_zones(); ++z) {
    std::snprintf(buf, sizeof(buf), "%s/zone_%02d.csv", dir.c_str(), z);
    std::ofstream f(buf);
    if (!f) throw std::runtime_error(std::string("cannot write ") + buf);
    f << "timestamp,zone_temp_c,hvac_w,setpoint_c,t_out_c,rh_pct,dni_wm2\n";
    for (int k = 0; k < d.n_rows(); ++k) {
      const auto& o = d.zones[static_cast<size_t>(z)].obs[static_cast<size_t>(k)];
      const auto& a = d.zones[static_cast<size_t>(z)].act[static_cast<size_t>(k)];
      const auto& dist = d.disturbances[static_cast<size_t>(k)];
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    iso8601(d.timestamps[static_cast<size_t>(k)]).c_str(), o.zone_temp_c, o.hvac_w,
                    a.setpoint_c, dist.v[0], dist.v[1], dist.v[2]);
      f << buf;
    }
  }
  nlohmann::json meta;
  meta["step_seconds"] = d.step_seconds;
  meta["n_zones"] = d.n_zones();
  meta["stats"] = stats_to_json(d.stats);
  std::ofstream mf(dir + "/stats.json");
  if (!mf) throw std::runtime_error("cannot write " + dir + "/stats.json");
  mf << meta.dump(2) << "\n";
}

Dataset read_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/stats.json");
  if (!mf) throw std::runtime_error("cannot read " + dir + "/stats.json");
  nlohmann::json meta = nlohmann::json::parse(mf);

  Dataset d;
  d.step_seconds = meta.at("step_seconds").get<int64_t>();
  d.stats = stats_from_json(meta.at("stats"));
  int n_zones = meta.at("n_zones").get<int>();
  d.zones.resize(static_cast<size_t>(n_zones));

  char name[256];
  for (int z = 0; z < n_zones; ++z) {
    std::snprintf(name, sizeof(name), "%s/zone_%02d.csv", dir.c_str(), z);
    std::ifstream f(name);
    if (!f) throw std::runtime_error(std::string("cannot read ") + name);
    std::string line;
    std::getline(f, line);
    if (line != "timestamp,zone_temp_c,hvac_w,setpoint_c,t_out_c,rh_pct,dni_wm2")
      throw std::runtime_error(std::string("bad dataset header in ") + name);
    int row = 0;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string field[7];
      for (int c = 0; c < 7; ++c)
        if (!std::getline(ss, field[c], c == 6 ? '\n' : ','))
          throw std::runtime_error(std::string("bad dataset row in ") + name + ": " + line);
      int64_t ts = parse_iso8601(field[0]);
      if (z == 0) {
        d.timestamps.push_back(ts);
        WeatherRecord r{ts, std::stod(field[4]), std::stod(field[5]), std::stod(field[6])};
        d.disturbances.push_back(Disturbance::from(r));
      } else if (d.timestamps[static_cast<size_t>(row)] != ts) {
        throw std::runtime_error("zone files disagree on timestamps");
      }
      d.zones[static_cast<size_t>(z)].obs.push_back(
          Observation{std::stod(field[1]), std::stod(field[2])});
      d.zones[static_cast<size_t>(z)].act.push_back(Action{std::stod(field[3])});
      ++row;
    }
    if (row != d.n_rows()) throw std::runtime_error("zone files disagree on row count");
  }
  return d;
}

ZoneView make_zone_view(const Dataset& d, int zone) {
  if (zone < 0 || zone >= d.n_zones()) throw std::invalid_argument("zone out of range");
  ZoneView v;
  v.n = d.n_rows();
  v.temp_n.resize(v.n);
  v.power_n.resize(v.n);
  v.act_n.resize(v.n);
  v.dist_n.resize(v.n, kDistDim);
  const auto& zs = d.zones[static_cast<size_t>(zone)];
  for (int k = 0; k < v.n; ++k) {
    v.temp_n[k] = d.stats.norm_temp(zs.obs[static_cast<size_t>(k)].zone_temp_c);
    v.power_n[k] = d.stats.norm_power(zs.obs[static_cast<size_t>(k)].hvac_w);
    v.act_n[k] = d.stats.norm_setpoint(zs.act[static_cast<size_t>(k)].setpoint_c);
    v.dist_n.row(k) = d.stats.norm_dist(d.disturbances[static_cast<size_t>(k)]).transpose();
  }
  return v;
}

}  // namespace dpn
