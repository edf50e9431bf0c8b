// Command-line front end: dataset generation, model training/evaluation,
// receding-horizon DR control runs, and report generation. Every artifact
// lands under --out and is recorded in manifest.json there.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpn/dataset.hpp"
#include "dpn/metrics.hpp"
#include "dpn/model_eval.hpp"
#include "dpn/orchestrator.hpp"
#include "dpn/planner.hpp"
#include "dpn/rng.hpp"
#include "dpn/scenario.hpp"
#include "dpn/thermal_sim.hpp"
#include "dpn/timeutil.hpp"
#include "dpn/weather.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpn;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(slurp(path));
}

void manifest_add(const std::string& out, const std::string& command, const json& args,
                  const std::vector<std::string>& artifacts) {
  fs::create_directories(out);
  const std::string path = out + "/manifest.json";
  json m = fs::exists(path) ? json::parse(slurp(path)) : json::object();
  if (!m.contains("invocations")) m["invocations"] = json::array();
  json e;
  e["command"] = command;
  e["args"] = args;
  e["artifacts"] = artifacts;
  e["at"] = iso8601(static_cast<int64_t>(std::time(nullptr)));
  m["invocations"].push_back(e);
  spit(path, m.dump(2) + "\n");
}

ScenarioSpec spec_from_config(const json& j) {
  ScenarioSpec s = scenario_spec();
  if (j.contains("ssm")) {
    const json& c = j.at("ssm");
    s.ssm.n_lags = c.value("n_lags", s.ssm.n_lags);
    s.ssm.d_s = c.value("d_s", s.ssm.d_s);
    s.ssm.horizon = c.value("horizon", s.ssm.horizon);
    s.ssm.steps = c.value("steps", s.ssm.steps);
    s.ssm.batch = c.value("batch", s.ssm.batch);
    s.ssm.lr = c.value("lr", s.ssm.lr);
  }
  if (j.contains("rssm")) {
    const json& c = j.at("rssm");
    s.rssm.n_lags = c.value("n_lags", s.rssm.n_lags);
    s.rssm.d_s = c.value("d_s", s.rssm.d_s);
    s.rssm.d_h = c.value("d_h", s.rssm.d_h);
    s.rssm.horizon = c.value("horizon", s.rssm.horizon);
    s.rssm.steps = c.value("steps", s.rssm.steps);
    s.rssm.batch = c.value("batch", s.rssm.batch);
    s.rssm.lr = c.value("lr", s.rssm.lr);
  }
  if (j.contains("control")) {
    const json& c = j.at("control");
    s.event_from_hour = c.value("event_from_hour", s.event_from_hour);
    s.event_to_hour = c.value("event_to_hour", s.event_to_hour);
  }
  return s;
}

WeatherSeries load_weather(const std::string& out, const std::string& weather_flag) {
  const std::string path = weather_flag.empty() ? out + "/weather.csv" : weather_flag;
  if (!fs::exists(path))
    throw std::runtime_error(path + " not found; run gen-weather first or pass --weather");
  return read_weather_csv(path);
}

// "1h,2h,4h" in wall hours, or bare timestep counts
std::vector<int> parse_horizons(const std::string& text, int64_t step_seconds) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    int steps = 0;
    if (tok.back() == 'h') {
      double hours = std::stod(tok.substr(0, tok.size() - 1));
      steps = static_cast<int>(std::lround(hours * 3600.0 / static_cast<double>(step_seconds)));
    } else {
      steps = std::stoi(tok);
    }
    if (steps <= 0) throw std::runtime_error("bad horizon token '" + tok + "'");
    out.push_back(steps);
  }
  if (out.empty()) throw std::runtime_error("no horizons given");
  return out;
}

std::string seed_dir(const std::string& out, int k) {
  return out + "/models/seed" + std::to_string(k);
}

std::string zone_stem(const std::string& dir, int z) {
  char name[16];
  std::snprintf(name, sizeof name, "/zone%02d", z);
  return dir + name;
}

json timing_json(const json& summary, double total_admm_iters) {
  json t = summary.value("timing", json::object());
  json out;
  out["dpn_call"] = {{"mean_s", t.value("plan_mean_s", 0.0)},
                     {"std_s", t.value("plan_std_s", 0.0)},
                     {"n", t.value("n_episodes", 0)}};
  double plan_total = t.value("plan_mean_s", 0.0) * t.value("n_episodes", 0);
  out["coordinator_iter"] = {
      {"mean_s", total_admm_iters > 0 ? plan_total / total_admm_iters : 0.0},
      {"n", total_admm_iters}};
  out["lc_iter"] = {{"mean_s", t.value("lc_iter_mean_s", 0.0)},
                    {"std_s", t.value("lc_iter_std_s", 0.0)}};
  return out;
}

std::vector<double> vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// ---- subcommand bodies ----------------------------------------------------------

int cmd_gen_weather(const std::string& out, uint64_t seed) {
  ScenarioSpec spec = scenario_spec();
  WeatherSeries wx = scenario_weather(spec, seed);
  fs::create_directories(out);
  write_weather_csv(out + "/weather.csv", wx);
  std::printf("wrote %s (%d rows, %s .. %s)\n", (out + "/weather.csv").c_str(), wx.size(),
              iso8601(wx.at(0).timestamp).c_str(),
              iso8601(wx.at(wx.size() - 1).timestamp).c_str());
  manifest_add(out, "gen-weather", {{"seed", seed}}, {"weather.csv"});
  return 0;
}

int cmd_collect(const std::string& out, const std::string& weather_flag,
                const std::string& config_path, uint64_t seed) {
  json cfg = load_config(config_path);
  ScenarioSpec spec = spec_from_config(cfg);
  uint64_t building_seed = cfg.value("building_seed", 1);
  Building b = scenario_building(building_seed);
  WeatherSeries wx = load_weather(out, weather_flag);
  Dataset d = scenario_collect(spec, b, wx, seed);
  write_dataset(out + "/dataset", d);
  std::printf("collected %d rows x %d zones (power mean %.1f W, std %.1f W)\n", d.n_rows(),
              d.n_zones(), d.stats.power_mean, d.stats.power_std);
  manifest_add(out, "collect",
               {{"seed", seed}, {"building_seed", building_seed}, {"config", config_path}},
               {"dataset"});
  return 0;
}

int cmd_train(const std::string& out, const std::string& config_path, uint64_t seed, int n_seeds) {
  if (n_seeds < 1) throw std::runtime_error("--seeds must be at least 1");
  json cfg = load_config(config_path);
  ScenarioSpec spec = spec_from_config(cfg);
  Dataset d = read_dataset(out + "/dataset");
  DatasetSplit sp = scenario_split(spec, d);
  std::vector<std::string> artifacts;
  for (int k = 0; k < n_seeds; ++k) {
    uint64_t set_seed = mix_seed({seed, 0xA11CEu, static_cast<uint64_t>(k)});
    const std::string dir = seed_dir(out, k);
    fs::create_directories(dir);
    std::time_t t0 = std::time(nullptr);
    std::vector<Ssm> ssms = train_zone_ssms(sp.train, spec.ssm, set_seed, [&](int z) {
      std::fprintf(stderr, "seed %d ssm zone %d/%d\n", k, z + 1, sp.train.n_zones());
    });
    std::vector<Rssm> rssms = train_zone_rssms(sp.train, spec.rssm, set_seed, [&](int z) {
      std::fprintf(stderr, "seed %d rssm zone %d/%d\n", k, z + 1, sp.train.n_zones());
    });
    for (int z = 0; z < d.n_zones(); ++z) {
      spit(zone_stem(dir, z) + ".ssm.json", ssm_to_json(ssms[static_cast<size_t>(z)]));
      spit(zone_stem(dir, z) + ".rssm.json", rssm_to_json(rssms[static_cast<size_t>(z)]));
    }
    json info;
    info["base_seed"] = seed;
    info["set_seed"] = set_seed;
    info["train_rows"] = sp.train.n_rows();
    info["ssm"] = {{"n_lags", spec.ssm.n_lags}, {"d_s", spec.ssm.d_s},
                   {"horizon", spec.ssm.horizon}, {"steps", spec.ssm.steps},
                   {"batch", spec.ssm.batch}, {"lr", spec.ssm.lr}};
    info["rssm"] = {{"n_lags", spec.rssm.n_lags}, {"d_s", spec.rssm.d_s},
                    {"d_h", spec.rssm.d_h}, {"horizon", spec.rssm.horizon},
                    {"steps", spec.rssm.steps}, {"batch", spec.rssm.batch},
                    {"lr", spec.rssm.lr}};
    info["wall_s"] = static_cast<double>(std::time(nullptr) - t0);
    spit(dir + "/train.json", info.dump(2) + "\n");
    artifacts.push_back("models/seed" + std::to_string(k));
    std::printf("trained model set %d (%d zones) in %.0f s\n", k, d.n_zones(),
                info["wall_s"].get<double>());
  }
  manifest_add(out, "train",
               {{"seed", seed}, {"seeds", n_seeds}, {"config", config_path}}, artifacts);
  return 0;
}

int cmd_evaluate(const std::string& out, const std::string& config_path,
                 const std::string& horizons_flag) {
  json cfg = load_config(config_path);
  ScenarioSpec spec = spec_from_config(cfg);
  Dataset d = read_dataset(out + "/dataset");
  DatasetSplit sp = scenario_split(spec, d);
  std::vector<int> horizons = parse_horizons(horizons_flag, d.step_seconds);
  const int stride = cfg.contains("eval") ? cfg["eval"].value("stride", 8) : 8;
  const int n_samples = cfg.contains("eval") ? cfg["eval"].value("rssm_samples", 10) : 10;

  int n_sets = 0;
  while (fs::exists(seed_dir(out, n_sets))) ++n_sets;
  if (n_sets == 0) throw std::runtime_error("no model sets under " + out + "/models");

  const size_t nh = horizons.size();
  std::vector<std::vector<double>> ssm_mape(static_cast<size_t>(n_sets)),
      rssm_mape(static_cast<size_t>(n_sets));
  EvalReport ssm0, rssm0;
  std::vector<Ssm> ssms0;  // kept alive for the forecast chart
  std::vector<Rssm> rssms0;
  int n_origins = 0;

  for (int k = 0; k < n_sets; ++k) {
    const std::string dir = seed_dir(out, k);
    std::vector<Ssm> ssms;
    std::vector<Rssm> rssms;
    for (int z = 0; z < d.n_zones(); ++z) {
      ssms.push_back(ssm_from_json(slurp(zone_stem(dir, z) + ".ssm.json")));
      rssms.push_back(rssm_from_json(slurp(zone_stem(dir, z) + ".rssm.json")));
    }
    std::vector<ZoneForecaster> fs_s, fs_r;
    for (int z = 0; z < d.n_zones(); ++z) {
      fs_s.push_back(make_ssm_forecaster(ssms[static_cast<size_t>(z)]));
      fs_r.push_back(make_rssm_forecaster(rssms[static_cast<size_t>(z)], n_samples,
                                          mix_seed({0x5EEDu, static_cast<uint64_t>(k)})));
    }
    EvalReport rs = evaluate_model(make_dispatch_forecaster(fs_s), sp.test, horizons, stride);
    EvalReport rr = evaluate_model(make_dispatch_forecaster(fs_r), sp.test, horizons, stride);
    ssm_mape[static_cast<size_t>(k)] = rs.building_mape_pct;
    rssm_mape[static_cast<size_t>(k)] = rr.building_mape_pct;
    n_origins = rs.n_origins;
    if (k == 0) {
      ssm0 = rs;
      rssm0 = rr;
      ssms0 = std::move(ssms);
      rssms0 = std::move(rssms);
    }
    std::fprintf(stderr, "evaluated model set %d/%d\n", k + 1, n_sets);
  }

  auto agg = [&](const std::vector<std::vector<double>>& per_seed, size_t h) {
    double mn = per_seed[0][h], mx = per_seed[0][h], sum = 0;
    for (const auto& row : per_seed) {
      mn = std::min(mn, row[h]);
      mx = std::max(mx, row[h]);
      sum += row[h];
    }
    return std::array<double, 3>{sum / static_cast<double>(per_seed.size()), mn, mx};
  };

  json ej;
  ej["horizon_steps"] = horizons;
  ej["stride"] = stride;
  ej["rssm_samples"] = n_samples;
  ej["n_origins"] = n_origins;
  ej["n_model_sets"] = n_sets;
  ej["mape_guard_w"] = 100.0;
  for (const char* name : {"ssm", "rssm"}) {
    const auto& per_seed = std::string(name) == "ssm" ? ssm_mape : rssm_mape;
    const EvalReport& r0 = std::string(name) == "ssm" ? ssm0 : rssm0;
    json m;
    m["building_mape_pct"] = {{"per_seed", per_seed}};
    std::vector<double> mean, mn, mx;
    for (size_t h = 0; h < nh; ++h) {
      auto a = agg(per_seed, h);
      mean.push_back(a[0]);
      mn.push_back(a[1]);
      mx.push_back(a[2]);
    }
    m["building_mape_pct"]["mean"] = mean;
    m["building_mape_pct"]["min"] = mn;
    m["building_mape_pct"]["max"] = mx;
    std::vector<std::vector<double>> mae;
    for (int z = 0; z < d.n_zones(); ++z) {
      std::vector<double> row;
      for (size_t h = 0; h < nh; ++h)
        row.push_back(r0.zone_mae_w(z, static_cast<long>(h)));
      mae.push_back(row);
    }
    m["zone_mae_w_set0"] = mae;
    ej[name] = m;
  }
  spit(out + "/eval/eval.json", ej.dump(2) + "\n");

  std::string csv = "lead_steps,ssm_mape_mean,ssm_mape_min,ssm_mape_max,"
                    "rssm_mape_mean,rssm_mape_min,rssm_mape_max\n";
  char line[256];
  for (size_t h = 0; h < nh; ++h) {
    auto as = agg(ssm_mape, h);
    auto ar = agg(rssm_mape, h);
    std::snprintf(line, sizeof line, "%d,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", horizons[h], as[0],
                  as[1], as[2], ar[0], ar[1], ar[2]);
    csv += line;
  }
  spit(out + "/eval/eval.csv", csv);

  // one-lead forecast overlay on the first two test days
  {
    std::vector<ZoneForecaster> fs_s, fs_r;
    for (int z = 0; z < d.n_zones(); ++z) {
      fs_s.push_back(make_ssm_forecaster(ssms0[static_cast<size_t>(z)]));
      fs_r.push_back(make_rssm_forecaster(rssms0[static_cast<size_t>(z)], n_samples,
                                          mix_seed({0x5EEDu, 0u})));
    }
    ZoneForecaster fc_s = make_dispatch_forecaster(fs_s);
    ZoneForecaster fc_r = make_dispatch_forecaster(fs_r);
    const int lead = horizons.front();
    const int e0 = std::max(fc_s.min_context, fc_r.min_context);
    const int n_pts = std::min(192, sp.test.n_rows() - lead - e0);
    if (n_pts > 8) {
      LineSeries tru{"measured", {}}, ps{"ssm", {}}, pr{"rssm", {}};
      for (int i = 0; i < n_pts; ++i) {
        const int e = e0 + i;
        double t = 0, a = 0, b2 = 0;
        for (int z = 0; z < d.n_zones(); ++z) {
          t += sp.test.zones[static_cast<size_t>(z)].obs[static_cast<size_t>(e + lead)].hvac_w;
          a += fc_s.predict(sp.test, z, e, lead)(lead - 1);
          b2 += fc_r.predict(sp.test, z, e, lead)(lead - 1);
        }
        tru.ys.push_back(t);
        ps.ys.push_back(a);
        pr.ys.push_back(b2);
      }
      spit(out + "/eval/forecast.svg",
           svg_line_chart({tru, ps, pr}, "building power (W), " +
                                             std::to_string(lead) + "-step lead"));
    }
  }

  std::printf("lead  ssm mape (mean/min/max)   rssm mape (mean/min/max)\n");
  for (size_t h = 0; h < nh; ++h) {
    auto as = agg(ssm_mape, h);
    auto ar = agg(rssm_mape, h);
    std::printf("%4d  %6.2f %6.2f %6.2f       %6.2f %6.2f %6.2f\n", horizons[h], as[0], as[1],
                as[2], ar[0], ar[1], ar[2]);
  }
  manifest_add(out, "evaluate",
               {{"horizons", horizons_flag}, {"config", config_path}},
               {"eval/eval.json", "eval/eval.csv", "eval/forecast.svg"});
  return 0;
}

int cmd_control(const std::string& out, const std::string& weather_flag,
                const std::string& config_path, const std::string& planner_flag, double slack,
                bool slack_given, const std::string& transport_flag, uint64_t seed, int model_seed,
                int days, int start_day, std::string name) {
  json cfg = load_config(config_path);
  ScenarioSpec spec = spec_from_config(cfg);
  json ccfg = cfg.value("control", json::object());
  uint64_t building_seed = cfg.value("building_seed", 1);
  double depth = ccfg.value("depth", 0.75);
  int min_days = ccfg.value("min_days", 10);
  double setpoint = ccfg.value("baseline_setpoint_c", 21.0);

  PlannerKind kind;
  if (planner_flag == "ddpn") kind = PlannerKind::Ddpn;
  else if (planner_flag == "sdpn") kind = PlannerKind::Sdpn;
  else throw std::runtime_error("unknown planner '" + planner_flag + "'");
  TransportKind transport;
  if (transport_flag == "inproc") transport = TransportKind::InProcess;
  else if (transport_flag == "socket") transport = TransportKind::Socket;
  else throw std::runtime_error("unknown transport '" + transport_flag + "'");

  Building b = scenario_building(building_seed);
  WeatherSeries wx = load_weather(out, weather_flag);
  auto [r0, r1] = month_rows(wx, spec.test_month);

  std::fprintf(stderr, "baseline simulation over %s\n", spec.test_month.c_str());
  std::vector<double> baseline =
      baseline_building_power(b, wx, r0, r1, setpoint, spec.warmup_steps);
  auto windows = daily_windows(wx, r0, r1, spec.event_from_hour, spec.event_to_hour);
  CapCalibration cal = calibrate_cap(baseline, r0, windows, depth, min_days);
  // cap_w pins the cap (e.g. reuse a stock-window calibration while the
  // event hours are extended); calibration numbers stay in meta for context
  double cap_w = ccfg.value("cap_w", cal.p_max_w);
  std::vector<DrEvent> all_events = make_events(windows, cap_w);

  ControlConfig ctl = scenario_control_config(kind, slack, transport, seed);
  ctl.baseline_setpoint_c = setpoint;
  ctl.horizon = ccfg.value("horizon", ctl.horizon);
  ctl.replan_every = ccfg.value("replan_every", ctl.replan_every);
  ctl.max_admm_iter = ccfg.value("max_admm_iter", ctl.max_admm_iter);
  ctl.primal_tol = ccfg.value("primal_tol", ctl.primal_tol);
  ctl.timeout_s = ccfg.value("timeout_s", ctl.timeout_s);
  ctl.retrain_every = ccfg.value("retrain_every", ctl.retrain_every);
  ctl.retrain_steps = ccfg.value("retrain_steps", ctl.retrain_steps);
  if (cfg.contains("planner")) {
    json pj = json::parse(planner_config_to_json(ctl.plan));
    pj.update(cfg["planner"]);
    ctl.plan = planner_config_from_json(pj.dump());
    if (slack_given) ctl.plan.nu = slack;  // the flag wins over config
  }
  ctl.plan.horizon = ctl.horizon;

  const int64_t step_s = wx.at(1).timestamp - wx.at(0).timestamp;
  const int steps_per_day = static_cast<int>(86400 / step_s);
  const int start = r0 + steps_per_day * start_day;
  int n_steps = days > 0 ? std::min(steps_per_day * days, r1 - start) : r1 - start;
  if (n_steps <= 0) throw std::runtime_error("run window is empty; check --days/--start-day");
  std::vector<DrEvent> events;
  for (const DrEvent& e : all_events)
    if (e.start >= start && e.end <= start + n_steps) events.push_back(e);

  std::vector<Ssm> ssms;
  std::vector<Rssm> rssms;
  ControlModels models;
  const std::string mdir = seed_dir(out, model_seed);
  if (kind == PlannerKind::Ddpn) {
    for (int z = 0; z < b.topology.n_zones; ++z)
      ssms.push_back(ssm_from_json(slurp(zone_stem(mdir, z) + ".ssm.json")));
    models.ssms = &ssms;
  } else {
    for (int z = 0; z < b.topology.n_zones; ++z)
      rssms.push_back(rssm_from_json(slurp(zone_stem(mdir, z) + ".rssm.json")));
    models.rssms = &rssms;
  }
  if (ctl.retrain_every > 0) {  // retraining touches both model families
    if (ssms.empty())
      for (int z = 0; z < b.topology.n_zones; ++z)
        ssms.push_back(ssm_from_json(slurp(zone_stem(mdir, z) + ".ssm.json")));
    models.ssms = &ssms;
  }

  if (name.empty()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s-nu%02d-%s-seed%llu", planner_flag.c_str(),
                  static_cast<int>(std::lround(slack * 100)), transport_flag.c_str(),
                  static_cast<unsigned long long>(seed));
    name = buf;
    if (model_seed != 0) name += "-m" + std::to_string(model_seed);
    if (days > 0) name += "-d" + std::to_string(days);
    if (start_day > 0) name += "-s" + std::to_string(start_day);
  }

  std::fprintf(stderr, "control run %s: %d steps, %zu events, cap %.0f W\n", name.c_str(),
               n_steps, events.size(), cal.p_max_w);
  Simulator sim(b, static_cast<double>(step_s));
  std::time_t t0 = std::time(nullptr);
  RunLog log = control_loop(sim, wx, start, n_steps, events, ctl, models);
  double wall = static_cast<double>(std::time(nullptr) - t0);

  const std::string dir = out + "/runs/" + name;
  write_runlog(dir, log);
  json meta;
  meta["planner"] = planner_flag;
  meta["nu"] = ctl.plan.nu;
  meta["transport"] = transport_flag;
  meta["seed"] = seed;
  meta["model_seed"] = model_seed;
  meta["building_seed"] = building_seed;
  meta["cap_w"] = cap_w;
  meta["calibrated_cap_w"] = cal.p_max_w;
  meta["action_days"] = cal.action_days;
  meta["window_mean_w"] = cal.window_mean_w;
  meta["depth"] = depth;
  meta["min_days"] = min_days;
  meta["event_hours"] = {spec.event_from_hour, spec.event_to_hour};
  meta["start_row"] = start;
  meta["n_steps"] = n_steps;
  meta["horizon"] = ctl.horizon;
  meta["replan_every"] = ctl.replan_every;
  meta["baseline_setpoint_c"] = setpoint;
  meta["wall_s"] = wall;
  spit(dir + "/meta.json", meta.dump(2) + "\n");

  for (const EventViolation& v : violation_metrics(log))
    std::printf("event [%d,%d): actual %.1f%% predicted %.1f%%\n", v.start, v.end, v.actual_pct,
                v.predicted_pct);
  std::printf("run %s done in %.0f s (%d steps, %zu events)\n", name.c_str(), wall, n_steps,
              events.size());
  manifest_add(out, "control",
               {{"planner", planner_flag}, {"slack", ctl.plan.nu}, {"transport", transport_flag},
                {"seed", seed}, {"model_seed", model_seed}, {"days", days},
                {"start_day", start_day}, {"config", config_path}, {"name", name}},
               {"runs/" + name});
  return 0;
}

int cmd_report(const std::string& out) {
  const std::string runs_root = out + "/runs";
  std::vector<std::string> names;
  if (fs::exists(runs_root))
    for (const auto& entry : fs::directory_iterator(runs_root))
      if (entry.is_directory() && fs::exists(entry.path() / "run.csv"))
        names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty())
    throw std::runtime_error("no run logs under " + runs_root + "; run control first");

  json rj;
  rj["generated_at"] = iso8601(static_cast<int64_t>(std::time(nullptr)));
  std::string csv = "run,event,start,end,n_steps,actual_pct,predicted_pct\n";
  std::vector<SlackSeries> slack;
  std::vector<std::string> artifacts = {"report/report.json", "report/report.csv"};

  for (const std::string& name : names) {
    const std::string dir = runs_root + "/" + name;
    RunLog log = read_runlog(dir);
    json summary = json::parse(slurp(dir + "/summary.json"));
    std::vector<EventViolation> evs = violation_metrics(log);
    DeltaBuckets db = delta_distribution(log);

    double total_iters = 0;
    bool any_residuals = false;
    for (const EpisodeRecord& e : log.episodes) {
      total_iters += e.admm_iters;
      any_residuals = any_residuals || !e.primal_residuals.empty();
    }

    json r;
    json evj = json::array();
    for (size_t i = 0; i < evs.size(); ++i) {
      const EventViolation& v = evs[i];
      evj.push_back({{"start", v.start}, {"end", v.end}, {"n_steps", v.n_steps},
                     {"actual_pct", v.actual_pct}, {"predicted_pct", v.predicted_pct}});
      char line[160];
      std::snprintf(line, sizeof line, "%s,%zu,%d,%d,%d,%.4f,%.4f\n", name.c_str(), i, v.start,
                    v.end, v.n_steps, v.actual_pct, v.predicted_pct);
      csv += line;
    }
    r["events"] = evj;
    r["delta"] = {{"zero_pct", vec(db.zero_pct)}, {"small_pct", vec(db.small_pct)},
                  {"large_pct", vec(db.large_pct)}, {"mean_abs_c", vec(db.mean_abs_c)},
                  {"mean_c", vec(db.mean_c)}};
    r["summary"] = summary;
    r["timing"] = timing_json(summary, total_iters);
    if (fs::exists(dir + "/meta.json")) r["meta"] = json::parse(slurp(dir + "/meta.json"));
    rj["runs"][name] = r;

    spit(out + "/report/power_" + name + ".svg", svg_power_timeline(log));
    artifacts.push_back("report/power_" + name + ".svg");
    if (any_residuals) {
      spit(out + "/report/residuals_" + name + ".svg", svg_residual_curves(log));
      artifacts.push_back("report/residuals_" + name + ".svg");
    }
    if (!evs.empty()) slack.push_back({name, evs});
  }

  // violation bars across runs; only series with matching event counts can share a chart
  if (slack.size() >= 2) {
    size_t n_events = slack.front().events.size();
    std::vector<SlackSeries> same;
    for (const auto& s : slack)
      if (s.events.size() == n_events) same.push_back(s);
    if (same.size() >= 2) {
      spit(out + "/report/slack_comparison.svg", svg_slack_comparison(same));
      artifacts.push_back("report/slack_comparison.svg");
    }
  }

  if (fs::exists(out + "/eval/eval.json"))
    rj["eval"] = json::parse(slurp(out + "/eval/eval.json"));

  spit(out + "/report/report.json", rj.dump(2) + "\n");
  spit(out + "/report/report.csv", csv);
  std::printf("report over %zu runs -> %s/report\n", names.size(), out.c_str());
  manifest_add(out, "report", json::object(), artifacts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-zone demand-response planning testbed"};
  app.require_subcommand(1);

  std::string out = "work";
  std::string config_path, weather_flag, name;
  std::string planner_flag = "ddpn", transport_flag = "inproc", horizons_flag = "1h,2h,4h";
  uint64_t seed = 1;
  double slack = 0.0;
  int n_seeds = 1, model_seed = 0, days = 0, start_day = 0;

  CLI::App* gw = app.add_subcommand("gen-weather", "synthesize the winter weather series");
  gw->add_option("--out", out, "artifact directory");
  gw->add_option("--seed", seed, "weather seed");

  CLI::App* co = app.add_subcommand("collect", "run excitation and dump the dataset");
  co->add_option("--out", out, "artifact directory");
  co->add_option("--weather", weather_flag, "weather csv (default <out>/weather.csv)");
  co->add_option("--config", config_path, "json config overrides");
  co->add_option("--seed", seed, "excitation seed");

  CLI::App* tr = app.add_subcommand("train", "fit per-zone models on the train months");
  tr->add_option("--out", out, "artifact directory");
  tr->add_option("--config", config_path, "json config overrides");
  tr->add_option("--seed", seed, "training seed");
  tr->add_option("--seeds", n_seeds, "number of independent model sets");

  CLI::App* ev = app.add_subcommand("evaluate", "rolling-origin forecast accuracy tables");
  ev->add_option("--out", out, "artifact directory");
  ev->add_option("--config", config_path, "json config overrides");
  ev->add_option("--horizons", horizons_flag, "comma list, hours like 1h,2h,4h or step counts");

  CLI::App* ct = app.add_subcommand("control", "receding-horizon DR run over the test month");
  ct->add_option("--out", out, "artifact directory");
  ct->add_option("--weather", weather_flag, "weather csv (default <out>/weather.csv)");
  ct->add_option("--config", config_path, "json config overrides");
  ct->add_option("--planner", planner_flag, "ddpn|sdpn")->check(CLI::IsMember({"ddpn", "sdpn"}));
  CLI::Option* slack_opt = ct->add_option("--slack", slack, "constraint slack nu in [0,1)");
  ct->add_option("--transport", transport_flag, "inproc|socket")
      ->check(CLI::IsMember({"inproc", "socket"}));
  ct->add_option("--seed", seed, "run seed (consensus sampling)");
  ct->add_option("--model-seed", model_seed, "which trained model set to load");
  ct->add_option("--days", days, "limit the run to this many days (0 = full month)");
  ct->add_option("--start-day", start_day, "first test-month day of the run");
  ct->add_option("--name", name, "run directory name (default derived from flags)");

  CLI::App* rp = app.add_subcommand("report", "aggregate run logs into tables and charts");
  rp->add_option("--out", out, "artifact directory");

  try {
    app.parse(argc, argv);
    if (gw->parsed()) return cmd_gen_weather(out, seed);
    if (co->parsed()) return cmd_collect(out, weather_flag, config_path, seed);
    if (tr->parsed()) return cmd_train(out, config_path, seed, n_seeds);
    if (ev->parsed()) return cmd_evaluate(out, config_path, horizons_flag);
    if (ct->parsed())
      return cmd_control(out, weather_flag, config_path, planner_flag, slack,
                         slack_opt->count() > 0, transport_flag, seed, model_seed, days,
                         start_day, name);
    if (rp->parsed()) return cmd_report(out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
