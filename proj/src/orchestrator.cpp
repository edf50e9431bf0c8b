#include "dpn/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dpn/admm.hpp"
#include "dpn/metrics.hpp"
#include "dpn/rng.hpp"
#include "dpn/transport.hpp"

namespace dpn {

using nlohmann::json;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd to_eig(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

struct LcEpisodeInput {
  int zone = 0;
  std::vector<Observation> obs;        // n_lags frames, oldest first
  std::vector<Action> acts;            // aligned; last entry unused by the filter
  std::vector<Disturbance> hist_dist;  // aligned with obs
  std::vector<Disturbance> plan_dist;  // H rows
  std::vector<double> base_sp;         // H
  PlannerConfig pcfg;
  uint64_t bank_seed = 0;
};

struct LcShared {
  double solve_seconds = 0;
  int solve_count = 0;
  std::string error;
};

// One zone worker for one planning episode: build the local state once, then
// answer power targets until the coordinator closes the episode.
void lc_worker(Channel* ch, const Ssm* ssm, const Rssm* rssm, PlannerKind kind, LcEpisodeInput in,
               LcShared* out) {
  try {
    Eigen::VectorXd s0;
    TrajectoryBank bank;
    const NormStats* stats = nullptr;
    Eigen::VectorXd warm;
    bool have_warm = false;
    if (kind == PlannerKind::Ddpn) {
      s0 = ssm_encode(*ssm, in.obs, in.hist_dist);
      stats = &ssm->stats;
    } else {
      RssmState st = rssm_filter(*rssm, in.obs, in.acts, in.hist_dist);
      Rng rng(in.bank_seed);
      bank = sdpn_build_bank(*rssm, st, in.plan_dist, in.base_sp, in.pcfg, &rng);
      stats = &rssm->stats;
    }
    for (;;) {
      Message m = ch->recv();
      if (m.type != MsgType::PowerTarget) return;  // Converged or Abort ends the episode
      double t0 = now_s();
      PlanOutcome p;
      if (kind == PlannerKind::Ddpn) {
        p = ddpn_solve(*ssm, s0, to_eig(m.u_bar), to_eig(m.lambda), in.pcfg, in.plan_dist,
                       in.base_sp, have_warm ? &warm : nullptr);
        warm = p.delta_c;
        have_warm = true;
      } else {
        p = sdpn_select(bank, to_eig(m.u_bar), to_eig(m.lambda), in.pcfg, *stats);
      }
      out->solve_seconds += now_s() - t0;
      ++out->solve_count;
      ch->send(Message::power_reply(in.zone, m.iter, to_std(p.u_pred_n), to_std(p.delta_c)));
    }
  } catch (const std::exception& e) {
    out->error = e.what();
    try {
      ch->send(Message::abort_with(e.what()));
    } catch (...) {
    }
  }
}

// What governs the steps until the next replan.
struct EpisodePlan {
  ConversionTag tag = ConversionTag::NoAction;
  Eigen::VectorXd delta_first;  // per zone
  Eigen::VectorXd pred_w;       // building prediction per horizon offset; empty when none
  int admm_iters = 0;
  bool converged = true;
  std::vector<double> residuals;
  double lc_seconds = 0;
  int lc_count = 0;
};

}  // namespace

RunLog control_loop(Simulator& sim, const WeatherSeries& wx, int start_row, int n_steps,
                    const std::vector<DrEvent>& events, const ControlConfig& cfg,
                    const ControlModels& models) {
  const int N = sim.n_zones();
  const int H = cfg.horizon;
  const bool ddpn = cfg.planner == PlannerKind::Ddpn;

  if (cfg.replan_every < 1 || H < cfg.replan_every)
    throw std::invalid_argument("horizon must cover the replan interval");
  if (ddpn) {
    if (!models.ssms || static_cast<int>(models.ssms->size()) != N)
      throw std::invalid_argument("DDPN needs one SSM per zone");
  } else {
    if (!models.rssms || static_cast<int>(models.rssms->size()) != N)
      throw std::invalid_argument("SDPN needs one RSSM per zone");
  }
  const int lags = ddpn ? (*models.ssms)[0].cfg.n_lags : (*models.rssms)[0].cfg.n_lags;
  if (ddpn) {
    for (const Ssm& m : *models.ssms)
      if (m.cfg.n_lags != lags) throw std::invalid_argument("zone models disagree on n_lags");
  } else {
    for (const Rssm& m : *models.rssms)
      if (m.cfg.n_lags != lags) throw std::invalid_argument("zone models disagree on n_lags");
  }
  if (start_row < lags + 1) throw std::invalid_argument("start_row leaves no room for history");
  if (start_row + n_steps + H > wx.size())
    throw std::invalid_argument("weather series too short for the run");
  for (const DrEvent& ev : events) {
    if (ev.start >= ev.end || ev.end > wx.size())
      throw std::invalid_argument("event window out of range");
    if (ev.p_max_w.size() != ev.end - ev.start)
      throw std::invalid_argument("event cap length mismatch");
  }

  const NormStats& stats = ddpn ? (*models.ssms)[0].stats : (*models.rssms)[0].stats;

  // rolling observation history in dataset row convention
  Dataset hist;
  hist.step_seconds = wx.step_seconds;
  hist.zones.resize(static_cast<size_t>(N));
  hist.stats = stats;
  const int hist_base = start_row - lags;  // weather row of the first recorded entry

  const int r0 = start_row - lags - 1;
  sim.set_time(wx.at(r0).timestamp);

  auto apply_step = [&](int row, const std::vector<double>& setp) {
    if (!hist.timestamps.empty())
      for (int z = 0; z < N; ++z)
        hist.zones[static_cast<size_t>(z)].act.back() = Action{setp[static_cast<size_t>(z)]};
    sim.step(setp, wx.at(row));
    hist.timestamps.push_back(wx.at(row + 1).timestamp);
    hist.disturbances.push_back(Disturbance::from(wx.at(row + 1)));
    for (int z = 0; z < N; ++z) {
      hist.zones[static_cast<size_t>(z)].obs.push_back(
          Observation{sim.state().temps_c[static_cast<size_t>(z)],
                      sim.state().heater_powers_w[static_cast<size_t>(z)]});
      hist.zones[static_cast<size_t>(z)].act.push_back(Action{cfg.baseline_setpoint_c});
    }
  };

  std::vector<double> baseline_sp(static_cast<size_t>(N), cfg.baseline_setpoint_c);
  for (int r = r0; r < start_row; ++r) apply_step(r, baseline_sp);

  auto cap_at = [&](int row) {
    double cap = std::numeric_limits<double>::infinity();
    for (const DrEvent& ev : events)
      if (row >= ev.start && row < ev.end) cap = std::min(cap, ev.p_max_w[row - ev.start]);
    return cap;
  };

  PlannerConfig pcfg = cfg.plan;
  pcfg.horizon = H;

  RunLog log;
  log.n_zones = N;
  log.step_seconds = wx.step_seconds;
  log.events = events;

  // plans one episode at row e and returns what governs the next steps
  auto plan_episode = [&](int e, EpisodeRecord* rec) {
    EpisodePlan ep;
    ep.delta_first = Eigen::VectorXd::Zero(N);
    rec->row = e;

    Eigen::VectorXd p_max(H);
    bool any_finite = false;
    for (int k = 0; k < H; ++k) {
      p_max[k] = cap_at(e + k);
      any_finite = any_finite || std::isfinite(p_max[k]);
    }
    if (!any_finite) return ep;  // quiet step: no model work at all

    double t0 = now_s();

    // windows ending at the present row
    const int ih = e - hist_base;
    std::vector<Disturbance> wdist(hist.disturbances.begin() + (ih - lags + 1),
                                   hist.disturbances.begin() + (ih + 1));
    std::vector<Disturbance> plan_dist;
    plan_dist.reserve(static_cast<size_t>(H));
    for (int k = 0; k < H; ++k) plan_dist.push_back(Disturbance::from(wx.at(e + k)));
    std::vector<double> base_sp(static_cast<size_t>(H), cfg.baseline_setpoint_c);

    std::vector<std::vector<Observation>> wobs(static_cast<size_t>(N));
    std::vector<std::vector<Action>> wact(static_cast<size_t>(N));
    for (int z = 0; z < N; ++z) {
      const ZoneSeries& zs = hist.zones[static_cast<size_t>(z)];
      wobs[static_cast<size_t>(z)].assign(zs.obs.begin() + (ih - lags + 1),
                                          zs.obs.begin() + (ih + 1));
      wact[static_cast<size_t>(z)].assign(zs.act.begin() + (ih - lags + 1),
                                          zs.act.begin() + (ih + 1));
    }

    // conversion probes: business-as-usual and deepest-cut projections
    std::vector<Eigen::VectorXd> s0(static_cast<size_t>(N));
    std::vector<RssmState> st(static_cast<size_t>(N));
    std::vector<ZoneRollout> zones(static_cast<size_t>(N));
    for (int z = 0; z < N; ++z) {
      if (ddpn) {
        const Ssm& m = (*models.ssms)[static_cast<size_t>(z)];
        s0[static_cast<size_t>(z)] = ssm_encode(m, wobs[static_cast<size_t>(z)], wdist);
        zones[static_cast<size_t>(z)].power_w = [&, z](double delta) {
          std::vector<double> spv(static_cast<size_t>(H), cfg.baseline_setpoint_c + delta);
          SsmPrediction p = ssm_rollout((*models.ssms)[static_cast<size_t>(z)],
                                        s0[static_cast<size_t>(z)], spv, plan_dist);
          return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p.power_w.data(), H));
        };
      } else {
        const Rssm& m = (*models.rssms)[static_cast<size_t>(z)];
        st[static_cast<size_t>(z)] = rssm_filter(m, wobs[static_cast<size_t>(z)],
                                                 wact[static_cast<size_t>(z)], wdist);
        zones[static_cast<size_t>(z)].power_w = [&, z](double delta) {
          std::vector<double> spv(static_cast<size_t>(H), cfg.baseline_setpoint_c + delta);
          // worst case over k samples, per timestep; the substream is keyed by
          // (zone, row) so both probes of one episode share their noise
          Rng rng = substream(cfg.seed, 0xC0DE, static_cast<uint64_t>(z),
                              static_cast<uint64_t>(e));
          RssmSamples sm = rssm_rollout_samples((*models.rssms)[static_cast<size_t>(z)],
                                                st[static_cast<size_t>(z)], spv, plan_dist,
                                                pcfg.k_samples, &rng);
          return Eigen::VectorXd(sm.power_w.colwise().maxCoeff().transpose());
        };
      }
    }
    std::vector<ComfortBounds> bounds(static_cast<size_t>(N), pcfg.bounds);
    ConversionOutcome conv = convert_constraint(zones, p_max, pcfg.nu, bounds);
    ep.tag = conv.tag;
    rec->tag = conv.tag;

    if (conv.tag == ConversionTag::NoAction) {
      ep.pred_w = conv.p_bu_w;
    } else if (conv.tag == ConversionTag::Saturate) {
      ep.pred_w = conv.p_lb_w;
      ep.delta_first = Eigen::VectorXd::Constant(N, pcfg.bounds.m);
    } else {
      // consensus episode over the transport
      Eigen::VectorXd p_tot_n(H);
      for (int k = 0; k < H; ++k)
        p_tot_n[k] = (conv.p_tot_w[k] - N * stats.power_mean) / stats.power_std;

      SharingSpec spec;
      spec.n_blocks = N;
      spec.block_len = H;
      spec.g = [](int, const Eigen::VectorXd&, Eigen::VectorXd*) { return 0.0; };
      spec.mu_g = 0;
      spec.p_tot = p_tot_n;
      spec.rho = pcfg.rho;

      AdmmState init;
      init.x = Mat::Zero(N, H);
      for (int k = 0; k < H; ++k) init.x.col(k).setConstant(p_tot_n[k] / N);
      init.x_bar = init.x;
      init.lambda = Mat::Zero(N, H);

      TransportPair tp = cfg.transport == TransportKind::Socket
                             ? make_socket_transport(N, H, cfg.timeout_s)
                             : make_inproc_transport(N, cfg.timeout_s);
      std::vector<LcShared> shared(static_cast<size_t>(N));
      std::vector<std::thread> workers;
      workers.reserve(static_cast<size_t>(N));
      for (int z = 0; z < N; ++z) {
        LcEpisodeInput in;
        in.zone = z;
        in.obs = wobs[static_cast<size_t>(z)];
        in.acts = wact[static_cast<size_t>(z)];
        in.hist_dist = wdist;
        in.plan_dist = plan_dist;
        in.base_sp = base_sp;
        in.pcfg = pcfg;
        in.bank_seed = mix_seed({cfg.seed, 0xBA2C, static_cast<uint64_t>(z),
                                 static_cast<uint64_t>(e)});
        workers.emplace_back(lc_worker, tp.zones[static_cast<size_t>(z)].get(),
                             ddpn ? &(*models.ssms)[static_cast<size_t>(z)] : nullptr,
                             ddpn ? nullptr : &(*models.rssms)[static_cast<size_t>(z)],
                             cfg.planner, std::move(in), &shared[static_cast<size_t>(z)]);
      }
      auto join_all = [&] {
        for (std::thread& w : workers)
          if (w.joinable()) w.join();
      };

      Mat last_delta = Mat::Zero(N, H);
      int send_iter = 0;
      BatchLcSolver solver = [&](const Mat& x_bar, const Mat& lam, double) -> Mat {
        ++send_iter;
        for (int z = 0; z < N; ++z)
          tp.hub->send_to(z, Message::power_target(z, send_iter, to_std(x_bar.row(z)),
                                                   to_std(lam.row(z))));
        Mat X(N, H);
        for (int z = 0; z < N; ++z) {
          Message r = tp.hub->recv_from(z);
          if (r.type == MsgType::Abort)
            throw std::runtime_error("zone " + std::to_string(z) + " aborted: " + r.reason);
          if (r.type != MsgType::PowerReply || r.zone != z || r.iter != send_iter ||
              static_cast<int>(r.u_pred.size()) != H || static_cast<int>(r.delta.size()) != H)
            throw std::runtime_error("unexpected reply from zone " + std::to_string(z));
          for (double v : r.u_pred)
            if (!std::isfinite(v))
              throw std::runtime_error("non-finite plan from zone " + std::to_string(z));
          for (double v : r.delta)
            if (!std::isfinite(v))
              throw std::runtime_error("non-finite plan from zone " + std::to_string(z));
          X.row(z) = to_eig(r.u_pred).transpose();
          last_delta.row(z) = to_eig(r.delta).transpose();
        }
        return X;
      };

      AdmmStop stop;
      stop.max_iter = cfg.max_admm_iter;
      stop.primal_tol = cfg.primal_tol;
      AdmmState fin;
      try {
        fin = run_admm(spec, solver, init, stop);
      } catch (...) {
        for (int z = 0; z < N; ++z) {
          try {
            tp.hub->send_to(z, Message::abort_with("coordinator failure"));
          } catch (...) {
          }
        }
        join_all();
        throw;
      }
      for (int z = 0; z < N; ++z) tp.hub->send_to(z, Message::converged(fin.iter));
      join_all();
      for (int z = 0; z < N; ++z)
        if (!shared[static_cast<size_t>(z)].error.empty())
          throw std::runtime_error("zone " + std::to_string(z) +
                                   " failed: " + shared[static_cast<size_t>(z)].error);

      ep.delta_first = last_delta.col(0);
      ep.admm_iters = fin.iter;
      ep.converged = !fin.history.empty() && fin.history.back().primal_residual <= cfg.primal_tol;
      for (const AdmmIterRecord& it : fin.history) ep.residuals.push_back(it.primal_residual);
      ep.pred_w = Eigen::VectorXd::Zero(H);
      for (int k = 0; k < H; ++k) {
        double tot = 0;
        for (int z = 0; z < N; ++z) tot += std::max(0.0, stats.denorm_power(fin.x(z, k)));
        ep.pred_w[k] = tot;
      }
      for (const LcShared& sh : shared) {
        ep.lc_seconds += sh.solve_seconds;
        ep.lc_count += sh.solve_count;
      }
    }

    rec->admm_iters = ep.admm_iters;
    rec->converged = ep.converged;
    rec->primal_residuals = ep.residuals;
    rec->plan_seconds = now_s() - t0;
    rec->lc_solve_seconds = ep.lc_seconds;
    rec->lc_solve_count = ep.lc_count;
    return ep;
  };

  EpisodePlan cur;
  cur.delta_first = Eigen::VectorXd::Zero(N);

  for (int tau = 0; tau < n_steps; ++tau) {
    const int e = start_row + tau;
    if (tau % cfg.replan_every == 0) {
      if (cfg.retrain_every > 0 && tau > 0 && tau % cfg.retrain_every == 0)
        retrain_models(models.ssms, models.rssms, hist, cfg.retrain_steps,
                       mix_seed({cfg.seed, 0x7e7a, static_cast<uint64_t>(tau)}));
      EpisodeRecord rec;
      cur = plan_episode(e, &rec);
      log.episodes.push_back(std::move(rec));
    }
    const int k = tau % cfg.replan_every;

    std::vector<double> setp(static_cast<size_t>(N));
    for (int z = 0; z < N; ++z)
      setp[static_cast<size_t>(z)] = cfg.baseline_setpoint_c + cur.delta_first[z];
    apply_step(e, setp);

    StepRecord sr;
    sr.row = e;
    sr.t = wx.at(e).timestamp;
    double tot = 0;
    for (double p : sim.state().heater_powers_w) tot += p;
    sr.true_power_w = tot;
    sr.pred_power_w = cur.pred_w.size() > k ? cur.pred_w[k]
                                            : std::numeric_limits<double>::quiet_NaN();
    sr.p_max_w = cap_at(e);
    sr.conversion = static_cast<int>(cur.tag);
    sr.admm_iters = cur.admm_iters;
    sr.admm_converged = cur.converged;
    sr.delta_c = cur.delta_first;
    log.steps.push_back(std::move(sr));
  }
  return log;
}

void retrain_models(std::vector<Ssm>* ssms, std::vector<Rssm>* rssms, const Dataset& rolling,
                    int steps, uint64_t seed) {
  if (steps <= 0) return;
  if (ssms) {
    for (size_t z = 0; z < ssms->size(); ++z) {
      Ssm& m = (*ssms)[z];
      if (rolling.n_rows() <= m.cfg.n_lags + m.cfg.horizon + 1) continue;
      ZoneView v = make_zone_view(rolling, static_cast<int>(z));
      SsmConfig saved = m.cfg;
      m.cfg.steps = steps;
      m.cfg.seed = mix_seed({seed, 0x55, static_cast<uint64_t>(z)});
      train_ssm(&m, v);
      m.cfg = saved;
    }
  }
  if (rssms) {
    for (size_t z = 0; z < rssms->size(); ++z) {
      Rssm& m = (*rssms)[z];
      if (rolling.n_rows() <= m.cfg.n_lags + m.cfg.horizon + 1) continue;
      ZoneView v = make_zone_view(rolling, static_cast<int>(z));
      RssmConfig saved = m.cfg;
      m.cfg.steps = steps;
      m.cfg.seed = mix_seed({seed, 0x88, static_cast<uint64_t>(z)});
      train_rssm(&m, v);
      m.cfg = saved;
    }
  }
}

// ---- serialization ------------------------------------------------------------

std::string runlog_csv(const RunLog& log) {
  std::string out = "row,t,true_power_w,pred_power_w,p_max_w,conversion,admm_iters,admm_converged";
  for (int z = 0; z < log.n_zones; ++z) out += ",delta_z" + std::to_string(z);
  out += "\n";
  char buf[192];
  for (const StepRecord& s : log.steps) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g,%d,%d,%d", s.row,
                  static_cast<long long>(s.t), s.true_power_w, s.pred_power_w, s.p_max_w,
                  s.conversion, s.admm_iters, s.admm_converged ? 1 : 0);
    out += buf;
    for (int z = 0; z < log.n_zones; ++z) {
      std::snprintf(buf, sizeof buf, ",%.17g", s.delta_c[z]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string episodes_csv(const RunLog& log) {
  std::string out = "row,iter,primal_residual\n";
  char buf[96];
  for (const EpisodeRecord& e : log.episodes)
    for (size_t i = 0; i < e.primal_residuals.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", e.row, static_cast<int>(i + 1),
                    e.primal_residuals[i]);
      out += buf;
    }
  return out;
}

std::string runlog_summary_json(const RunLog& log) {
  json j;
  int tot = 0, bad = 0, bad_pred = 0;
  for (const StepRecord& s : log.steps) {
    if (!std::isfinite(s.p_max_w)) continue;
    ++tot;
    if (s.true_power_w > s.p_max_w) ++bad;
    if (!(s.pred_power_w <= s.p_max_w)) ++bad_pred;
  }
  j["violation_pct"] = tot ? 100.0 * bad / tot : 0.0;
  j["predicted_violation_pct"] = tot ? 100.0 * bad_pred / tot : 0.0;

  json evs = json::array();
  for (const EventViolation& v : violation_metrics(log)) {
    json e;
    e["start"] = v.start;
    e["end"] = v.end;
    e["actual_pct"] = v.actual_pct;
    e["predicted_pct"] = v.predicted_pct;
    evs.push_back(e);
  }
  j["events"] = evs;

  DeltaBuckets db = delta_distribution(log);
  j["mean_delta_per_zone"] = std::vector<double>(db.mean_c.data(), db.mean_c.data() + log.n_zones);
  j["mean_abs_delta_per_zone"] =
      std::vector<double>(db.mean_abs_c.data(), db.mean_abs_c.data() + log.n_zones);

  TimingStats pt = plan_timing(log);
  TimingStats lt = lc_iter_timing(log);
  j["timing"] = {{"plan_mean_s", pt.mean_s},
                 {"plan_std_s", pt.std_s},
                 {"n_episodes", pt.n},
                 {"lc_iter_mean_s", lt.mean_s},
                 {"lc_iter_std_s", lt.std_s}};
  return j.dump(2) + "\n";
}

void write_runlog(const std::string& dir, const RunLog& log) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir + "/run.csv") << runlog_csv(log);
  std::ofstream(dir + "/episodes.csv") << episodes_csv(log);
  std::ofstream(dir + "/summary.json") << runlog_summary_json(log);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t p = 0;
  while (true) {
    size_t c = line.find(',', p);
    if (c == std::string::npos) {
      out.push_back(line.substr(p));
      break;
    }
    out.push_back(line.substr(p, c - p));
    p = c + 1;
  }
  return out;
}

}  // namespace

RunLog read_runlog(const std::string& dir) {
  std::ifstream run(dir + "/run.csv");
  if (!run) throw std::runtime_error("cannot open " + dir + "/run.csv");
  RunLog log;
  std::string line;
  if (!std::getline(run, line)) throw std::runtime_error(dir + "/run.csv is empty");
  auto header = split_csv_line(line);
  int fixed = 8;
  log.n_zones = static_cast<int>(header.size()) - fixed;
  if (log.n_zones < 1 || header[0] != "row")
    throw std::runtime_error(dir + "/run.csv has an unexpected header");
  while (std::getline(run, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (static_cast<int>(f.size()) != fixed + log.n_zones)
      throw std::runtime_error(dir + "/run.csv row width mismatch");
    StepRecord s;
    s.row = std::stoi(f[0]);
    s.t = std::stoll(f[1]);
    s.true_power_w = std::strtod(f[2].c_str(), nullptr);
    s.pred_power_w = std::strtod(f[3].c_str(), nullptr);
    s.p_max_w = std::strtod(f[4].c_str(), nullptr);
    s.conversion = std::stoi(f[5]);
    s.admm_iters = std::stoi(f[6]);
    s.admm_converged = f[7] == "1";
    s.delta_c.resize(log.n_zones);
    for (int z = 0; z < log.n_zones; ++z)
      s.delta_c[z] = std::strtod(f[static_cast<size_t>(fixed + z)].c_str(), nullptr);
    log.steps.push_back(std::move(s));
  }
  if (log.steps.size() >= 2) log.step_seconds = log.steps[1].t - log.steps[0].t;

  // capped row ranges back to events
  size_t i = 0;
  while (i < log.steps.size()) {
    if (!std::isfinite(log.steps[i].p_max_w)) {
      ++i;
      continue;
    }
    size_t j = i;
    DrEvent ev;
    ev.start = log.steps[i].row;
    std::vector<double> caps;
    while (j < log.steps.size() && std::isfinite(log.steps[j].p_max_w) &&
           log.steps[j].row == ev.start + static_cast<int>(j - i)) {
      caps.push_back(log.steps[j].p_max_w);
      ++j;
    }
    ev.end = ev.start + static_cast<int>(caps.size());
    ev.p_max_w = Eigen::Map<Eigen::VectorXd>(caps.data(), static_cast<long>(caps.size()));
    log.events.push_back(std::move(ev));
    i = j;
  }

  std::ifstream eps(dir + "/episodes.csv");
  if (!eps) throw std::runtime_error("cannot open " + dir + "/episodes.csv");
  std::getline(eps, line);  // header
  EpisodeRecord cur;
  bool have = false;
  while (std::getline(eps, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 3) throw std::runtime_error(dir + "/episodes.csv row width mismatch");
    int row = std::stoi(f[0]);
    if (!have || row != cur.row) {
      if (have) {
        cur.admm_iters = static_cast<int>(cur.primal_residuals.size());
        log.episodes.push_back(cur);
      }
      cur = EpisodeRecord{};
      cur.row = row;
      cur.tag = ConversionTag::RunAdmm;
      have = true;
    }
    cur.primal_residuals.push_back(std::strtod(f[2].c_str(), nullptr));
  }
  if (have) {
    cur.admm_iters = static_cast<int>(cur.primal_residuals.size());
    log.episodes.push_back(cur);
  }
  return log;
}

}  // namespace dpn
