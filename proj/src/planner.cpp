#include "dpn/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace dpn {

int ComfortBounds::n_levels() const {
  if (resolution <= 0) throw std::invalid_argument("lattice resolution must be positive");
  if (M < m) throw std::invalid_argument("comfort bounds need m <= M");
  double r = (M - m) / resolution;
  double n = std::round(r);
  if (std::abs(r - n) > 1e-9) throw std::invalid_argument("bounds span must be a lattice multiple");
  return static_cast<int>(n) + 1;
}

double ComfortBounds::snap(double delta) const {
  int n = n_levels();
  int k = static_cast<int>(std::lround((delta - m) / resolution));
  k = std::clamp(k, 0, n - 1);
  return level(k);
}

PlannerConfig planner_config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PlannerConfig c;
  c.rho = j.value("rho", c.rho);
  c.nu = j.value("nu", c.nu);
  if (j.contains("bounds")) {
    c.bounds.m = j["bounds"].value("m", c.bounds.m);
    c.bounds.M = j["bounds"].value("M", c.bounds.M);
    c.bounds.resolution = j["bounds"].value("resolution", c.bounds.resolution);
  }
  c.horizon = j.value("horizon", c.horizon);
  c.block = j.value("block", c.block);
  c.k_samples = j.value("k_samples", c.k_samples);
  c.max_gd_iters = j.value("max_gd_iters", c.max_gd_iters);
  c.candidate_cap = j.value("candidate_cap", c.candidate_cap);
  c.bounds.n_levels();  // validate
  return c;
}

std::string planner_config_to_json(const PlannerConfig& c) {
  nlohmann::json j;
  j["rho"] = c.rho;
  j["nu"] = c.nu;
  j["bounds"] = {{"m", c.bounds.m}, {"M", c.bounds.M}, {"resolution", c.bounds.resolution}};
  j["horizon"] = c.horizon;
  j["block"] = c.block;
  j["k_samples"] = c.k_samples;
  j["max_gd_iters"] = c.max_gd_iters;
  j["candidate_cap"] = c.candidate_cap;
  return j.dump(2);
}

// ---- constraint conversion ------------------------------------------------------

ConversionOutcome convert_constraint(const std::vector<ZoneRollout>& zones,
                                     const Eigen::VectorXd& p_max_w, double nu,
                                     const std::vector<ComfortBounds>& bounds) {
  if (zones.size() != bounds.size())
    throw std::invalid_argument("one comfort box per zone rollout required");
  if (nu < 0 || nu >= 1) throw std::invalid_argument("slack must lie in [0, 1)");
  ConversionOutcome out;
  if ((p_max_w.array() == std::numeric_limits<double>::infinity()).all()) {
    out.tag = ConversionTag::NoAction;  // nothing to enforce, skip the rollouts
    return out;
  }
  const long H = p_max_w.size();
  Eigen::VectorXd cap = (1.0 - nu) * p_max_w;

  out.p_bu_w = Eigen::VectorXd::Zero(H);
  for (const ZoneRollout& z : zones) out.p_bu_w += z.power_w(0.0);
  if ((out.p_bu_w.array() <= cap.array()).all()) {
    out.tag = ConversionTag::NoAction;
    return out;
  }

  out.p_lb_w = Eigen::VectorXd::Zero(H);
  for (size_t i = 0; i < zones.size(); ++i) out.p_lb_w += zones[i].power_w(bounds[i].m);
  if ((out.p_lb_w.array() > cap.array()).any()) {
    out.tag = ConversionTag::Saturate;
    return out;
  }

  out.tag = ConversionTag::RunAdmm;
  out.p_tot_w = out.p_bu_w.cwiseMin(cap);
  return out;
}

// ---- ddpn -----------------------------------------------------------------------

namespace {

Eigen::VectorXd clip_box(const Eigen::VectorXd& d, const ComfortBounds& b) {
  return d.cwiseMax(b.m).cwiseMin(b.M);
}

}  // namespace

PlanOutcome ddpn_solve(const Ssm& m, const Eigen::VectorXd& s0, const Eigen::VectorXd& u_bar_n,
                       const Eigen::VectorXd& lambda, const PlannerConfig& cfg,
                       const std::vector<Disturbance>& dist,
                       const std::vector<double>& base_setpoints_c,
                       const Eigen::VectorXd* warm_delta_c) {
  const int H = cfg.horizon;
  if (u_bar_n.size() != H || lambda.size() != H || static_cast<int>(dist.size()) != H ||
      static_cast<int>(base_setpoints_c.size()) != H)
    throw std::invalid_argument("ddpn inputs must match the horizon");

  const double sp_std = m.stats.setpoint_std;
  LocalCost cost;
  cost.base_act_n.resize(H);
  for (int t = 0; t < H; ++t)
    cost.base_act_n[t] = m.stats.norm_setpoint(base_setpoints_c[static_cast<size_t>(t)]);
  cost.u_bar_n = u_bar_n;
  cost.lambda = lambda;
  cost.rho = cfg.rho;
  cost.delta_weight = cfg.delta_weight;

  auto act_of = [&](const Eigen::VectorXd& delta) {
    return Eigen::VectorXd(cost.base_act_n + delta / sp_std);
  };
  auto eval = [&](const Eigen::VectorXd& delta) {
    return ssm_plan_eval(m, s0, act_of(delta), dist, cost);
  };

  Eigen::VectorXd delta =
      warm_delta_c ? clip_box(*warm_delta_c, cfg.bounds) : Eigen::VectorXd::Zero(H);
  CostEval cur = eval(delta);
  if (!std::isfinite(cur.cost)) throw std::runtime_error("non-finite shooting objective");

  Eigen::VectorXd rounded(H);
  for (int t = 0; t < H; ++t) rounded[t] = cfg.bounds.snap(delta[t]);
  int stable = 0;
  int iters = 0;
  while (iters < cfg.max_gd_iters && stable < 3) {
    ++iters;
    Eigen::VectorXd grad_delta = cur.grad_act_n / sp_std;
    double step = 0.1;
    bool accepted = false;
    while (step > 1e-6) {
      Eigen::VectorXd cand = clip_box(delta - step * grad_delta, cfg.bounds);
      CostEval ce = eval(cand);
      if (!std::isfinite(ce.cost)) throw std::runtime_error("non-finite shooting objective");
      if (ce.cost < cur.cost) {
        delta = cand;
        cur = ce;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    Eigen::VectorXd now(H);
    for (int t = 0; t < H; ++t) now[t] = cfg.bounds.snap(delta[t]);
    if (now == rounded) {
      ++stable;
    } else {
      rounded = now;
      stable = 0;
    }
    if (!accepted) break;  // no descent direction left at this scale
  }

  PlanOutcome out;
  out.delta_c = rounded;
  out.gd_iters = iters;
  CostEval fin = eval(rounded);
  out.objective = fin.cost;
  out.u_pred_n = fin.power_n;
  std::vector<double> sp(static_cast<size_t>(H));
  for (int t = 0; t < H; ++t)
    sp[static_cast<size_t>(t)] = base_setpoints_c[static_cast<size_t>(t)] + rounded[t];
  SsmPrediction pred = ssm_rollout(m, s0, sp, dist);
  out.u_pred_w = Eigen::Map<const Eigen::VectorXd>(pred.power_w.data(), H);
  return out;
}

// ---- sdpn -----------------------------------------------------------------------

namespace {

std::vector<Eigen::VectorXd> enumerate_candidates(const PlannerConfig& cfg, Rng* rng) {
  const int H = cfg.horizon;
  if (cfg.block < 1 || H % cfg.block != 0)
    throw std::invalid_argument("block length must divide the horizon");
  const int groups = H / cfg.block;
  const int levels = cfg.bounds.n_levels();

  double count_d = std::pow(static_cast<double>(levels), groups);
  if (count_d > 9e15) throw std::overflow_error("candidate count overflows");
  int64_t count = 1;
  for (int b = 0; b < groups; ++b) count *= levels;

  std::vector<Eigen::VectorXd> cands;
  if (count <= cfg.candidate_cap) {
    cands.reserve(static_cast<size_t>(count));
    std::vector<int> idx(static_cast<size_t>(groups), 0);
    for (int64_t c = 0; c < count; ++c) {
      Eigen::VectorXd d(H);
      for (int t = 0; t < H; ++t) d[t] = cfg.bounds.level(idx[static_cast<size_t>(t / cfg.block)]);
      cands.push_back(std::move(d));
      for (int b = groups - 1; b >= 0; --b) {  // odometer, last group fastest
        if (++idx[static_cast<size_t>(b)] < levels) break;
        idx[static_cast<size_t>(b)] = 0;
      }
    }
  } else {
    cands.reserve(static_cast<size_t>(cfg.candidate_cap));
    for (int c = 0; c < cfg.candidate_cap; ++c) {
      Eigen::VectorXd d(H);
      for (int b = 0; b < groups; ++b) {
        double lv = cfg.bounds.level(static_cast<int>(rng->uniform_int(0, levels - 1)));
        for (int t = b * cfg.block; t < (b + 1) * cfg.block; ++t) d[t] = lv;
      }
      cands.push_back(std::move(d));
    }
  }
  return cands;
}

}  // namespace

TrajectoryBank sdpn_build_bank(const Rssm& m, const RssmState& st,
                               const std::vector<Disturbance>& dist,
                               const std::vector<double>& base_setpoints_c,
                               const PlannerConfig& cfg, Rng* rng) {
  const int H = cfg.horizon;
  if (static_cast<int>(dist.size()) != H || static_cast<int>(base_setpoints_c.size()) != H)
    throw std::invalid_argument("bank inputs must match the horizon");
  if (cfg.k_samples < 1) throw std::invalid_argument("need at least one sample per candidate");

  std::vector<Eigen::VectorXd> cands = enumerate_candidates(cfg, rng);
  const int nc = static_cast<int>(cands.size());
  const int k = cfg.k_samples;

  Mat act_n(static_cast<long>(nc) * k, H);
  for (int c = 0; c < nc; ++c) {
    Eigen::RowVectorXd row(H);
    for (int t = 0; t < H; ++t)
      row[t] = m.stats.norm_setpoint(base_setpoints_c[static_cast<size_t>(t)] + cands[static_cast<size_t>(c)][t]);
    for (int j = 0; j < k; ++j) act_n.row(static_cast<long>(c) * k + j) = row;
  }

  RssmSamples roll = rssm_rollout_batch(m, st, act_n, dist, rng);

  TrajectoryBank bank;
  bank.entries.resize(static_cast<size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    long best = -1;
    double best_total = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      long r = static_cast<long>(c) * k + j;
      double total = roll.power_w.row(r).sum();
      if (total > best_total) {
        best_total = total;
        best = r;
      }
    }
    BankEntry& e = bank.entries[static_cast<size_t>(c)];
    e.delta_c = cands[static_cast<size_t>(c)];
    e.u_worst_w = roll.power_w.row(best).transpose();
    e.u_worst_n = roll.power_n.row(best).transpose();
    e.temp_c = roll.temp_c.row(best).transpose();
  }
  return bank;
}

PlanOutcome sdpn_select(const TrajectoryBank& bank, const Eigen::VectorXd& u_bar_n,
                        const Eigen::VectorXd& lambda, const PlannerConfig& cfg,
                        const NormStats& stats) {
  if (bank.entries.empty()) throw std::invalid_argument("empty trajectory bank");
  const double sp_std = stats.setpoint_std;

  auto score_of = [&](const BankEntry& e) {
    Eigen::VectorXd gap = u_bar_n - e.u_worst_n;
    double g = cfg.delta_weight * (e.delta_c / sp_std).squaredNorm();
    return g + lambda.dot(gap) + 0.5 * cfg.rho * gap.squaredNorm();
  };

  const BankEntry* best = &bank.entries.front();
  double best_score = score_of(*best);
  for (size_t c = 1; c < bank.entries.size(); ++c) {
    const BankEntry& e = bank.entries[c];
    double s = score_of(e);
    bool better = s < best_score;
    if (s == best_score) {
      double ne = e.delta_c.norm(), nb = best->delta_c.norm();
      better = ne < nb ||
               (ne == nb && std::lexicographical_compare(
                                e.delta_c.data(), e.delta_c.data() + e.delta_c.size(),
                                best->delta_c.data(), best->delta_c.data() + best->delta_c.size()));
    }
    if (better) {
      best = &e;
      best_score = s;
    }
  }

  PlanOutcome out;
  out.delta_c = best->delta_c;
  out.u_pred_w = best->u_worst_w;
  out.u_pred_n = best->u_worst_n;
  out.objective = best_score;
  return out;
}

}  // namespace dpn
