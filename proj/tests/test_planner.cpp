#include <doctest.h>

#include <cmath>

#include "dpn/planner.hpp"

using namespace dpn;

namespace {

NormStats toy_stats() {
  NormStats st;
  st.setpoint_mean = 21.0;
  st.setpoint_std = 2.0;
  st.power_mean = 1000.0;
  st.power_std = 500.0;
  st.temp_std = 2.0;
  st.dist_std.fill(1.0);
  return st;
}

// memoryless transition (z gate shut), one latent channel reading the action,
// decoder wired straight through: power strictly increasing in every delta
Ssm monotone_ssm() {
  SsmConfig cfg;
  cfg.n_lags = 4;
  cfg.d_s = 4;
  cfg.seed = 7;
  Ssm m = make_ssm(cfg, toy_stats());
  int h = cfg.d_s;
  m.transition.Wx.setZero();
  m.transition.Wh.setZero();
  m.transition.bx.setZero();
  m.transition.bh.setZero();
  m.transition.bx.block(h, 0, h, 1).setConstant(-40.0);
  m.transition.Wx(2 * h + 0, 0) = 0.05;
  for (auto& L : m.decoder.layers) {
    L.W.setZero();
    L.b.setZero();
  }
  m.decoder.layers[0].W(0, 0) = 1.0;
  m.decoder.layers[1].W(0, 0) = 1.0;
  // steep output: keeps the shooting objective well conditioned so descent
  // crosses lattice cells before the stability stop fires
  m.decoder.layers[2].W(0, 0) = 46.0;
  return m;
}

std::vector<Disturbance> flat_dist(int H) {
  std::vector<Disturbance> d(static_cast<size_t>(H));
  for (auto& x : d) x.v = {-10, 55, 50, 0.3, 0.9, 0.2, 0.98};
  return d;
}

bool on_lattice(const Eigen::VectorXd& delta, const ComfortBounds& b) {
  for (long t = 0; t < delta.size(); ++t)
    if (delta[t] != b.snap(delta[t])) return false;
  return true;
}

}  // namespace

TEST_CASE("planner: comfort lattice arithmetic") {
  ComfortBounds b;
  CHECK(b.n_levels() == 9);
  CHECK(b.level(0) == -2.0);
  CHECK(b.level(8) == 0.0);
  CHECK(b.snap(-1.3) == -1.25);
  CHECK(b.snap(-0.124) == 0.0);
  CHECK(b.snap(-0.126) == -0.25);
  CHECK(b.snap(1.7) == 0.0);
  CHECK(b.snap(-9.0) == -2.0);

  ComfortBounds bad;
  bad.resolution = 0.3;  // span 2 is not a multiple
  CHECK_THROWS(bad.n_levels());
  bad.resolution = -0.25;
  CHECK_THROWS(bad.n_levels());
  bad = ComfortBounds{0.5, -0.5, 0.25};
  CHECK_THROWS(bad.n_levels());
}

TEST_CASE("planner: config json round trip") {
  PlannerConfig c;
  c.rho = 7.5;
  c.nu = 0.05;
  c.bounds.m = -1.5;
  c.horizon = 8;
  c.block = 4;
  c.k_samples = 37;
  c.candidate_cap = 500;
  PlannerConfig r = planner_config_from_json(planner_config_to_json(c));
  CHECK(r.rho == 7.5);
  CHECK(r.nu == 0.05);
  CHECK(r.bounds.m == -1.5);
  CHECK(r.bounds.resolution == 0.25);
  CHECK(r.horizon == 8);
  CHECK(r.block == 4);
  CHECK(r.k_samples == 37);
  CHECK(r.candidate_cap == 500);

  PlannerConfig d = planner_config_from_json("{}");
  CHECK(d.rho == 4.0);
  CHECK(d.bounds.m == -2.0);
  CHECK_THROWS(planner_config_from_json("{\"bounds\": {\"resolution\": 0.3}}"));
}

TEST_CASE("planner: constraint conversion branches") {
  int H = 4;
  std::vector<int> calls(2, 0);
  std::vector<ZoneRollout> zones(2);
  std::vector<ComfortBounds> bounds(2);
  // zone powers: 1000 W flat at delta 0, shrinking 200 W per degree of cut
  for (int i = 0; i < 2; ++i)
    zones[static_cast<size_t>(i)].power_w = [&calls, i, H](double delta) {
      ++calls[static_cast<size_t>(i)];
      return Eigen::VectorXd(Eigen::VectorXd::Constant(H, 1000.0 + 200.0 * delta));
    };

  // unbounded cap short-circuits before any model call
  Eigen::VectorXd inf_cap =
      Eigen::VectorXd::Constant(H, std::numeric_limits<double>::infinity());
  ConversionOutcome o = convert_constraint(zones, inf_cap, 0.1, bounds);
  CHECK(o.tag == ConversionTag::NoAction);
  CHECK(calls[0] + calls[1] == 0);
  CHECK(o.p_bu_w.size() == 0);

  // cap far above the baseline: no action, lower bound never probed
  o = convert_constraint(zones, Eigen::VectorXd::Constant(H, 5000.0), 0.1, bounds);
  CHECK(o.tag == ConversionTag::NoAction);
  CHECK(o.p_bu_w == Eigen::VectorXd::Constant(H, 2000.0));
  CHECK(o.p_lb_w.size() == 0);

  // cap below even the deepest cut (2 * (1000 - 400) = 1200): saturate
  o = convert_constraint(zones, Eigen::VectorXd::Constant(H, 1100.0), 0.0, bounds);
  CHECK(o.tag == ConversionTag::Saturate);
  CHECK(o.p_lb_w == Eigen::VectorXd::Constant(H, 1200.0));

  // cap between the bounds: admm with target min(p_bu, (1-nu) p_max)
  o = convert_constraint(zones, Eigen::VectorXd::Constant(H, 1600.0), 0.0, bounds);
  CHECK(o.tag == ConversionTag::RunAdmm);
  CHECK(o.p_tot_w == Eigen::VectorXd::Constant(H, 1600.0));
  Eigen::VectorXd mixed(H);
  mixed << 5000.0, 1600.0, 5000.0, 1500.0;
  o = convert_constraint(zones, mixed, 0.0, bounds);
  CHECK(o.tag == ConversionTag::RunAdmm);
  CHECK(o.p_tot_w[0] == 2000.0);  // bu below cap there
  CHECK(o.p_tot_w[1] == 1600.0);
  CHECK(o.p_tot_w[3] == 1500.0);

  CHECK_THROWS(convert_constraint(zones, mixed, 1.0, bounds));
  bounds.pop_back();
  CHECK_THROWS(convert_constraint(zones, mixed, 0.1, bounds));
}

TEST_CASE("planner: ddpn leaves matched targets alone") {
  Ssm m = make_ssm([] {
    SsmConfig c;
    c.n_lags = 4;
    c.d_s = 8;
    c.seed = 3;
    return c;
  }(), toy_stats());
  PlannerConfig cfg;
  cfg.horizon = 4;
  Rng rng(5);
  Eigen::VectorXd s0(8);
  for (int i = 0; i < 8; ++i) s0[i] = rng.normal();
  std::vector<Disturbance> dist = flat_dist(4);
  std::vector<double> base(4, 21.0);

  // targets equal to the business-as-usual prediction, zero duals
  LocalCost probe;
  probe.base_act_n = Eigen::VectorXd::Constant(4, m.stats.norm_setpoint(21.0));
  probe.u_bar_n = Eigen::VectorXd::Zero(4);
  probe.lambda = Eigen::VectorXd::Zero(4);
  probe.rho = 0.0;
  Eigen::VectorXd bau = ssm_plan_eval(m, s0, probe.base_act_n, dist, probe).power_n;

  PlanOutcome out = ddpn_solve(m, s0, bau, Eigen::VectorXd::Zero(4), cfg, dist, base);
  CHECK(out.delta_c == Eigen::VectorXd::Zero(4));
  CHECK(out.u_pred_n == bau);
}

TEST_CASE("planner: ddpn output respects box and lattice on arbitrary problems") {
  PlannerConfig cfg;
  cfg.horizon = 4;
  std::vector<Disturbance> dist = flat_dist(4);
  std::vector<double> base(4, 21.0);
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    SsmConfig sc;
    sc.n_lags = 4;
    sc.d_s = 8;
    sc.seed = seed;
    Ssm m = make_ssm(sc, toy_stats());
    Rng rng(mix_seed({0xDD, seed}));
    Eigen::VectorXd s0(8), u_bar(4), lam(4);
    for (int i = 0; i < 8; ++i) s0[i] = rng.normal();
    for (int i = 0; i < 4; ++i) {
      u_bar[i] = rng.normal(0, 1);
      lam[i] = rng.normal(0, 0.5);
    }
    cfg.rho = rng.uniform(1.0, 8.0);
    PlanOutcome out = ddpn_solve(m, s0, u_bar, lam, cfg, dist, base);
    CHECK(on_lattice(out.delta_c, cfg.bounds));
    CHECK(out.delta_c.minCoeff() >= -2.0);
    CHECK(out.delta_c.maxCoeff() <= 0.0);
    CHECK(out.u_pred_w.minCoeff() >= 0.0);
    CHECK(std::isfinite(out.objective));
    CHECK(out.gd_iters <= cfg.max_gd_iters);

    // warm start from the previous answer changes nothing semantic
    PlanOutcome warm = ddpn_solve(m, s0, u_bar, lam, cfg, dist, base, &out.delta_c);
    CHECK(on_lattice(warm.delta_c, cfg.bounds));
    CHECK(warm.objective <= out.objective + 1e-9);
  }
}

TEST_CASE("planner: ddpn matches exhaustive enumeration on a monotone model") {
  Ssm m = monotone_ssm();
  PlannerConfig cfg;
  cfg.horizon = 2;
  cfg.block = 1;
  cfg.rho = 6.0;
  cfg.delta_weight = 0.02;
  Eigen::VectorXd s0 = Eigen::VectorXd::Zero(4);
  std::vector<Disturbance> dist = flat_dist(2);
  std::vector<double> base(2, 21.0);

  LocalCost cost;
  cost.base_act_n = Eigen::VectorXd::Constant(2, m.stats.norm_setpoint(21.0));
  cost.lambda.resize(2);
  cost.u_bar_n.resize(2);
  cost.rho = cfg.rho;
  cost.delta_weight = cfg.delta_weight;

  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    // targets below the business-as-usual output pull delta negative
    for (int t = 0; t < 2; ++t) {
      cost.u_bar_n[t] = rng.uniform(-1.8, -0.2);
      cost.lambda[t] = rng.uniform(-0.2, 0.2);
    }
    PlanOutcome out = ddpn_solve(m, s0, cost.u_bar_n, cost.lambda, cfg, dist, base);

    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_d(2);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) {
        Eigen::VectorXd d(2);
        d << cfg.bounds.level(i), cfg.bounds.level(j);
        Eigen::VectorXd a = cost.base_act_n + d / m.stats.setpoint_std;
        double c = ssm_plan_eval(m, s0, a, dist, cost).cost;
        if (c < best) {
          best = c;
          best_d = d;
        }
      }
    CHECK(out.delta_c == best_d);
    CHECK(out.objective == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("planner: bank enumerates the lattice blocks and keeps worst cases") {
  RssmConfig rc;
  rc.n_lags = 4;
  rc.d_s = 6;
  rc.d_h = 6;
  rc.seed = 5;
  Rssm m = make_rssm(rc, toy_stats());
  RssmState st;
  st.h = Eigen::VectorXd::Zero(6);
  st.s = Eigen::VectorXd::Zero(6);
  PlannerConfig cfg;
  cfg.horizon = 4;
  cfg.block = 2;
  cfg.k_samples = 20;
  std::vector<Disturbance> dist = flat_dist(4);
  std::vector<double> base(4, 21.0);

  Rng rng(1234);
  Rng replay = rng;  // same stream for the independent re-scan
  TrajectoryBank bank = sdpn_build_bank(m, st, dist, base, cfg, &rng);
  REQUIRE(bank.n_candidates() == 81);

  // candidates: every 2-block lattice combination exactly once, block-constant
  for (const BankEntry& e : bank.entries) {
    CHECK(e.delta_c[0] == e.delta_c[1]);
    CHECK(e.delta_c[2] == e.delta_c[3]);
    CHECK(on_lattice(e.delta_c, cfg.bounds));
    CHECK(e.u_worst_w.minCoeff() >= 0.0);
    CHECK(e.u_worst_w.size() == 4);
    CHECK(e.temp_c.size() == 4);
  }
  for (size_t a = 0; a < bank.entries.size(); ++a)
    for (size_t b = a + 1; b < bank.entries.size(); ++b)
      CHECK(bank.entries[a].delta_c != bank.entries[b].delta_c);

  // independent re-scan: replay the same sample population and re-derive the
  // worst case per candidate
  Mat act_n(81 * 20, 4);
  for (int c = 0; c < 81; ++c)
    for (int j = 0; j < 20; ++j)
      for (int t = 0; t < 4; ++t)
        act_n(c * 20 + j, t) =
            m.stats.norm_setpoint(21.0 + bank.entries[static_cast<size_t>(c)].delta_c[t]);
  RssmSamples roll = rssm_rollout_batch(m, st, act_n, dist, &replay);
  for (int c = 0; c < 81; ++c) {
    double best = -1;
    int arg = -1;
    for (int j = 0; j < 20; ++j)
      if (roll.power_w.row(c * 20 + j).sum() > best) {
        best = roll.power_w.row(c * 20 + j).sum();
        arg = c * 20 + j;
      }
    CHECK(bank.entries[static_cast<size_t>(c)].u_worst_w == roll.power_w.row(arg).transpose());
  }
}

TEST_CASE("planner: bank sampling beyond the cap and count overflow") {
  RssmConfig rc;
  rc.n_lags = 3;
  rc.d_s = 4;
  rc.d_h = 4;
  Rssm m = make_rssm(rc, toy_stats());
  RssmState st;
  st.h = Eigen::VectorXd::Zero(4);
  st.s = Eigen::VectorXd::Zero(4);

  PlannerConfig cfg;
  cfg.horizon = 6;
  cfg.block = 1;  // 9^6 = 531441 candidates
  cfg.k_samples = 2;
  cfg.candidate_cap = 40;
  Rng rng(9);
  TrajectoryBank bank = sdpn_build_bank(m, st, flat_dist(6), std::vector<double>(6, 21.0), cfg, &rng);
  CHECK(bank.n_candidates() == 40);
  for (const BankEntry& e : bank.entries) CHECK(on_lattice(e.delta_c, cfg.bounds));

  cfg.horizon = 17;  // 9^17 overflows any sane enumeration count
  CHECK_THROWS_AS(sdpn_build_bank(m, st, flat_dist(17), std::vector<double>(17, 21.0), cfg, &rng),
                  std::overflow_error);

  cfg.horizon = 5;
  cfg.block = 2;  // does not divide
  CHECK_THROWS(sdpn_build_bank(m, st, flat_dist(5), std::vector<double>(5, 21.0), cfg, &rng));
}

TEST_CASE("planner: selection is a pure exhaustive argmin with no model calls") {
  RssmConfig rc;
  rc.n_lags = 4;
  rc.d_s = 6;
  rc.d_h = 6;
  rc.seed = 11;
  Rssm m = make_rssm(rc, toy_stats());
  RssmState st;
  st.h = Eigen::VectorXd::Zero(6);
  st.s = Eigen::VectorXd::Zero(6);
  PlannerConfig cfg;
  cfg.horizon = 4;
  cfg.block = 2;
  cfg.k_samples = 10;
  cfg.rho = 3.0;
  Rng rng(77);
  TrajectoryBank bank = sdpn_build_bank(m, st, flat_dist(4), std::vector<double>(4, 21.0), cfg, &rng);
  CHECK(m.eval_count > 0);

  int64_t evals_before = m.eval_count;
  Rng trg(31);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd u_bar(4), lam(4);
    for (int t = 0; t < 4; ++t) {
      u_bar[t] = trg.normal(0, 1);
      lam[t] = trg.normal(0, 0.5);
    }
    PlanOutcome sel = sdpn_select(bank, u_bar, lam, cfg, m.stats);
    PlanOutcome again = sdpn_select(bank, u_bar, lam, cfg, m.stats);
    CHECK(sel.delta_c == again.delta_c);
    CHECK(sel.objective == again.objective);

    // independent oracle with the same tie rules
    double best = std::numeric_limits<double>::infinity();
    const BankEntry* win = nullptr;
    for (const BankEntry& e : bank.entries) {
      Eigen::VectorXd gap = u_bar - e.u_worst_n;
      double s = cfg.delta_weight * (e.delta_c / m.stats.setpoint_std).squaredNorm() +
                 lam.dot(gap) + 0.5 * cfg.rho * gap.squaredNorm();
      if (s < best || (s == best && win &&
                       (e.delta_c.norm() < win->delta_c.norm() ||
                        (e.delta_c.norm() == win->delta_c.norm() &&
                         std::lexicographical_compare(e.delta_c.data(), e.delta_c.data() + 4,
                                                      win->delta_c.data(), win->delta_c.data() + 4))))) {
        best = s;
        win = &e;
      }
    }
    CHECK(sel.delta_c == win->delta_c);
    CHECK(sel.objective == best);
  }
  CHECK(m.eval_count == evals_before);  // scoring never touched the model

  // a target equal to a stored no-cut trajectory keeps delta at zero
  const BankEntry* zero_entry = nullptr;
  for (const BankEntry& e : bank.entries)
    if (e.delta_c.cwiseAbs().maxCoeff() == 0.0) zero_entry = &e;
  REQUIRE(zero_entry != nullptr);
  PlanOutcome sel = sdpn_select(bank, zero_entry->u_worst_n, Eigen::VectorXd::Zero(4), cfg, m.stats);
  CHECK(sel.delta_c == zero_entry->delta_c);
  CHECK(sel.objective == 0.0);

  TrajectoryBank empty;
  CHECK_THROWS(sdpn_select(empty, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4), cfg, m.stats));
}
