#include <doctest.h>

#include <cmath>

#include "dpn/model_eval.hpp"

using namespace dpn;

namespace {

// two zones with linear power ramps; plenty of structure for exact checks
Dataset ramp_dataset(int n) {
  Dataset d;
  d.step_seconds = 900;
  d.zones.resize(2);
  for (int t = 0; t < n; ++t) {
    d.timestamps.push_back(1700000000 + 900ll * t);
    Disturbance w;
    w.v = {-5.0 + 0.1 * t, 50, 0, 0.2, 0.9, 0.1, 0.95};
    d.disturbances.push_back(w);
    d.zones[0].obs.push_back({20.0 + 0.01 * t, 100.0 + 10.0 * t});
    d.zones[1].obs.push_back({21.0 - 0.01 * t, 50.0 + 5.0 * t});
    d.zones[0].act.push_back({20.0});
    d.zones[1].act.push_back({21.0});
  }
  d.stats.dist_std.fill(1.0);
  return d;
}

}  // namespace

TEST_CASE("eval: oracle forecaster scores zero error") {
  Dataset d = ramp_dataset(60);
  EvalReport r = evaluate_model(make_oracle_forecaster(), d, {4, 8, 16}, 8);
  CHECK(r.n_origins > 3);
  CHECK(r.zone_mae_w.cwiseAbs().maxCoeff() == 0.0);
  for (double m : r.building_mape_pct) CHECK(m == 0.0);
  for (int c : r.building_mape_count) CHECK(c == r.n_origins);
}

TEST_CASE("eval: constant-zero forecaster scores 100 percent mape") {
  Dataset d = ramp_dataset(60);
  EvalReport r = evaluate_model(make_zero_forecaster(), d, {4}, 4);
  CHECK(r.building_mape_pct[0] == doctest::Approx(100.0).epsilon(1e-12));
  // zone mae equals the mean true power over the scored rows
  double mean0 = 0;
  int cnt = 0;
  for (int e = 0; e + 4 + 1 <= 60; e += 4) {
    mean0 += d.zones[0].obs[static_cast<size_t>(e + 4)].hvac_w;
    ++cnt;
  }
  CHECK(r.zone_mae_w(0, 0) == doctest::Approx(mean0 / cnt).epsilon(1e-12));
}

TEST_CASE("eval: guard skips quiet timesteps") {
  Dataset d = ramp_dataset(60);
  for (int t = 0; t < 60; ++t) {
    d.zones[0].obs[static_cast<size_t>(t)].hvac_w = t < 30 ? 0.0 : 500.0;
    d.zones[1].obs[static_cast<size_t>(t)].hvac_w = 0.0;
  }
  EvalReport r = evaluate_model(make_zero_forecaster(), d, {1}, 1);
  // only rows 30.. pass the 100 W guard
  CHECK(r.building_mape_count[0] < r.n_origins);
  CHECK(r.building_mape_count[0] > 0);
  CHECK(r.building_mape_pct[0] == doctest::Approx(100.0));
}

TEST_CASE("eval: horizon beyond the dataset throws") {
  Dataset d = ramp_dataset(10);
  CHECK_THROWS(evaluate_model(make_oracle_forecaster(), d, {16}, 1));
  CHECK_THROWS(evaluate_model(make_oracle_forecaster(), d, {}, 1));
}

TEST_CASE("eval: model forecasters run end to end and key noise on the origin") {
  Dataset d = ramp_dataset(80);

  SsmConfig sc;
  sc.n_lags = 4;
  sc.d_s = 8;
  Ssm sm = make_ssm(sc, d.stats);
  EvalReport rs = evaluate_model(make_ssm_forecaster(sm), d, {2, 4}, 8);
  CHECK(rs.zone_mae_w.allFinite());
  CHECK(rs.n_origins > 0);

  RssmConfig rc;
  rc.n_lags = 4;
  rc.d_s = 6;
  rc.d_h = 6;
  Rssm rm = make_rssm(rc, d.stats);
  ZoneForecaster f = make_rssm_forecaster(rm, 5, 99);
  Eigen::VectorXd a = f.predict(d, 0, 10, 4);
  Eigen::VectorXd b = f.predict(d, 0, 10, 4);
  Eigen::VectorXd c = f.predict(d, 0, 18, 4);
  CHECK(a == b);  // same origin, same stream, independent of call order
  CHECK(a != c);
  EvalReport rr = evaluate_model(f, d, {2, 4}, 16);
  CHECK(rr.zone_mae_w.allFinite());

  std::string csv = eval_report_csv(rr);
  CHECK(csv.rfind("metric,zone,h2,h4\n", 0) == 0);
  CHECK(csv.find("building_mape_pct,all,") != std::string::npos);
}
