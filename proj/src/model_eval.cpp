#include "dpn/model_eval.hpp"

#include <memory>
#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace dpn {

namespace {

std::vector<Observation> obs_window(const Dataset& d, int zone, int first, int n) {
  std::vector<Observation> w;
  w.reserve(static_cast<size_t>(n));
  for (int r = first; r < first + n; ++r) w.push_back(d.zones[static_cast<size_t>(zone)].obs[static_cast<size_t>(r)]);
  return w;
}

std::vector<Disturbance> dist_window(const Dataset& d, int first, int n) {
  std::vector<Disturbance> w;
  w.reserve(static_cast<size_t>(n));
  for (int r = first; r < first + n; ++r) w.push_back(d.disturbances[static_cast<size_t>(r)]);
  return w;
}

std::vector<Action> act_window(const Dataset& d, int zone, int first, int n) {
  std::vector<Action> w;
  w.reserve(static_cast<size_t>(n));
  for (int r = first; r < first + n; ++r) w.push_back(d.zones[static_cast<size_t>(zone)].act[static_cast<size_t>(r)]);
  return w;
}

}  // namespace

ZoneForecaster make_ssm_forecaster(const Ssm& m) {
  ZoneForecaster f;
  f.min_context = m.cfg.n_lags;
  f.predict = [&m](const Dataset& d, int zone, int e, int H) {
    int lags = m.cfg.n_lags;
    Eigen::VectorXd s0 = ssm_encode(m, obs_window(d, zone, e - lags + 1, lags),
                                    dist_window(d, e - lags + 1, lags));
    std::vector<double> sp(static_cast<size_t>(H));
    for (int k = 0; k < H; ++k)
      sp[static_cast<size_t>(k)] = d.zones[static_cast<size_t>(zone)].act[static_cast<size_t>(e + k)].setpoint_c;
    SsmPrediction p = ssm_rollout(m, s0, sp, dist_window(d, e, H));
    Eigen::VectorXd u(H);
    for (int k = 0; k < H; ++k) u[k] = p.power_w[static_cast<size_t>(k)];
    return u;
  };
  return f;
}

ZoneForecaster make_rssm_forecaster(const Rssm& m, int n_samples, uint64_t seed) {
  ZoneForecaster f;
  f.min_context = m.cfg.n_lags;
  f.predict = [&m, n_samples, seed](const Dataset& d, int zone, int e, int H) {
    int lags = m.cfg.n_lags;
    RssmState st = rssm_filter(m, obs_window(d, zone, e - lags + 1, lags),
                               act_window(d, zone, e - lags + 1, lags),
                               dist_window(d, e - lags + 1, lags));
    std::vector<double> sp(static_cast<size_t>(H));
    for (int k = 0; k < H; ++k)
      sp[static_cast<size_t>(k)] = d.zones[static_cast<size_t>(zone)].act[static_cast<size_t>(e + k)].setpoint_c;
    Rng rng = substream(seed, static_cast<uint64_t>(zone), static_cast<uint64_t>(e));
    RssmSamples s = rssm_rollout_samples(m, st, sp, dist_window(d, e, H), n_samples, &rng);
    return Eigen::VectorXd(s.power_w.colwise().mean().transpose());
  };
  return f;
}

ZoneForecaster make_oracle_forecaster() {
  ZoneForecaster f;
  f.min_context = 1;
  f.predict = [](const Dataset& d, int zone, int e, int H) {
    Eigen::VectorXd u(H);
    for (int k = 0; k < H; ++k)
      u[k] = d.zones[static_cast<size_t>(zone)].obs[static_cast<size_t>(e + 1 + k)].hvac_w;
    return u;
  };
  return f;
}

ZoneForecaster make_zero_forecaster() {
  ZoneForecaster f;
  f.min_context = 1;
  f.predict = [](const Dataset&, int, int, int H) { return Eigen::VectorXd(Eigen::VectorXd::Zero(H)); };
  return f;
}

ZoneForecaster make_dispatch_forecaster(std::vector<ZoneForecaster> per_zone) {
  if (per_zone.empty()) throw std::invalid_argument("no per-zone forecasters");
  ZoneForecaster f;
  for (const ZoneForecaster& z : per_zone) f.min_context = std::max(f.min_context, z.min_context);
  auto fs = std::make_shared<std::vector<ZoneForecaster>>(std::move(per_zone));
  f.predict = [fs](const Dataset& d, int zone, int e, int H) {
    return (*fs)[static_cast<size_t>(zone)].predict(d, zone, e, H);
  };
  return f;
}

EvalReport evaluate_model(const ZoneForecaster& f, const Dataset& test,
                          const std::vector<int>& horizons, int stride, double guard_w) {
  if (horizons.empty()) throw std::invalid_argument("no horizons requested");
  int hmax = *std::max_element(horizons.begin(), horizons.end());
  if (hmax < 1) throw std::invalid_argument("horizons must be positive");
  int first = f.min_context - 1;
  int last = test.n_rows() - hmax - 1;  // inclusive
  if (last < first) throw std::invalid_argument("horizon exceeds the dataset");

  int nz = test.n_zones();
  int nh = static_cast<int>(horizons.size());
  EvalReport rep;
  rep.horizons = horizons;
  rep.zone_mae_w = Mat::Zero(nz, nh);
  rep.building_mape_pct.assign(static_cast<size_t>(nh), 0.0);
  rep.building_mape_count.assign(static_cast<size_t>(nh), 0);

  for (int e = first; e <= last; e += stride) {
    Mat pred(nz, hmax);
    for (int z = 0; z < nz; ++z) pred.row(z) = f.predict(test, z, e, hmax).transpose();
    for (int hi = 0; hi < nh; ++hi) {
      int h = horizons[static_cast<size_t>(hi)];
      double btrue = 0, bpred = 0;
      for (int z = 0; z < nz; ++z) {
        double truth = test.zones[static_cast<size_t>(z)].obs[static_cast<size_t>(e + h)].hvac_w;
        rep.zone_mae_w(z, hi) += std::abs(pred(z, h - 1) - truth);
        btrue += truth;
        bpred += pred(z, h - 1);
      }
      if (btrue >= guard_w) {
        rep.building_mape_pct[static_cast<size_t>(hi)] += std::abs(bpred - btrue) / btrue;
        rep.building_mape_count[static_cast<size_t>(hi)] += 1;
      }
    }
    ++rep.n_origins;
  }

  rep.zone_mae_w /= rep.n_origins;
  for (int hi = 0; hi < nh; ++hi) {
    int c = rep.building_mape_count[static_cast<size_t>(hi)];
    rep.building_mape_pct[static_cast<size_t>(hi)] =
        c > 0 ? 100.0 * rep.building_mape_pct[static_cast<size_t>(hi)] / c : 0.0;
  }
  return rep;
}

std::string eval_report_csv(const EvalReport& r) {
  std::string out = "metric,zone";
  char buf[64];
  for (int h : r.horizons) {
    std::snprintf(buf, sizeof buf, ",h%d", h);
    out += buf;
  }
  out += "\n";
  for (long z = 0; z < r.zone_mae_w.rows(); ++z) {
    std::snprintf(buf, sizeof buf, "mae_w,%ld", z);
    out += buf;
    for (long hi = 0; hi < r.zone_mae_w.cols(); ++hi) {
      std::snprintf(buf, sizeof buf, ",%.6f", r.zone_mae_w(z, hi));
      out += buf;
    }
    out += "\n";
  }
  out += "building_mape_pct,all";
  for (double v : r.building_mape_pct) {
    std::snprintf(buf, sizeof buf, ",%.6f", v);
    out += buf;
  }
  out += "\n";
  return out;
}

}  // namespace dpn
