#include "dpn/ssm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dpn/json_io.hpp"

namespace dpn {

NamedParams Ssm::params() {
  NamedParams out;
  append_params(&out, "encoder", &encoder);
  append_params(&out, "transition", &transition);
  append_params(&out, "decoder", &decoder);
  return out;
}

NamedParams SsmGrads::params() {
  NamedParams out;
  append_params(&out, "encoder", &encoder);
  append_params(&out, "transition", &transition);
  append_params(&out, "decoder", &decoder);
  return out;
}

Ssm make_ssm(const SsmConfig& cfg, const NormStats& stats) {
  Ssm m;
  m.cfg = cfg;
  m.stats = stats;
  Rng rng = substream(cfg.seed, 0xD1);
  init_gru(&m.encoder, 2 + kDistDim, cfg.d_s, &rng);
  init_gru(&m.transition, 1 + kDistDim, cfg.d_s, &rng);
  init_mlp(&m.decoder, {cfg.d_s, 64, 64, 2}, &rng);
  return m;
}

SsmGrads make_ssm_grads(const Ssm& m) {
  SsmGrads g;
  g.encoder.Wx = Mat::Zero(m.encoder.Wx.rows(), m.encoder.Wx.cols());
  g.encoder.Wh = Mat::Zero(m.encoder.Wh.rows(), m.encoder.Wh.cols());
  g.encoder.bx = Mat::Zero(m.encoder.bx.rows(), 1);
  g.encoder.bh = Mat::Zero(m.encoder.bh.rows(), 1);
  g.transition.Wx = Mat::Zero(m.transition.Wx.rows(), m.transition.Wx.cols());
  g.transition.Wh = Mat::Zero(m.transition.Wh.rows(), m.transition.Wh.cols());
  g.transition.bx = Mat::Zero(m.transition.bx.rows(), 1);
  g.transition.bh = Mat::Zero(m.transition.bh.rows(), 1);
  g.decoder = make_grad_like(m.decoder);
  return g;
}

Mat ssm_encode_norm(const Ssm& m, const std::vector<Mat>& enc_x, SsmCache* cache) {
  if (static_cast<int>(enc_x.size()) != m.cfg.n_lags)
    throw std::invalid_argument("encoder needs n_lags frames");
  const long B = enc_x[0].rows();
  Mat h = Mat::Zero(B, m.cfg.d_s);
  if (cache) {
    cache->enc.assign(static_cast<size_t>(m.cfg.n_lags), GruCache{});
    cache->enc_h0 = h;
  }
  for (int j = 0; j < m.cfg.n_lags; ++j)
    h = gru_forward(m.encoder, enc_x[static_cast<size_t>(j)], h,
                    cache ? &cache->enc[static_cast<size_t>(j)] : nullptr);
  if (cache) cache->s0 = h;
  return h;
}

SsmRoll ssm_rollout_norm(const Ssm& m, const Mat& s0, const Mat& act_n,
                         const std::vector<Mat>& dist_n, SsmCache* cache) {
  const long B = s0.rows();
  const int H = static_cast<int>(act_n.cols());
  if (static_cast<int>(dist_n.size()) != H)
    throw std::invalid_argument("rollout needs one disturbance row block per step");
  m.eval_count += 1;

  if (cache) {
    cache->trans.assign(static_cast<size_t>(H), GruCache{});
    cache->dec.assign(static_cast<size_t>(H), MlpCache{});
    if (cache->s0.size() == 0) cache->s0 = s0;
  }
  SsmRoll out;
  out.power_n.resize(B, H);
  out.temp_n.resize(B, H);

  Mat s = s0;
  Mat x(B, 1 + kDistDim);
  for (int t = 0; t < H; ++t) {
    x.col(0) = act_n.col(t);
    x.rightCols(kDistDim) = dist_n[static_cast<size_t>(t)];
    s = gru_forward(m.transition, x, s, cache ? &cache->trans[static_cast<size_t>(t)] : nullptr);
    Mat y = mlp_forward(m.decoder, s, cache ? &cache->dec[static_cast<size_t>(t)] : nullptr);
    out.power_n.col(t) = y.col(0);
    out.temp_n.col(t) = y.col(1);
  }
  return out;
}

void ssm_backward(const Ssm& m, const SsmCache& cache, const Mat& dpower_n, const Mat& dtemp_n,
                  SsmGrads* grads, Mat* dact_n, Mat* ds0) {
  const int H = static_cast<int>(cache.trans.size());
  const long B = dpower_n.rows();
  if (dact_n) dact_n->setZero(B, H);

  SsmGrads scratch;
  if (!grads) scratch = make_ssm_grads(m);
  SsmGrads* g = grads ? grads : &scratch;

  Mat ds = Mat::Zero(B, m.cfg.d_s);
  for (int t = H - 1; t >= 0; --t) {
    Mat dy(B, 2);
    dy.col(0) = dpower_n.col(t);
    dy.col(1) = dtemp_n.col(t);
    Mat ds_dec = mlp_backward(m.decoder, cache.dec[static_cast<size_t>(t)], dy, &g->decoder);
    ds += ds_dec;
    Mat dx, ds_prev;
    gru_backward(m.transition, cache.trans[static_cast<size_t>(t)], ds, &g->transition, &dx,
                 &ds_prev);
    if (dact_n) dact_n->col(t) = dx.col(0);
    ds = std::move(ds_prev);
  }
  if (ds0) {
    *ds0 = ds;
    return;
  }
  if (!cache.enc.empty()) {
    Mat dh = ds;
    for (int j = static_cast<int>(cache.enc.size()) - 1; j >= 0; --j) {
      Mat dh_prev;
      gru_backward(m.encoder, cache.enc[static_cast<size_t>(j)], dh, &g->encoder, nullptr,
                   &dh_prev);
      dh = std::move(dh_prev);
    }
  }
}

Eigen::VectorXd ssm_encode(const Ssm& m, const std::vector<Observation>& obs,
                           const std::vector<Disturbance>& dist) {
  if (static_cast<int>(obs.size()) != m.cfg.n_lags ||
      static_cast<int>(dist.size()) != m.cfg.n_lags)
    throw std::invalid_argument("history windows must have n_lags rows");
  std::vector<Mat> frames(static_cast<size_t>(m.cfg.n_lags));
  for (int j = 0; j < m.cfg.n_lags; ++j) {
    Mat f(1, 2 + kDistDim);
    f(0, 0) = m.stats.norm_temp(obs[static_cast<size_t>(j)].zone_temp_c);
    f(0, 1) = m.stats.norm_power(obs[static_cast<size_t>(j)].hvac_w);
    f.row(0).rightCols(kDistDim) = m.stats.norm_dist(dist[static_cast<size_t>(j)]).transpose();
    frames[static_cast<size_t>(j)] = std::move(f);
  }
  return ssm_encode_norm(m, frames, nullptr).row(0).transpose();
}

SsmPrediction ssm_rollout(const Ssm& m, const Eigen::VectorXd& s0,
                          const std::vector<double>& setpoints_c,
                          const std::vector<Disturbance>& dist) {
  const int H = static_cast<int>(setpoints_c.size());
  if (static_cast<int>(dist.size()) != H)
    throw std::invalid_argument("setpoint/disturbance length mismatch");
  Mat act(1, H);
  std::vector<Mat> dn(static_cast<size_t>(H));
  for (int t = 0; t < H; ++t) {
    act(0, t) = m.stats.norm_setpoint(setpoints_c[static_cast<size_t>(t)]);
    dn[static_cast<size_t>(t)] = m.stats.norm_dist(dist[static_cast<size_t>(t)]).transpose();
  }
  SsmRoll roll = ssm_rollout_norm(m, s0.transpose(), act, dn, nullptr);
  SsmPrediction out;
  out.power_n_raw = roll.power_n.row(0).transpose();
  out.power_w.resize(static_cast<size_t>(H));
  out.temp_c.resize(static_cast<size_t>(H));
  for (int t = 0; t < H; ++t) {
    out.power_w[static_cast<size_t>(t)] = std::max(0.0, m.stats.denorm_power(roll.power_n(0, t)));
    out.temp_c[static_cast<size_t>(t)] = m.stats.denorm_temp(roll.temp_n(0, t));
  }
  return out;
}

CostEval ssm_plan_eval(const Ssm& m, const Eigen::VectorXd& s0, const Eigen::VectorXd& act_n,
                       const std::vector<Disturbance>& dist, const LocalCost& cost) {
  const int H = static_cast<int>(act_n.size());
  Mat act = act_n.transpose();
  std::vector<Mat> dn(static_cast<size_t>(H));
  for (int t = 0; t < H; ++t)
    dn[static_cast<size_t>(t)] = m.stats.norm_dist(dist[static_cast<size_t>(t)]).transpose();

  SsmCache cache;
  cache.s0 = s0.transpose();
  SsmRoll roll = ssm_rollout_norm(m, cache.s0, act, dn, &cache);

  Eigen::VectorXd u = roll.power_n.row(0).transpose();
  Eigen::VectorXd da = act_n - cost.base_act_n;
  Eigen::VectorXd gap = cost.u_bar_n - u;

  CostEval ev;
  ev.power_n = u;
  ev.cost = cost.delta_weight * da.squaredNorm() + cost.lambda.dot(gap) +
            0.5 * cost.rho * gap.squaredNorm();

  // d cost / d u = -lambda - rho * gap
  Mat dpower = (-cost.lambda - cost.rho * gap).transpose();
  Mat dtemp = Mat::Zero(1, H);
  Mat dact;
  ssm_backward(m, cache, dpower, dtemp, nullptr, &dact, nullptr);
  ev.grad_act_n = dact.row(0).transpose() + 2.0 * cost.delta_weight * da;
  return ev;
}

double ssm_loss(const Ssm& m, const SsmBatch& batch, SsmGrads* grads) {
  const long B = batch.act.rows();
  const int H = static_cast<int>(batch.act.cols());
  SsmCache cache;
  Mat s0 = ssm_encode_norm(m, batch.enc_x, &cache);
  SsmRoll roll = ssm_rollout_norm(m, s0, batch.act, batch.dist, &cache);

  Mat eu = roll.power_n - batch.tgt_u;
  Mat eT = roll.temp_n - batch.tgt_T;
  double denom = static_cast<double>(B) * H;
  double loss = (eu.squaredNorm() + m.cfg.temp_weight * eT.squaredNorm()) / denom;
  if (grads) {
    Mat dpower = 2.0 * eu / denom;
    Mat dtemp = 2.0 * m.cfg.temp_weight * eT / denom;
    ssm_backward(m, cache, dpower, dtemp, grads, nullptr, nullptr);
  }
  return loss;
}

TrainCurve train_ssm(Ssm* m, const ZoneView& train) {
  const SsmConfig& cfg = m->cfg;
  const int L = cfg.n_lags, H = cfg.horizon, B = cfg.batch;
  const int first = L - 1;                 // earliest "present" row
  const int last = train.n - H - 1;        // latest present row with H targets
  if (last <= first) throw std::invalid_argument("training series too short");

  SsmGrads grads = make_ssm_grads(*m);
  NamedParams ps = m->params();
  NamedParams gs = grads.params();
  Adam opt;
  opt.lr = cfg.lr;
  opt.init(ps);

  Rng draw = substream(cfg.seed, 0xD2);
  TrainCurve curve;
  curve.loss.reserve(static_cast<size_t>(cfg.steps));

  SsmBatch batch;
  batch.enc_x.assign(static_cast<size_t>(L), Mat(B, 2 + kDistDim));
  batch.act.resize(B, H);
  batch.dist.assign(static_cast<size_t>(H), Mat(B, kDistDim));
  batch.tgt_u.resize(B, H);
  batch.tgt_T.resize(B, H);

  for (int step = 0; step < cfg.steps; ++step) {
    for (int b = 0; b < B; ++b) {
      int e = draw.uniform_int(first, last);
      for (int j = 0; j < L; ++j) {
        int row = e - (L - 1) + j;
        batch.enc_x[static_cast<size_t>(j)](b, 0) = train.temp_n[row];
        batch.enc_x[static_cast<size_t>(j)](b, 1) = train.power_n[row];
        batch.enc_x[static_cast<size_t>(j)].row(b).rightCols(kDistDim) = train.dist_n.row(row);
      }
      for (int t = 0; t < H; ++t) {
        batch.act(b, t) = train.act_n[e + t];
        batch.dist[static_cast<size_t>(t)].row(b) = train.dist_n.row(e + t);
        batch.tgt_u(b, t) = train.power_n[e + 1 + t];
        batch.tgt_T(b, t) = train.temp_n[e + 1 + t];
      }
    }

    zero_all(gs);
    double loss = ssm_loss(*m, batch, &grads);

    double gn = global_norm(gs);
    if (gn > cfg.clip_norm) scale_grads(gs, cfg.clip_norm / gn);
    opt.step(ps, gs);
    curve.loss.push_back(loss);
  }
  return curve;
}

std::string ssm_to_json(const Ssm& m) {
  nlohmann::json j;
  j["arch"]["kind"] = "ssm";
  j["arch"]["n_lags"] = m.cfg.n_lags;
  j["arch"]["d_s"] = m.cfg.d_s;
  j["arch"]["obs_dim"] = 2;
  j["arch"]["dist_dim"] = kDistDim;
  j["seed"] = m.cfg.seed;
  j["train_config"]["horizon"] = m.cfg.horizon;
  j["train_config"]["steps"] = m.cfg.steps;
  j["train_config"]["batch"] = m.cfg.batch;
  j["train_config"]["lr"] = m.cfg.lr;
  j["train_config"]["temp_weight"] = m.cfg.temp_weight;
  j["train_config"]["clip_norm"] = m.cfg.clip_norm;
  j["norm_stats"] = stats_to_json(m.stats);
  j["weights"] = params_to_json(const_cast<Ssm&>(m).params());
  return j.dump();
}

Ssm ssm_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("arch").at("kind").get<std::string>() != "ssm")
    throw std::runtime_error("checkpoint is not an ssm");
  SsmConfig cfg;
  cfg.n_lags = j.at("arch").at("n_lags").get<int>();
  cfg.d_s = j.at("arch").at("d_s").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.horizon = j.at("train_config").at("horizon").get<int>();
  cfg.steps = j.at("train_config").at("steps").get<int>();
  cfg.batch = j.at("train_config").at("batch").get<int>();
  cfg.lr = j.at("train_config").at("lr").get<double>();
  cfg.temp_weight = j.at("train_config").at("temp_weight").get<double>();
  cfg.clip_norm = j.at("train_config").at("clip_norm").get<double>();
  Ssm m = make_ssm(cfg, stats_from_json(j.at("norm_stats")));
  params_from_json(j.at("weights"), m.params());
  return m;
}

void write_ssm(const std::string& path, const Ssm& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << ssm_to_json(m) << "\n";
}

Ssm read_ssm(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ssm_from_json(ss.str());
}

}  // namespace dpn
