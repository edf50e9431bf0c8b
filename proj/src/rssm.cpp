#include "dpn/rssm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dpn/json_io.hpp"

namespace dpn {

namespace {
double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }
}  // namespace

NamedParams Rssm::params() {
  NamedParams out;
  append_params(&out, "f", &f);
  append_params(&out, "prior", &prior_head);
  append_params(&out, "posterior", &post_head);
  append_params(&out, "decoder", &decoder);
  return out;
}

NamedParams RssmGrads::params() {
  NamedParams out;
  append_params(&out, "f", &f);
  append_params(&out, "prior", &prior_head);
  append_params(&out, "posterior", &post_head);
  append_params(&out, "decoder", &decoder);
  return out;
}

Rssm make_rssm(const RssmConfig& cfg, const NormStats& stats) {
  Rssm m;
  m.cfg = cfg;
  m.stats = stats;
  Rng rng = substream(cfg.seed, 0xE1);
  init_gru(&m.f, cfg.d_s + 1 + kDistDim, cfg.d_h, &rng);
  init_mlp(&m.prior_head, {cfg.d_h, cfg.d_h, 2 * cfg.d_s}, &rng);
  init_mlp(&m.post_head, {cfg.d_h + 2, 64, 2 * cfg.d_s}, &rng);
  init_mlp(&m.decoder, {cfg.d_h + cfg.d_s, 64, 64, 2}, &rng);
  return m;
}

RssmGrads make_rssm_grads(const Rssm& m) {
  RssmGrads g;
  g.f.Wx = Mat::Zero(m.f.Wx.rows(), m.f.Wx.cols());
  g.f.Wh = Mat::Zero(m.f.Wh.rows(), m.f.Wh.cols());
  g.f.bx = Mat::Zero(m.f.bx.rows(), 1);
  g.f.bh = Mat::Zero(m.f.bh.rows(), 1);
  g.prior_head = make_grad_like(m.prior_head);
  g.post_head = make_grad_like(m.post_head);
  g.decoder = make_grad_like(m.decoder);
  return g;
}

void split_gaussian(const Rssm& m, const Mat& head_out, Mat* mu, Mat* sigma, Mat* raw) {
  const int d = m.cfg.d_s;
  *mu = head_out.leftCols(d);
  Mat r = head_out.rightCols(d);
  if (raw) *raw = r;
  sigma->resize(r.rows(), r.cols());
  for (long i = 0; i < r.rows(); ++i)
    for (long j = 0; j < r.cols(); ++j)
      (*sigma)(i, j) = softplus(r(i, j)) + m.cfg.sigma_floor;
}

RssmState rssm_filter(const Rssm& m, const std::vector<Observation>& obs,
                      const std::vector<Action>& act, const std::vector<Disturbance>& dist) {
  const int L = m.cfg.n_lags;
  if (static_cast<int>(obs.size()) != L || static_cast<int>(act.size()) != L ||
      static_cast<int>(dist.size()) != L)
    throw std::invalid_argument("filter windows must have n_lags rows");

  auto obs_row = [&](int j) {
    Mat o(1, 2);
    o(0, 0) = m.stats.norm_temp(obs[static_cast<size_t>(j)].zone_temp_c);
    o(0, 1) = m.stats.norm_power(obs[static_cast<size_t>(j)].hvac_w);
    return o;
  };

  Mat h = Mat::Zero(1, m.cfg.d_h);
  Mat post_in(1, m.cfg.d_h + 2);
  post_in << h, obs_row(0);
  Mat mu, sig;
  split_gaussian(m, mlp_forward(m.post_head, post_in, nullptr), &mu, &sig, nullptr);
  Mat s = mu;

  for (int j = 1; j < L; ++j) {
    Mat x(1, m.cfg.d_s + 1 + kDistDim);
    x.leftCols(m.cfg.d_s) = s;
    x(0, m.cfg.d_s) = m.stats.norm_setpoint(act[static_cast<size_t>(j - 1)].setpoint_c);
    x.rightCols(kDistDim) = m.stats.norm_dist(dist[static_cast<size_t>(j - 1)]).transpose();
    h = gru_forward(m.f, x, h, nullptr);
    post_in << h, obs_row(j);
    split_gaussian(m, mlp_forward(m.post_head, post_in, nullptr), &mu, &sig, nullptr);
    s = mu;
  }
  RssmState st;
  st.h = h.row(0).transpose();
  st.s = s.row(0).transpose();
  return st;
}

RssmSamples rssm_rollout_batch(const Rssm& m, const RssmState& st, const Mat& act_n,
                               const std::vector<Disturbance>& dist, Rng* rng) {
  const long B = act_n.rows();
  const int H = static_cast<int>(act_n.cols());
  if (static_cast<int>(dist.size()) != H)
    throw std::invalid_argument("action/disturbance length mismatch");

  Mat h = st.h.transpose().replicate(B, 1);
  Mat s = st.s.transpose().replicate(B, 1);

  RssmSamples out;
  out.power_w.resize(B, H);
  out.power_n.resize(B, H);
  out.temp_c.resize(B, H);

  Mat x(B, m.cfg.d_s + 1 + kDistDim);
  Mat eps(B, m.cfg.d_s);
  for (int t = 0; t < H; ++t) {
    x.leftCols(m.cfg.d_s) = s;
    x.col(m.cfg.d_s) = act_n.col(t);
    x.rightCols(kDistDim) =
        m.stats.norm_dist(dist[static_cast<size_t>(t)]).transpose().replicate(B, 1);
    h = gru_forward(m.f, x, h, nullptr);
    Mat mu, sig;
    split_gaussian(m, mlp_forward(m.prior_head, h, nullptr), &mu, &sig, nullptr);
    for (long i = 0; i < B; ++i)
      for (int j = 0; j < m.cfg.d_s; ++j) eps(i, j) = rng->normal();
    s = mu + (sig.array() * eps.array()).matrix();
    Mat dec_in(B, m.cfg.d_h + m.cfg.d_s);
    dec_in << h, s;
    Mat y = mlp_forward(m.decoder, dec_in, nullptr);
    out.power_n.col(t) = y.col(0);
    for (long i = 0; i < B; ++i) {
      out.power_w(i, t) = std::max(0.0, m.stats.denorm_power(y(i, 0)));
      out.temp_c(i, t) = m.stats.denorm_temp(y(i, 1));
    }
  }
  m.eval_count += B * H;
  return out;
}

RssmSamples rssm_rollout_samples(const Rssm& m, const RssmState& st,
                                 const std::vector<double>& setpoints_c,
                                 const std::vector<Disturbance>& dist, int k, Rng* rng) {
  const int H = static_cast<int>(setpoints_c.size());
  Mat act(k, H);
  for (int t = 0; t < H; ++t)
    act.col(t).setConstant(m.stats.norm_setpoint(setpoints_c[static_cast<size_t>(t)]));
  return rssm_rollout_batch(m, st, act, dist, rng);
}

RssmStepOut rssm_step(const Rssm& m, const Eigen::VectorXd& h, const Eigen::VectorXd& s,
                      double setpoint_c, const Disturbance& dist, Rng* rng) {
  RssmState st;
  st.h = h;
  st.s = s;
  Mat act(1, 1);
  act(0, 0) = m.stats.norm_setpoint(setpoint_c);

  Mat x(1, m.cfg.d_s + 1 + kDistDim);
  x.leftCols(m.cfg.d_s) = s.transpose();
  x(0, m.cfg.d_s) = act(0, 0);
  x.rightCols(kDistDim) = m.stats.norm_dist(dist).transpose();
  Mat hh = gru_forward(m.f, x, h.transpose(), nullptr);
  Mat mu, sig;
  split_gaussian(m, mlp_forward(m.prior_head, hh, nullptr), &mu, &sig, nullptr);
  Mat eps(1, m.cfg.d_s);
  for (int j = 0; j < m.cfg.d_s; ++j) eps(0, j) = rng->normal();
  Mat ss = mu + (sig.array() * eps.array()).matrix();
  Mat dec_in(1, m.cfg.d_h + m.cfg.d_s);
  dec_in << hh, ss;
  Mat y = mlp_forward(m.decoder, dec_in, nullptr);
  m.eval_count += 1;

  RssmStepOut out;
  out.h = hh.row(0).transpose();
  out.s = ss.row(0).transpose();
  out.mu = mu.row(0).transpose();
  out.sigma = sig.row(0).transpose();
  out.power_n = y(0, 0);
  out.power_w = std::max(0.0, m.stats.denorm_power(y(0, 0)));
  out.temp_c = m.stats.denorm_temp(y(0, 1));
  return out;
}

double rssm_elbo(const Rssm& m, const RssmBatch& batch, const std::vector<Mat>& eps,
                 RssmGrads* grads, double* recon_out, double* kl_out) {
  const RssmConfig& cfg = m.cfg;
  const int K = batch.K;
  const long B = batch.obs.rows();
  const int ds = cfg.d_s, dh = cfg.d_h;
  if (static_cast<int>(eps.size()) != K) throw std::invalid_argument("need K noise blocks");

  std::vector<GruCache> cf(static_cast<size_t>(K));
  std::vector<MlpCache> cp(static_cast<size_t>(K)), cq(static_cast<size_t>(K)),
      cd(static_cast<size_t>(K));
  std::vector<Mat> mu_p(static_cast<size_t>(K)), sig_p(static_cast<size_t>(K)),
      raw_p(static_cast<size_t>(K)), mu_q(static_cast<size_t>(K)), sig_q(static_cast<size_t>(K)),
      raw_q(static_cast<size_t>(K)), y_seq(static_cast<size_t>(K));
  std::vector<Eigen::VectorXd> kl_row(static_cast<size_t>(K));

  // ---- forward ----
  double recon_sum = 0, kl_floored_sum = 0;
  Mat h = Mat::Zero(B, dh);
  Mat s;
  for (int k = 0; k < K; ++k) {
    if (k > 0) {
      Mat x(B, ds + 1 + kDistDim);
      x.leftCols(ds) = s;
      x.col(ds) = batch.acts.col(k - 1);
      for (long b = 0; b < B; ++b) x.row(b).tail(kDistDim) = batch.dists.row(b * K + k - 1);
      h = gru_forward(m.f, x, h, &cf[static_cast<size_t>(k)]);
    }
    split_gaussian(m, mlp_forward(m.prior_head, h, &cp[static_cast<size_t>(k)]),
                   &mu_p[static_cast<size_t>(k)], &sig_p[static_cast<size_t>(k)],
                   &raw_p[static_cast<size_t>(k)]);
    Mat post_in(B, dh + 2);
    post_in.leftCols(dh) = h;
    post_in.col(dh) = batch.obs.col(2 * k);
    post_in.col(dh + 1) = batch.obs.col(2 * k + 1);
    split_gaussian(m, mlp_forward(m.post_head, post_in, &cq[static_cast<size_t>(k)]),
                   &mu_q[static_cast<size_t>(k)], &sig_q[static_cast<size_t>(k)],
                   &raw_q[static_cast<size_t>(k)]);
    s = mu_q[static_cast<size_t>(k)] +
        (sig_q[static_cast<size_t>(k)].array() * eps[static_cast<size_t>(k)].array()).matrix();

    Mat dec_in(B, dh + ds);
    dec_in.leftCols(dh) = h;
    dec_in.rightCols(ds) = s;
    Mat y = mlp_forward(m.decoder, dec_in, &cd[static_cast<size_t>(k)]);
    y_seq[static_cast<size_t>(k)] = y;
    recon_sum += (y.col(0) - batch.obs.col(2 * k + 1)).squaredNorm() +
                 cfg.temp_weight * (y.col(1) - batch.obs.col(2 * k)).squaredNorm();

    // KL(q || p) summed over latent dims, per batch row
    const auto& mq = mu_q[static_cast<size_t>(k)].array();
    const auto& mp = mu_p[static_cast<size_t>(k)].array();
    const auto& sq = sig_q[static_cast<size_t>(k)].array();
    const auto& sp = sig_p[static_cast<size_t>(k)].array();
    Eigen::ArrayXXd kl =
        (sp / sq).log() + (sq.square() + (mq - mp).square()) / (2.0 * sp.square()) - 0.5;
    kl_row[static_cast<size_t>(k)] = kl.rowwise().sum().matrix();
    for (long b = 0; b < B; ++b)
      kl_floored_sum += std::max(kl_row[static_cast<size_t>(k)][b], cfg.free_nats);
  }
  const double denom = static_cast<double>(B) * K;
  double loss = (recon_sum + kl_floored_sum) / denom;
  if (recon_out) *recon_out = recon_sum / denom;
  if (kl_out) *kl_out = kl_floored_sum / denom;
  if (!grads) return loss;

  // ---- backward ----
  Mat dh_acc = Mat::Zero(B, dh);
  Mat ds_acc = Mat::Zero(B, ds);
  for (int k = K - 1; k >= 0; --k) {
    const Mat& y = y_seq[static_cast<size_t>(k)];
    Mat dy(B, 2);
    dy.col(0) = 2.0 * (y.col(0) - batch.obs.col(2 * k + 1)) / denom;
    dy.col(1) = 2.0 * cfg.temp_weight * (y.col(1) - batch.obs.col(2 * k)) / denom;
    Mat ddec_in = mlp_backward(m.decoder, cd[static_cast<size_t>(k)], dy, &grads->decoder);
    dh_acc += ddec_in.leftCols(dh);
    ds_acc += ddec_in.rightCols(ds);

    // sample path
    Mat dmu_q = ds_acc;
    Mat dsig_q = (ds_acc.array() * eps[static_cast<size_t>(k)].array()).matrix();

    // KL path, masked where the floor is active
    const auto& mq = mu_q[static_cast<size_t>(k)].array();
    const auto& mp = mu_p[static_cast<size_t>(k)].array();
    const auto& sq = sig_q[static_cast<size_t>(k)].array();
    const auto& sp = sig_p[static_cast<size_t>(k)].array();
    Eigen::ArrayXd mask(B);
    for (long b = 0; b < B; ++b)
      mask[b] = kl_row[static_cast<size_t>(k)][b] > cfg.free_nats ? 1.0 / denom : 0.0;
    Eigen::ArrayXXd dmu_masked = ((mq - mp) / sp.square()).colwise() * mask;
    dmu_q += dmu_masked.matrix();
    Mat dmu_p = (-dmu_masked).matrix();
    dsig_q += (((sq / sp.square()) - sq.inverse()).colwise() * mask).matrix();
    Mat dsig_p =
        ((sp.inverse() - (sq.square() + (mq - mp).square()) / sp.cube()).colwise() * mask)
            .matrix();

    // heads; sigma = softplus(raw) + floor so d sigma / d raw = sigmoid(raw)
    Mat dpost_out(B, 2 * ds);
    dpost_out.leftCols(ds) = dmu_q;
    dpost_out.rightCols(ds) =
        (dsig_q.array() * sigmoid(raw_q[static_cast<size_t>(k)]).array()).matrix();
    Mat dpost_in =
        mlp_backward(m.post_head, cq[static_cast<size_t>(k)], dpost_out, &grads->post_head);
    dh_acc += dpost_in.leftCols(dh);

    Mat dprior_out(B, 2 * ds);
    dprior_out.leftCols(ds) = dmu_p;
    dprior_out.rightCols(ds) =
        (dsig_p.array() * sigmoid(raw_p[static_cast<size_t>(k)]).array()).matrix();
    dh_acc +=
        mlp_backward(m.prior_head, cp[static_cast<size_t>(k)], dprior_out, &grads->prior_head);

    if (k > 0) {
      Mat dx, dh_prev;
      gru_backward(m.f, cf[static_cast<size_t>(k)], dh_acc, &grads->f, &dx, &dh_prev);
      ds_acc = dx.leftCols(ds);
      dh_acc = std::move(dh_prev);
    }
  }
  return loss;
}

RssmCurve train_rssm(Rssm* m, const ZoneView& train) {
  const RssmConfig& cfg = m->cfg;
  const int K = cfg.n_lags + cfg.horizon;
  const int B = cfg.batch;
  const int last = train.n - K;
  if (last <= 0) throw std::invalid_argument("training series too short");

  RssmGrads grads = make_rssm_grads(*m);
  NamedParams ps = m->params();
  NamedParams gs = grads.params();
  Adam opt;
  opt.lr = cfg.lr;
  opt.init(ps);

  Rng draw = substream(cfg.seed, 0xE2);
  Rng noise = substream(cfg.seed, 0xE3);

  RssmCurve curve;
  curve.loss.reserve(static_cast<size_t>(cfg.steps));

  RssmBatch batch;
  batch.K = K;
  batch.obs.resize(B, 2 * K);
  batch.acts.resize(B, K);
  batch.dists.resize(B * K, kDistDim);
  std::vector<Mat> eps(static_cast<size_t>(K), Mat(B, cfg.d_s));

  for (int step = 0; step < cfg.steps; ++step) {
    for (int b = 0; b < B; ++b) {
      int w0 = draw.uniform_int(0, last);
      for (int k = 0; k < K; ++k) {
        batch.obs(b, 2 * k) = train.temp_n[w0 + k];
        batch.obs(b, 2 * k + 1) = train.power_n[w0 + k];
        batch.acts(b, k) = train.act_n[w0 + k];
        batch.dists.row(b * K + k) = train.dist_n.row(w0 + k);
      }
    }
    for (int k = 0; k < K; ++k)
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < cfg.d_s; ++j) eps[static_cast<size_t>(k)](b, j) = noise.normal();

    zero_all(gs);
    double recon = 0, kl = 0;
    double loss = rssm_elbo(*m, batch, eps, &grads, &recon, &kl);

    double gn = global_norm(gs);
    if (gn > cfg.clip_norm) scale_grads(gs, cfg.clip_norm / gn);
    opt.step(ps, gs);
    curve.loss.push_back(loss);
    curve.recon.push_back(recon);
    curve.kl.push_back(kl);
  }
  return curve;
}

std::string rssm_to_json(const Rssm& m) {
  nlohmann::json j;
  j["arch"]["kind"] = "rssm";
  j["arch"]["n_lags"] = m.cfg.n_lags;
  j["arch"]["d_s"] = m.cfg.d_s;
  j["arch"]["d_h"] = m.cfg.d_h;
  j["arch"]["dist_dim"] = kDistDim;
  j["seed"] = m.cfg.seed;
  j["train_config"]["horizon"] = m.cfg.horizon;
  j["train_config"]["steps"] = m.cfg.steps;
  j["train_config"]["batch"] = m.cfg.batch;
  j["train_config"]["lr"] = m.cfg.lr;
  j["train_config"]["temp_weight"] = m.cfg.temp_weight;
  j["train_config"]["free_nats"] = m.cfg.free_nats;
  j["train_config"]["sigma_floor"] = m.cfg.sigma_floor;
  j["train_config"]["clip_norm"] = m.cfg.clip_norm;
  j["norm_stats"] = stats_to_json(m.stats);
  j["weights"] = params_to_json(const_cast<Rssm&>(m).params());
  return j.dump();
}

Rssm rssm_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("arch").at("kind").get<std::string>() != "rssm")
    throw std::runtime_error("checkpoint is not an rssm");
  RssmConfig cfg;
  cfg.n_lags = j.at("arch").at("n_lags").get<int>();
  cfg.d_s = j.at("arch").at("d_s").get<int>();
  cfg.d_h = j.at("arch").at("d_h").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.horizon = j.at("train_config").at("horizon").get<int>();
  cfg.steps = j.at("train_config").at("steps").get<int>();
  cfg.batch = j.at("train_config").at("batch").get<int>();
  cfg.lr = j.at("train_config").at("lr").get<double>();
  cfg.temp_weight = j.at("train_config").at("temp_weight").get<double>();
  cfg.free_nats = j.at("train_config").at("free_nats").get<double>();
  cfg.sigma_floor = j.at("train_config").at("sigma_floor").get<double>();
  cfg.clip_norm = j.at("train_config").at("clip_norm").get<double>();
  Rssm m = make_rssm(cfg, stats_from_json(j.at("norm_stats")));
  params_from_json(j.at("weights"), m.params());
  return m;
}

void write_rssm(const std::string& path, const Rssm& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << rssm_to_json(m) << "\n";
}

Rssm read_rssm(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return rssm_from_json(ss.str());
}

}  // namespace dpn
