#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpn/dataset.hpp"
#include "dpn/nn.hpp"
#include "dpn/rng.hpp"

namespace dpn {

// Recurrent stochastic model: deterministic GRU core h, stochastic latent s.
//   h_k = f(h_{k-1}, [s_{k-1}, a_{k-1}, d_{k-1}])
//   prior  p(s_k | h_k)          = N(mu_p(h_k), sig_p(h_k)^2)
//   post   q(s_k | h_k, o_k)     = N(mu_q(h_k, o_k), sig_q(h_k, o_k)^2)
//   decode (power, temp) from [h_k, s_k]
// Training maximizes recon - KL with a free-nats floor on the KL; planning
// rolls the prior with sampled latents.

struct RssmConfig {
  int n_lags = 8;
  int d_s = 32;
  int d_h = 32;
  int horizon = 16;  // training rollout beyond the filtered window
  int steps = 1800;
  int batch = 12;
  double lr = 2e-3;
  double temp_weight = 0.3;
  double free_nats = 1.0;
  double sigma_floor = 1e-3;
  double clip_norm = 100.0;
  uint64_t seed = 1;
};

struct Rssm {
  RssmConfig cfg;
  NormStats stats;
  Gru f;          // input d_s + 1 + kDistDim
  Mlp prior_head; // d_h -> d_h -> 2*d_s
  Mlp post_head;  // d_h + 2 -> 64 -> 2*d_s
  Mlp decoder;    // d_h + d_s -> 64 -> 64 -> 2
  mutable int64_t eval_count = 0;  // generative model steps served

  NamedParams params();
};

struct RssmGrads {
  Gru f;
  Mlp prior_head, post_head, decoder;
  NamedParams params();
};

Rssm make_rssm(const RssmConfig& cfg, const NormStats& stats);
RssmGrads make_rssm_grads(const Rssm& m);

// mean and std from a head output [mu | raw]; std = softplus(raw) + floor
void split_gaussian(const Rssm& m, const Mat& head_out, Mat* mu, Mat* sigma, Mat* raw);

// ---- filtering ------------------------------------------------------------------

// Posterior-mean filter over exactly n_lags frames (oldest first); actions and
// disturbances are those applied between consecutive frames (n_lags - 1 of
// them would suffice; pass the rows aligned with the frames and the last one
// is unused).
struct RssmState {
  Eigen::VectorXd h, s;
};
RssmState rssm_filter(const Rssm& m, const std::vector<Observation>& obs,
                      const std::vector<Action>& act, const std::vector<Disturbance>& dist);

// ---- generative rollouts -----------------------------------------------------------

struct RssmStepOut {
  Eigen::VectorXd h, s, mu, sigma;
  double power_w = 0;   // clipped
  double power_n = 0;   // unclipped
  double temp_c = 0;
};
RssmStepOut rssm_step(const Rssm& m, const Eigen::VectorXd& h, const Eigen::VectorXd& s,
                      double setpoint_c, const Disturbance& dist, Rng* rng);

struct RssmSamples {
  Mat power_w;  // B x H, clipped at 0
  Mat power_n;  // B x H, unclipped normalized
  Mat temp_c;   // B x H
};
// k sampled trajectories from one start under one action sequence
RssmSamples rssm_rollout_samples(const Rssm& m, const RssmState& st,
                                 const std::vector<double>& setpoints_c,
                                 const std::vector<Disturbance>& dist, int k, Rng* rng);

// batched variant: row b of act_n is its own action sequence; all rows share
// the start state and the disturbance sequence. Used to score many candidate
// sequences at once.
RssmSamples rssm_rollout_batch(const Rssm& m, const RssmState& st, const Mat& act_n,
                               const std::vector<Disturbance>& dist, Rng* rng);

// ---- training ------------------------------------------------------------------

struct RssmCurve {
  std::vector<double> loss, recon, kl;  // per optimizer step; kl is post-floor
};

// One training batch over sequences of length K = n_lags + horizon. obs packs
// (temp, power) as column pairs (2k, 2k+1); dists stacks rows batch-major
// (row b*K + k). eps supplies the reparameterization noise (K entries,
// B x d_s) so the objective is deterministic given the batch; exposed for
// gradient verification against finite differences.
struct RssmBatch {
  int K = 0;
  Mat obs;    // B x 2K
  Mat acts;   // B x K
  Mat dists;  // (B*K) x kDistDim
};
double rssm_elbo(const Rssm& m, const RssmBatch& batch, const std::vector<Mat>& eps,
                 RssmGrads* grads, double* recon_out, double* kl_out);

RssmCurve train_rssm(Rssm* m, const ZoneView& train);

// ---- checkpoints ----------------------------------------------------------------

std::string rssm_to_json(const Rssm& m);
Rssm rssm_from_json(const std::string& text);
void write_rssm(const std::string& path, const Rssm& m);
Rssm read_rssm(const std::string& path);

}  // namespace dpn
