#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpn/dataset.hpp"
#include "dpn/nn.hpp"

namespace dpn {

// Deterministic latent model: a GRU encoder folds the last n_lags frames of
// (temperature, power, disturbances) into s_0, a GRU transition advances the
// latent under (setpoint, disturbances), and an MLP decodes (power, temp).
// Everything internal runs in normalized units; public entry points take and
// return physical units.

struct SsmConfig {
  int n_lags = 8;
  int d_s = 32;
  int horizon = 16;  // training rollout length
  int steps = 2200;
  int batch = 16;
  double lr = 2e-3;
  double temp_weight = 0.3;
  double clip_norm = 10.0;
  uint64_t seed = 1;
};

struct Ssm {
  SsmConfig cfg;
  NormStats stats;
  Gru encoder;     // input 2 + kDistDim
  Gru transition;  // input 1 + kDistDim
  Mlp decoder;     // d_s -> 64 -> 64 -> 2 (power_n, temp_n)
  mutable int64_t eval_count = 0;  // latent rollouts served (instrumentation)

  NamedParams params();
};

struct SsmGrads {
  Gru encoder, transition;
  Mlp decoder;
  NamedParams params();
};

Ssm make_ssm(const SsmConfig& cfg, const NormStats& stats);
SsmGrads make_ssm_grads(const Ssm& m);

// ---- batched normalized core -------------------------------------------------

struct SsmCache {
  Mat enc_h0;
  std::vector<GruCache> enc;    // n_lags entries when encoding was cached
  std::vector<GruCache> trans;  // H entries
  std::vector<MlpCache> dec;    // H entries
  Mat s0;                       // B x d_s
};

// enc_x[j]: B x (2 + kDistDim), oldest frame first
Mat ssm_encode_norm(const Ssm& m, const std::vector<Mat>& enc_x, SsmCache* cache);

struct SsmRoll {
  Mat power_n;  // B x H, unclipped
  Mat temp_n;   // B x H
};
// act_n: B x H; dist_n[t]: B x kDistDim
SsmRoll ssm_rollout_norm(const Ssm& m, const Mat& s0, const Mat& act_n,
                         const std::vector<Mat>& dist_n, SsmCache* cache);

// Reverse pass for a cached encode+rollout. dpower_n/dtemp_n: B x H. Any of
// (grads, dact_n, ds0) may be null; encoder gradients are only computed when
// the cache holds encoder steps and ds0 is null.
void ssm_backward(const Ssm& m, const SsmCache& cache, const Mat& dpower_n, const Mat& dtemp_n,
                  SsmGrads* grads, Mat* dact_n, Mat* ds0);

// ---- physical-unit wrappers ---------------------------------------------------

// obs/dist windows: exactly n_lags rows, oldest first
Eigen::VectorXd ssm_encode(const Ssm& m, const std::vector<Observation>& obs,
                           const std::vector<Disturbance>& dist);

struct SsmPrediction {
  std::vector<double> power_w;  // clipped at 0
  std::vector<double> temp_c;
  Eigen::VectorXd power_n_raw;  // unclipped, normalized (consensus arithmetic)
};
SsmPrediction ssm_rollout(const Ssm& m, const Eigen::VectorXd& s0,
                          const std::vector<double>& setpoints_c,
                          const std::vector<Disturbance>& dist);

// Local planning objective on one latent rollout:
//   cost = ||a - a_base||^2 + lambda . (u_bar - u) + (rho/2) ||u_bar - u||^2
// in normalized units with u the unclipped decoded power.
struct LocalCost {
  Eigen::VectorXd base_act_n;  // H
  Eigen::VectorXd u_bar_n;     // H
  Eigen::VectorXd lambda;      // H
  double rho = 0;
  double delta_weight = 1.0;   // scales the ||a - a_base||^2 term
};
struct CostEval {
  double cost = 0;
  Eigen::VectorXd grad_act_n;  // H
  Eigen::VectorXd power_n;     // H, unclipped
};
CostEval ssm_plan_eval(const Ssm& m, const Eigen::VectorXd& s0, const Eigen::VectorXd& act_n,
                       const std::vector<Disturbance>& dist, const LocalCost& cost);

// ---- training -----------------------------------------------------------------

struct TrainCurve {
  std::vector<double> loss;  // per optimizer step
};

// One training batch: enc_x as in ssm_encode_norm, act/dist/targets as in
// ssm_rollout_norm. Returns the scalar loss and accumulates parameter
// gradients when grads is non-null. Exposed so gradient checks can drive the
// exact code path the trainer uses.
struct SsmBatch {
  std::vector<Mat> enc_x;   // n_lags entries, B x (2 + kDistDim)
  Mat act;                  // B x H
  std::vector<Mat> dist;    // H entries, B x kDistDim
  Mat tgt_u, tgt_T;         // B x H
};
double ssm_loss(const Ssm& m, const SsmBatch& batch, SsmGrads* grads);

TrainCurve train_ssm(Ssm* m, const ZoneView& train);

// ---- checkpoints ----------------------------------------------------------------

std::string ssm_to_json(const Ssm& m);
Ssm ssm_from_json(const std::string& text);
void write_ssm(const std::string& path, const Ssm& m);
Ssm read_ssm(const std::string& path);

}  // namespace dpn
