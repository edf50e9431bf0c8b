#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "dpn/rng.hpp"

namespace dpn {

using Mat = Eigen::MatrixXd;  // activations are batch-major: (batch x dim)

Mat sigmoid(const Mat& x);

// ---- linear ----------------------------------------------------------------

struct Linear {
  Mat W;  // out x in
  Mat b;  // out x 1
};

void init_linear(Linear* p, int in, int out, Rng* rng);
Mat linear_forward(const Linear& p, const Mat& x);
// accumulates into g, returns dx
Mat linear_backward(const Linear& p, const Mat& x, const Mat& dy, Linear* g);

// ---- GRU cell --------------------------------------------------------------
// r = sig(Wx_r x + bx_r + Wh_r h + bh_r)
// z = sig(Wx_z x + bx_z + Wh_z h + bh_z)
// n = tanh(Wx_n x + bx_n + r . (Wh_n h + bh_n))
// h' = (1 - z) . n + z . h
// With all-zero weights and zero h this gives h' = 0, which the latent-state
// tests rely on.

struct Gru {
  Mat Wx;  // 3h x in, gate order r, z, n
  Mat Wh;  // 3h x h
  Mat bx;  // 3h x 1
  Mat bh;  // 3h x 1
  int hidden() const { return static_cast<int>(Wh.cols()); }
};

struct GruCache {
  Mat x, h_prev, r, z, n, hn_pre;
};

void init_gru(Gru* p, int in, int hidden, Rng* rng);
Mat gru_forward(const Gru& p, const Mat& x, const Mat& h_prev, GruCache* cache);
// accumulates into g; dx and dh_prev are optional outputs
void gru_backward(const Gru& p, const GruCache& c, const Mat& dh_new, Gru* g, Mat* dx,
                  Mat* dh_prev);

// ---- MLP (tanh hidden activations, linear output) ---------------------------

struct Mlp {
  std::vector<Linear> layers;
};

struct MlpCache {
  std::vector<Mat> inputs;  // input to each layer
};

void init_mlp(Mlp* p, const std::vector<int>& dims, Rng* rng);
Mlp make_grad_like(const Mlp& p);
Mat mlp_forward(const Mlp& p, const Mat& x, MlpCache* cache);
Mat mlp_backward(const Mlp& p, const MlpCache& c, const Mat& dy, Mlp* g);

// ---- parameter registry / optimizer -----------------------------------------

using NamedParams = std::vector<std::pair<std::string, Mat*>>;

void append_params(NamedParams* out, const std::string& prefix, Linear* p);
void append_params(NamedParams* out, const std::string& prefix, Gru* p);
void append_params(NamedParams* out, const std::string& prefix, Mlp* p);

void zero_all(const NamedParams& params);

struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
  std::vector<Mat> m, v;

  void init(const NamedParams& params);
  void step(const NamedParams& params, const NamedParams& grads);
};

double global_norm(const NamedParams& grads);
void scale_grads(const NamedParams& grads, double factor);

}  // namespace dpn
