#include "dpn/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dpn {

Mat sigmoid(const Mat& x) { return ((-x.array()).exp() + 1.0).inverse().matrix(); }

namespace {
Mat glorot(int rows, int cols, int fan_in, int fan_out, Rng* rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng->uniform(-limit, limit);
  return m;
}
}  // namespace

void init_linear(Linear* p, int in, int out, Rng* rng) {
  p->W = glorot(out, in, in, out, rng);
  p->b = Mat::Zero(out, 1);
}

Mat linear_forward(const Linear& p, const Mat& x) {
  return (x * p.W.transpose()).rowwise() + p.b.col(0).transpose();
}

Mat linear_backward(const Linear& p, const Mat& x, const Mat& dy, Linear* g) {
  g->W.noalias() += dy.transpose() * x;
  g->b.col(0) += dy.colwise().sum().transpose();
  return dy * p.W;
}

void init_gru(Gru* p, int in, int hidden, Rng* rng) {
  p->Wx = glorot(3 * hidden, in, in + hidden, hidden, rng);
  p->Wh = glorot(3 * hidden, hidden, in + hidden, hidden, rng);
  p->bx = Mat::Zero(3 * hidden, 1);
  p->bh = Mat::Zero(3 * hidden, 1);
}

Mat gru_forward(const Gru& p, const Mat& x, const Mat& h_prev, GruCache* cache) {
  const int h = p.hidden();
  Mat gx = (x * p.Wx.transpose()).rowwise() + p.bx.col(0).transpose();       // B x 3h
  Mat gh = (h_prev * p.Wh.transpose()).rowwise() + p.bh.col(0).transpose();  // B x 3h

  Mat r = sigmoid(gx.leftCols(h) + gh.leftCols(h));
  Mat z = sigmoid(gx.middleCols(h, h) + gh.middleCols(h, h));
  Mat hn_pre = gh.rightCols(h);
  Mat n = (gx.rightCols(h).array() + r.array() * hn_pre.array()).tanh().matrix();
  Mat h_new = ((1.0 - z.array()) * n.array() + z.array() * h_prev.array()).matrix();

  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->n = std::move(n);
    cache->hn_pre = std::move(hn_pre);
  }
  return h_new;
}

void gru_backward(const Gru& p, const GruCache& c, const Mat& dh_new, Gru* g, Mat* dx,
                  Mat* dh_prev) {
  const int h = p.hidden();
  const long B = dh_new.rows();

  Mat dz = (dh_new.array() * (c.h_prev.array() - c.n.array())).matrix();
  Mat dn = (dh_new.array() * (1.0 - c.z.array())).matrix();
  Mat dn_pre = (dn.array() * (1.0 - c.n.array().square())).matrix();
  Mat dr = (dn_pre.array() * c.hn_pre.array()).matrix();
  Mat dhn_pre = (dn_pre.array() * c.r.array()).matrix();
  Mat dz_pre = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
  Mat dr_pre = (dr.array() * c.r.array() * (1.0 - c.r.array())).matrix();

  Mat dgx(B, 3 * h), dgh(B, 3 * h);
  dgx.leftCols(h) = dr_pre;
  dgx.middleCols(h, h) = dz_pre;
  dgx.rightCols(h) = dn_pre;
  dgh.leftCols(h) = dr_pre;
  dgh.middleCols(h, h) = dz_pre;
  dgh.rightCols(h) = dhn_pre;

  g->Wx.noalias() += dgx.transpose() * c.x;
  g->Wh.noalias() += dgh.transpose() * c.h_prev;
  g->bx.col(0) += dgx.colwise().sum().transpose();
  g->bh.col(0) += dgh.colwise().sum().transpose();

  if (dx) *dx = dgx * p.Wx;
  if (dh_prev) *dh_prev = dgh * p.Wh + (dh_new.array() * c.z.array()).matrix();
}

void init_mlp(Mlp* p, const std::vector<int>& dims, Rng* rng) {
  if (dims.size() < 2) throw std::invalid_argument("mlp needs at least one layer");
  p->layers.resize(dims.size() - 1);
  for (size_t i = 0; i + 1 < dims.size(); ++i)
    init_linear(&p->layers[i], dims[i], dims[i + 1], rng);
}

Mlp make_grad_like(const Mlp& p) {
  Mlp g;
  g.layers.resize(p.layers.size());
  for (size_t i = 0; i < p.layers.size(); ++i) {
    g.layers[i].W = Mat::Zero(p.layers[i].W.rows(), p.layers[i].W.cols());
    g.layers[i].b = Mat::Zero(p.layers[i].b.rows(), 1);
  }
  return g;
}

Mat mlp_forward(const Mlp& p, const Mat& x, MlpCache* cache) {
  if (cache) cache->inputs.clear();
  Mat cur = x;
  for (size_t i = 0; i < p.layers.size(); ++i) {
    if (cache) cache->inputs.push_back(cur);
    cur = linear_forward(p.layers[i], cur);
    if (i + 1 < p.layers.size()) cur = cur.array().tanh().matrix();
  }
  return cur;
}

Mat mlp_backward(const Mlp& p, const MlpCache& c, const Mat& dy, Mlp* g) {
  Mat d = dy;
  for (size_t i = p.layers.size(); i-- > 0;) {
    if (i + 1 < p.layers.size()) {
      // redo the cheap activation to avoid caching outputs
      Mat act = linear_forward(p.layers[i], c.inputs[i]).array().tanh().matrix();
      d = (d.array() * (1.0 - act.array().square())).matrix();
    }
    d = linear_backward(p.layers[i], c.inputs[i], d, &g->layers[i]);
  }
  return d;
}

void append_params(NamedParams* out, const std::string& prefix, Linear* p) {
  out->emplace_back(prefix + ".W", &p->W);
  out->emplace_back(prefix + ".b", &p->b);
}

void append_params(NamedParams* out, const std::string& prefix, Gru* p) {
  out->emplace_back(prefix + ".Wx", &p->Wx);
  out->emplace_back(prefix + ".Wh", &p->Wh);
  out->emplace_back(prefix + ".bx", &p->bx);
  out->emplace_back(prefix + ".bh", &p->bh);
}

void append_params(NamedParams* out, const std::string& prefix, Mlp* p) {
  for (size_t i = 0; i < p->layers.size(); ++i)
    append_params(out, prefix + ".l" + std::to_string(i), &p->layers[i]);
}

void zero_all(const NamedParams& params) {
  for (auto& [name, m] : params) m->setZero();
}

void Adam::init(const NamedParams& params) {
  t = 0;
  m.clear();
  v.clear();
  for (auto& [name, p] : params) {
    m.push_back(Mat::Zero(p->rows(), p->cols()));
    v.push_back(Mat::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const NamedParams& params, const NamedParams& grads) {
  if (params.size() != grads.size() || params.size() != m.size())
    throw std::invalid_argument("optimizer/parameter mismatch");
  ++t;
  double c1 = 1.0 - std::pow(beta1, t);
  double c2 = 1.0 - std::pow(beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    const Mat& gr = *grads[i].second;
    m[i] = beta1 * m[i] + (1.0 - beta1) * gr;
    v[i] = (beta2 * v[i].array() + (1.0 - beta2) * gr.array().square()).matrix();
    params[i].second->array() -=
        lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
  }
}

double global_norm(const NamedParams& grads) {
  double s = 0;
  for (auto& [name, g] : grads) s += g->squaredNorm();
  return std::sqrt(s);
}

void scale_grads(const NamedParams& grads, double factor) {
  for (auto& [name, g] : grads) *g *= factor;
}

}  // namespace dpn
