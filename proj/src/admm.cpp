#include "dpn/admm.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dpn {

Mat coordinator_solve(const Mat& u, const Mat& lambda, const Eigen::VectorXd& p_tot,
                      double rho) {
  if (rho <= 0) throw std::invalid_argument("coordinator needs rho > 0");
  if (!p_tot.allFinite()) throw std::invalid_argument("coordinator needs a finite target");
  const long N = u.rows(), H = u.cols();
  Mat v(N, H);
  for (long t = 0; t < H; ++t) {
    // stationarity: (rho*I + 2*11^T) v = rho*u_t - lambda_t + 2*1*P_t
    Eigen::VectorXd rhs = rho * u.col(t) - lambda.col(t) + Eigen::VectorXd::Constant(N, 2.0 * p_tot[t]);
    double corr = 2.0 * rhs.sum() / (rho * (rho + 2.0 * static_cast<double>(N)));
    v.col(t) = rhs / rho - Eigen::VectorXd::Constant(N, corr);
  }
  return v;
}

void dual_update(AdmmState* st, double rho) { st->lambda += rho * (st->x_bar - st->x); }

double coupling_value(const SharingSpec& spec, const Mat& v, Mat* grad) {
  if (spec.custom.eval) return spec.custom.eval(v, grad);
  double val = 0;
  for (long t = 0; t < v.cols(); ++t) {
    double gap = v.col(t).sum() - spec.p_tot[t];
    val += gap * gap;
    if (grad) grad->col(t).array() += 2.0 * gap;
  }
  return val;
}

double lagrangian_value(const SharingSpec& spec, const AdmmState& st) {
  double val = coupling_value(spec, st.x_bar, nullptr);
  for (int i = 0; i < spec.n_blocks; ++i) {
    Eigen::VectorXd di = (st.x_bar.row(i) - st.x.row(i)).transpose();
    val += spec.g(i, st.x.row(i).transpose(), nullptr);
    val += st.lambda.row(i).transpose().dot(di) + 0.5 * spec.rho * di.squaredNorm();
  }
  return val;
}

double objective_value(const SharingSpec& spec, const Mat& x) {
  double val = coupling_value(spec, x, nullptr);
  for (int i = 0; i < spec.n_blocks; ++i)
    val += spec.g(i, x.row(i).transpose(), nullptr);
  return val;
}

double primal_residual(const Mat& x_bar, const Mat& x) {
  double sq = 0;
  for (long i = 0; i < x.rows(); ++i) sq += (x_bar.row(i) - x.row(i)).squaredNorm();
  return std::sqrt(sq);
}

LcSolver quadratic_lc_solver(const SharingSpec& spec) {
  Eigen::VectorXd lo = spec.lo, hi = spec.hi;
  return [lo, hi](int i, const Eigen::VectorXd& x_bar_i, const Eigen::VectorXd& lambda_i,
                  double rho) {
    Eigen::VectorXd x = (lambda_i + rho * x_bar_i) / (2.0 + rho);
    return x.cwiseMax(lo[i]).cwiseMin(hi[i]).eval();
  };
}

AdmmState admm_init_uniform(const SharingSpec& spec, double value) {
  AdmmState st;
  st.x = Mat::Constant(spec.n_blocks, spec.block_len, value);
  st.x_bar = st.x;
  st.lambda = Mat::Zero(spec.n_blocks, spec.block_len);
  return st;
}

BatchLcSolver batch_lc(int n_blocks, const LcSolver& lc) {
  return [n_blocks, lc](const Mat& x_bar, const Mat& lambda, double rho) {
    Mat x(x_bar.rows(), x_bar.cols());
    for (int i = 0; i < n_blocks; ++i)
      x.row(i) = lc(i, x_bar.row(i).transpose(), lambda.row(i).transpose(), rho).transpose();
    return x;
  };
}

AdmmState run_admm(const SharingSpec& spec, const BatchLcSolver& lc, AdmmState st,
                   const AdmmStop& stop,
                   const std::function<void(const AdmmState&)>& on_iter) {
  const int N = spec.n_blocks;
  if (spec.custom.eval)
    throw std::invalid_argument("run_admm solves the aggregate-target coordinator only");
  for (int k = 0; k < stop.max_iter; ++k) {
    st.x = lc(st.x_bar, st.lambda, spec.rho);
    st.x_bar = coordinator_solve(st.x, st.lambda, spec.p_tot, spec.rho);
    dual_update(&st, spec.rho);
    ++st.iter;

    AdmmIterRecord rec;
    rec.lagrangian = lagrangian_value(spec, st);
    rec.block_residual.resize(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i)
      rec.block_residual[static_cast<size_t>(i)] = (st.x_bar.row(i) - st.x.row(i)).norm();
    rec.primal_residual = primal_residual(st.x_bar, st.x);
    if (!std::isfinite(rec.lagrangian) || !st.x.allFinite() || !st.x_bar.allFinite())
      throw std::runtime_error("non-finite admm iterate at iteration " + std::to_string(st.iter));
    st.history.push_back(std::move(rec));
    if (on_iter) on_iter(st);
    if (st.history.back().primal_residual < stop.primal_tol) break;
  }
  return st;
}

AssumptionReport verify_assumptions(const SharingSpec& spec) {
  AssumptionReport rep;
  if (spec.custom.eval) {
    if (!std::isfinite(spec.custom.lipschitz))
      throw std::invalid_argument("no gradient-Lipschitz bound derivable for the custom coupling");
    rep.L = spec.custom.lipschitz;
  } else {
    // ell(v) = sum_t (1^T v_t - P_t)^2 has per-timestep Hessian 2*11^T,
    // spectral norm 2N
    rep.L = 2.0 * static_cast<double>(spec.n_blocks);
  }
  rep.gamma_bar = spec.rho;
  rep.gamma_i.assign(static_cast<size_t>(spec.n_blocks), spec.mu_g + spec.rho);
  rep.rho_ge_L = spec.rho >= rep.L;
  rep.rho_gamma_ge_2L2 = spec.rho * rep.gamma_bar >= 2.0 * rep.L * rep.L;
  rep.rho_ok = rep.rho_ge_L && rep.rho_gamma_ge_2L2;
  return rep;
}

std::string admm_history_csv(const AdmmState& st) {
  std::string out = "iter,lagrangian,primal_residual";
  char buf[64];
  size_t nb = st.history.empty() ? 0 : st.history.front().block_residual.size();
  for (size_t i = 0; i < nb; ++i) {
    std::snprintf(buf, sizeof buf, ",block_residual_%zu", i);
    out += buf;
  }
  out += "\n";
  for (size_t k = 0; k < st.history.size(); ++k) {
    const AdmmIterRecord& r = st.history[k];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g", k + 1, r.lagrangian, r.primal_residual);
    out += buf;
    for (double b : r.block_residual) {
      std::snprintf(buf, sizeof buf, ",%.17g", b);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace dpn
