#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dpn/nn.hpp"

namespace dpn {

// Consensus ADMM for sharing problems:
//   min  sum_i g_i(x_i) + ell(sum_i x_i)   s.t.  x_i in [lo_i, hi_i]^H
// split as x_i = x_bar_i with duals lambda_i and penalty (rho/2)||x_bar - x||^2.
// Blocks are rows of N x H matrices; the aggregate is the column sum, which
// keeps the block-indexed embedding orthogonal by construction.

// Coupling on the aggregate: ell(v) = sum_t (sum_i v_{i,t} - p_tot_t)^2.
// A custom smooth oracle may replace it; assumption checks then need its
// gradient-Lipschitz bound supplied (nan means unknown).
struct CustomCoupling {
  std::function<double(const Mat& v, Mat* grad)> eval;
  double lipschitz = std::numeric_limits<double>::quiet_NaN();
};

struct SharingSpec {
  int n_blocks = 0;
  int block_len = 0;
  // local objective: value at x_i (length-H row), gradient accumulated into *grad
  std::function<double(int i, const Eigen::VectorXd& x, Eigen::VectorXd* grad)> g;
  double mu_g = 0;  // strong-convexity modulus shared by every g_i
  Eigen::VectorXd p_tot;  // aggregate target, length H (ignored when custom set)
  CustomCoupling custom;  // active when custom.eval is set
  Eigen::VectorXd lo, hi;  // per-block box bounds, length N
  double rho = 1.0;
};

struct AdmmIterRecord {
  double lagrangian = 0;
  double primal_residual = 0;           // sqrt of the summed block residuals
  std::vector<double> block_residual;   // ||x_bar_i - x_i||_2 per block
};

struct AdmmState {
  Mat x;       // N x H
  Mat x_bar;   // N x H
  Mat lambda;  // N x H
  int iter = 0;
  std::vector<AdmmIterRecord> history;
};

struct AdmmStop {
  int max_iter = 20;
  double primal_tol = 1e-3;
};

struct AssumptionReport {
  double L = 0;
  double gamma_bar = 0;
  std::vector<double> gamma_i;
  bool rho_ge_L = false;
  bool rho_gamma_ge_2L2 = false;
  bool rho_ok = false;
};

// Exact minimizer of ell(v) + sum_i [lambda_i . (v_i - u_i) + (rho/2)||v_i - u_i||^2]
// for the aggregate-target coupling. Decomposes per timestep into an
// N-dimensional quadratic with Hessian rho*I + 2*ones*ones^T, inverted by the
// rank-one identity (rho*I + 2*11^T)^-1 = (1/rho)(I - 2*11^T/(rho + 2N)).
Mat coordinator_solve(const Mat& u, const Mat& lambda, const Eigen::VectorXd& p_tot, double rho);

void dual_update(AdmmState* st, double rho);

double coupling_value(const SharingSpec& spec, const Mat& v, Mat* grad);
double lagrangian_value(const SharingSpec& spec, const AdmmState& st);
// original objective sum_i g_i(x_i) + ell(aggregate of x)
double objective_value(const SharingSpec& spec, const Mat& x);

// block-summed primal residual; the square equals the sum of squared block
// residuals exactly, by construction
double primal_residual(const Mat& x_bar, const Mat& x);

// Solves one block subproblem given coordinator targets:
//   min_{x in box} g_i(x) + lambda_i.(x_bar_i - x) + (rho/2)||x_bar_i - x||^2
using LcSolver = std::function<Eigen::VectorXd(int i, const Eigen::VectorXd& x_bar_i,
                                               const Eigen::VectorXd& lambda_i, double rho)>;

// All blocks at once (rows of N x H matrices). The controller uses this form:
// every target is dispatched before any reply is consumed.
using BatchLcSolver = std::function<Mat(const Mat& x_bar, const Mat& lambda, double rho)>;
BatchLcSolver batch_lc(int n_blocks, const LcSolver& lc);

// exact solver for g(x) = ||x||^2: x = clip((lambda + rho*x_bar)/(2 + rho))
LcSolver quadratic_lc_solver(const SharingSpec& spec);

// on_iter (optional) observes the state after each dual update, with the
// iteration's history record already appended
AdmmState run_admm(const SharingSpec& spec, const BatchLcSolver& lc, AdmmState init,
                   const AdmmStop& stop,
                   const std::function<void(const AdmmState&)>& on_iter = nullptr);
AdmmState admm_init_uniform(const SharingSpec& spec, double value);

AssumptionReport verify_assumptions(const SharingSpec& spec);

std::string admm_history_csv(const AdmmState& st);

}  // namespace dpn
