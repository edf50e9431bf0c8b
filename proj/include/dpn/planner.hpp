#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dpn/rssm.hpp"
#include "dpn/ssm.hpp"

namespace dpn {

// Setpoint-change box with a discrete lattice. Applied changes are always
// snapped to m + k*resolution.
struct ComfortBounds {
  double m = -2.0;
  double M = 0.0;
  double resolution = 0.25;

  int n_levels() const;              // validates (M - m)/resolution integral
  double level(int k) const { return m + k * resolution; }
  double snap(double delta) const;   // nearest lattice point, clipped to the box
};

struct DrEvent {
  int start = 0, end = 0;      // [start, end) in timesteps
  Eigen::VectorXd p_max_w;     // building cap per window step, length end - start
};

struct PlannerConfig {
  double rho = 4.0;
  double nu = 0.1;               // slack on the cap
  ComfortBounds bounds;
  int horizon = 4;
  int block = 2;                 // timesteps per constant-delta block (candidates)
  int k_samples = 100;           // sampled trajectories per candidate
  int max_gd_iters = 200;
  int candidate_cap = 100000;    // enumerate up to here, sample beyond
  double delta_weight = 1.0;     // weight of ||delta||^2 in the local objective
};
PlannerConfig planner_config_from_json(const std::string& text);
std::string planner_config_to_json(const PlannerConfig& c);

struct PlanOutcome {
  Eigen::VectorXd delta_c;     // H, on the lattice inside the box
  Eigen::VectorXd u_pred_w;    // H, clipped at 0
  Eigen::VectorXd u_pred_n;    // H, unclipped normalized (consensus units)
  double objective = 0;
  int gd_iters = 0;            // ddpn only
};

// ---- maximum-power constraint conversion -------------------------------------

enum class ConversionTag { NoAction, Saturate, RunAdmm };

struct ConversionOutcome {
  ConversionTag tag = ConversionTag::NoAction;
  Eigen::VectorXd p_tot_w;         // filled for RunAdmm
  Eigen::VectorXd p_bu_w, p_lb_w;  // diagnostics; empty when never computed
};

// per-zone H-step power forecast at one uniform setpoint change; stochastic
// models should answer with their worst case over samples
struct ZoneRollout {
  std::function<Eigen::VectorXd(double delta_c)> power_w;
};

// Decides whether the cap needs any action: compare the business-as-usual
// aggregate (delta = 0) and the all-in floor (delta = m) against (1-nu)*p_max.
// An unbounded cap (+inf everywhere) short-circuits before any model call.
ConversionOutcome convert_constraint(const std::vector<ZoneRollout>& zones,
                                     const Eigen::VectorXd& p_max_w, double nu,
                                     const std::vector<ComfortBounds>& bounds);

// ---- deterministic shooting ----------------------------------------------------

// Minimizes delta_weight*||delta_n||^2 + lambda.(u_bar - u) + (rho/2)||u_bar - u||^2
// over the comfort box by projected gradient with backtracking, then snaps to
// the lattice and re-rolls the model for the reported prediction.
PlanOutcome ddpn_solve(const Ssm& m, const Eigen::VectorXd& s0, const Eigen::VectorXd& u_bar_n,
                       const Eigen::VectorXd& lambda, const PlannerConfig& cfg,
                       const std::vector<Disturbance>& dist,
                       const std::vector<double>& base_setpoints_c,
                       const Eigen::VectorXd* warm_delta_c = nullptr);

// ---- stochastic search ---------------------------------------------------------

struct BankEntry {
  Eigen::VectorXd delta_c;     // H
  Eigen::VectorXd u_worst_w;   // trajectory with max total power among k samples
  Eigen::VectorXd u_worst_n;   // the same trajectory, normalized unclipped
  Eigen::VectorXd temp_c;      // its temperature track
};
struct TrajectoryBank {
  std::vector<BankEntry> entries;
  int n_candidates() const { return static_cast<int>(entries.size()); }
};

// Enumerates lattice sequences held constant over `block`-step groups
// (|lattice|^(H/block) candidates; uniform lattice samples beyond the cap),
// rolls k samples per candidate in one batch, and keeps each candidate's
// worst case.
TrajectoryBank sdpn_build_bank(const Rssm& m, const RssmState& st,
                               const std::vector<Disturbance>& dist,
                               const std::vector<double>& base_setpoints_c,
                               const PlannerConfig& cfg, Rng* rng);

// Pure re-scoring of the stored bank under coordinator targets; never touches
// the model. Ties: smaller ||delta||, then lexicographic.
PlanOutcome sdpn_select(const TrajectoryBank& bank, const Eigen::VectorXd& u_bar_n,
                        const Eigen::VectorXd& lambda, const PlannerConfig& cfg,
                        const NormStats& stats);

}  // namespace dpn
