#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dpn/dataset.hpp"
#include "dpn/planner.hpp"
#include "dpn/rssm.hpp"
#include "dpn/ssm.hpp"
#include "dpn/thermal_sim.hpp"
#include "dpn/weather.hpp"

namespace dpn {

enum class PlannerKind { Ddpn, Sdpn };
enum class TransportKind { InProcess, Socket };

struct ControlConfig {
  int horizon = 4;
  int replan_every = 2;
  int max_admm_iter = 20;
  double primal_tol = 1e-3;
  PlannerKind planner = PlannerKind::Ddpn;
  TransportKind transport = TransportKind::InProcess;
  PlannerConfig plan;  // rho, nu, bounds, k_samples, gd budget, cap
  double baseline_setpoint_c = 21.0;
  uint64_t seed = 0;
  double timeout_s = 30.0;
  int retrain_every = 0;  // timesteps between fine-tuning passes; 0 disables
  int retrain_steps = 30;
};

// One simulated timestep, annotated with the plan that governed it.
struct StepRecord {
  int row = 0;     // weather-series row index of the interval start
  int64_t t = 0;   // unix seconds at the interval start
  double true_power_w = 0;
  double pred_power_w = std::numeric_limits<double>::quiet_NaN();
  double p_max_w = std::numeric_limits<double>::infinity();
  int conversion = 0;  // ConversionTag of the governing episode
  int admm_iters = 0;
  bool admm_converged = true;
  Eigen::VectorXd delta_c;  // applied setpoint change per zone
};

// One planning episode (a replan boundary).
struct EpisodeRecord {
  int row = 0;
  ConversionTag tag = ConversionTag::NoAction;
  int admm_iters = 0;
  bool converged = true;
  std::vector<double> primal_residuals;  // per ADMM iteration
  double plan_seconds = 0;               // conversion + consensus wall clock
  double lc_solve_seconds = 0;           // summed over all LC solves
  int lc_solve_count = 0;
};

struct RunLog {
  int n_zones = 0;
  int64_t step_seconds = 900;
  std::vector<StepRecord> steps;
  std::vector<EpisodeRecord> episodes;
  std::vector<DrEvent> events;  // copied in for downstream metrics
};

// Deterministic per-timestep table; timing never enters this file so two
// transports can be diffed byte for byte.
std::string runlog_csv(const RunLog& log);
// Iteration-by-iteration consensus residuals, one row per (episode, iter).
std::string episodes_csv(const RunLog& log);
// Aggregates including wall-clock timing.
std::string runlog_summary_json(const RunLog& log);
// Writes run.csv, episodes.csv, summary.json under dir.
void write_runlog(const std::string& dir, const RunLog& log);

// Rebuilds a RunLog from a write_runlog directory: steps and residual traces
// exactly, events from the contiguous capped row ranges. Per-episode wall
// times are not in the CSVs and come back zero; read timing from
// summary.json instead.
RunLog read_runlog(const std::string& dir);

struct ControlModels {
  std::vector<Ssm>* ssms = nullptr;    // required for DDPN
  std::vector<Rssm>* rssms = nullptr;  // required for SDPN
};

// Receding-horizon demand-response loop. Positions the simulator at weather
// row start_row - (n_lags + 1), pre-rolls at the baseline setpoint to build
// the observation history, then controls the intervals starting at rows
// [start_row, start_row + n_steps). Event rows index the weather series;
// p_max_w[k] caps the interval starting at row (start + k). Outside events
// the cap is infinite and conversion short-circuits to no action.
RunLog control_loop(Simulator& sim, const WeatherSeries& wx, int start_row, int n_steps,
                    const std::vector<DrEvent>& events, const ControlConfig& cfg,
                    const ControlModels& models);

// Short fine-tuning continuation on a rolling window; leaves the models
// untouched when steps <= 0 or the window is shorter than one training
// sequence. Deterministic in seed.
void retrain_models(std::vector<Ssm>* ssms, std::vector<Rssm>* rssms, const Dataset& rolling,
                    int steps, uint64_t seed);

}  // namespace dpn
