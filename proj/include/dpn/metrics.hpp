#pragma once

#include <string>
#include <vector>

#include "dpn/orchestrator.hpp"

namespace dpn {

struct EventViolation {
  int start = 0, end = 0;  // weather rows, half-open
  int n_steps = 0;
  double actual_pct = 0;
  double predicted_pct = 0;
};

// Per-event constraint violation rates: percentage of event timesteps where
// building power exceeded the cap, measured on true consumption and on the
// planner's decision-time prediction. Throws when the log does not cover an
// event.
std::vector<EventViolation> violation_metrics(const RunLog& log);

struct DeltaBuckets {
  // per-zone percentage of timesteps by |delta|: exactly 0, (0,1], (1,2]
  Eigen::VectorXd zero_pct, small_pct, large_pct;
  Eigen::VectorXd mean_abs_c;   // mean |delta| per zone
  Eigen::VectorXd mean_c;       // signed mean per zone
};
DeltaBuckets delta_distribution(const RunLog& log);

struct TimingStats {
  double mean_s = 0, std_s = 0;
  int n = 0;
};
// Wall clock per planning episode (conversion + consensus).
TimingStats plan_timing(const RunLog& log);
// Wall clock per LC solve, pooled over zones and iterations.
TimingStats lc_iter_timing(const RunLog& log);

// ---- self-rendered charts ---------------------------------------------------

// Building power against time with the cap staircase and event shading.
std::string svg_power_timeline(const RunLog& log);
// Per-episode consensus residual curves, log scale.
std::string svg_residual_curves(const RunLog& log);

struct SlackSeries {
  std::string label;  // e.g. "nu=0.10"
  std::vector<EventViolation> events;
};
// Actual violation percentage per event, one bar group per series.
std::string svg_slack_comparison(const std::vector<SlackSeries>& series);

struct LineSeries {
  std::string label;
  std::vector<double> ys;  // x is the sample index; non-finite values break the line
};
// Generic overlay chart for forecast-vs-truth style figures.
std::string svg_line_chart(const std::vector<LineSeries>& series, const std::string& y_label);

}  // namespace dpn
