#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dpn/dataset.hpp"
#include "dpn/rssm.hpp"
#include "dpn/ssm.hpp"

namespace dpn {

// H-step power forecast (W) for one zone. The forecaster sees dataset rows up
// to and including the origin row e and predicts the powers of rows
// e+1 .. e+H under the actions the dataset actually recorded.
struct ZoneForecaster {
  int min_context = 1;  // rows required up to and including the origin
  std::function<Eigen::VectorXd(const Dataset& d, int zone, int e, int H)> predict;
};

ZoneForecaster make_ssm_forecaster(const Ssm& m);
// mean over n_samples trajectories; the noise stream is keyed on (zone, origin)
// so results do not depend on evaluation order
ZoneForecaster make_rssm_forecaster(const Rssm& m, int n_samples, uint64_t seed);
ZoneForecaster make_oracle_forecaster();  // replays the recorded truth
ZoneForecaster make_zero_forecaster();
// routes each zone to its own forecaster (index = zone)
ZoneForecaster make_dispatch_forecaster(std::vector<ZoneForecaster> per_zone);

struct EvalReport {
  std::vector<int> horizons;               // leads, in timesteps
  Mat zone_mae_w;                          // n_zones x horizons: power MAE at that lead
  std::vector<double> building_mape_pct;   // per lead, on summed zone power
  std::vector<int> building_mape_count;    // timesteps that passed the guard
  int n_origins = 0;
};

// Rolling-origin evaluation: every `stride` rows, predict max(horizons) steps
// ahead and score each requested lead. Building MAPE skips timesteps whose
// true building power is under guard_w.
EvalReport evaluate_model(const ZoneForecaster& f, const Dataset& test,
                          const std::vector<int>& horizons, int stride = 8,
                          double guard_w = 100.0);

std::string eval_report_csv(const EvalReport& r);

}  // namespace dpn
