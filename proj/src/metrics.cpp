#include "dpn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace dpn {

std::vector<EventViolation> violation_metrics(const RunLog& log) {
  std::map<int, const StepRecord*> by_row;
  for (const StepRecord& s : log.steps) by_row[s.row] = &s;

  std::vector<EventViolation> out;
  for (const DrEvent& ev : log.events) {
    EventViolation v;
    v.start = ev.start;
    v.end = ev.end;
    int bad = 0, bad_pred = 0;
    for (int r = ev.start; r < ev.end; ++r) {
      auto it = by_row.find(r);
      if (it == by_row.end())
        throw std::runtime_error("run log does not cover event row " + std::to_string(r));
      const StepRecord& s = *it->second;
      double cap = ev.p_max_w[r - ev.start];
      ++v.n_steps;
      if (s.true_power_w > cap) ++bad;
      // an event step that produced no prediction counts against the planner
      if (!(s.pred_power_w <= cap)) ++bad_pred;
    }
    v.actual_pct = v.n_steps ? 100.0 * bad / v.n_steps : 0.0;
    v.predicted_pct = v.n_steps ? 100.0 * bad_pred / v.n_steps : 0.0;
    out.push_back(v);
  }
  return out;
}

DeltaBuckets delta_distribution(const RunLog& log) {
  const int N = log.n_zones;
  DeltaBuckets b;
  b.zero_pct = Eigen::VectorXd::Zero(N);
  b.small_pct = Eigen::VectorXd::Zero(N);
  b.large_pct = Eigen::VectorXd::Zero(N);
  b.mean_abs_c = Eigen::VectorXd::Zero(N);
  b.mean_c = Eigen::VectorXd::Zero(N);
  if (log.steps.empty()) return b;
  for (const StepRecord& s : log.steps)
    for (int z = 0; z < N; ++z) {
      double a = std::abs(s.delta_c[z]);
      if (a == 0.0)
        b.zero_pct[z] += 1;
      else if (a <= 1.0)
        b.small_pct[z] += 1;
      else
        b.large_pct[z] += 1;
      b.mean_abs_c[z] += a;
      b.mean_c[z] += s.delta_c[z];
    }
  double n = static_cast<double>(log.steps.size());
  b.zero_pct *= 100.0 / n;
  b.small_pct *= 100.0 / n;
  b.large_pct *= 100.0 / n;
  b.mean_abs_c /= n;
  b.mean_c /= n;
  return b;
}

namespace {

TimingStats stats_of(const std::vector<double>& xs) {
  TimingStats t;
  t.n = static_cast<int>(xs.size());
  if (xs.empty()) return t;
  double s = 0;
  for (double x : xs) s += x;
  t.mean_s = s / t.n;
  double v = 0;
  for (double x : xs) v += (x - t.mean_s) * (x - t.mean_s);
  t.std_s = t.n > 1 ? std::sqrt(v / (t.n - 1)) : 0.0;
  return t;
}

}  // namespace

TimingStats plan_timing(const RunLog& log) {
  std::vector<double> xs;
  for (const EpisodeRecord& e : log.episodes) xs.push_back(e.plan_seconds);
  return stats_of(xs);
}

TimingStats lc_iter_timing(const RunLog& log) {
  // per-solve mean: total seconds over total solves; spread is the
  // count-weighted deviation of episode means (per-solve times are not kept)
  double sec = 0;
  long cnt = 0;
  for (const EpisodeRecord& e : log.episodes) {
    sec += e.lc_solve_seconds;
    cnt += e.lc_solve_count;
  }
  TimingStats t;
  t.n = static_cast<int>(cnt);
  if (cnt == 0) return t;
  t.mean_s = sec / static_cast<double>(cnt);
  double ss = 0;
  for (const EpisodeRecord& e : log.episodes)
    if (e.lc_solve_count > 0) {
      double m = e.lc_solve_seconds / e.lc_solve_count;
      ss += e.lc_solve_count * (m - t.mean_s) * (m - t.mean_s);
    }
  if (cnt > 1) t.std_s = std::sqrt(ss / static_cast<double>(cnt - 1));
  return t;
}

// ---- SVG ------------------------------------------------------------------------

namespace {

std::string fnum(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct Frame {
  double w = 900, h = 300;
  double ml = 60, mr = 15, mt = 15, mb = 35;
  double x0, x1, y0, y1;  // data ranges

  double px(double x) const { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); }
  double py(double y) const { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); }
};

void open_svg(std::string& s, const Frame& f) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fnum(f.w) + "\" height=\"" +
       fnum(f.h) + "\" viewBox=\"0 0 " + fnum(f.w) + " " + fnum(f.h) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void axes(std::string& s, const Frame& f, const std::string& xlab, const std::string& ylab) {
  s += "<line x1=\"" + fnum(f.ml) + "\" y1=\"" + fnum(f.h - f.mb) + "\" x2=\"" + fnum(f.w - f.mr) +
       "\" y2=\"" + fnum(f.h - f.mb) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fnum(f.ml) + "\" y1=\"" + fnum(f.mt) + "\" x2=\"" + fnum(f.ml) + "\" y2=\"" +
       fnum(f.h - f.mb) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fnum((f.ml + f.w - f.mr) / 2) + "\" y=\"" + fnum(f.h - 8) +
       "\" font-size=\"12\" text-anchor=\"middle\">" + xlab + "</text>\n";
  s += "<text x=\"14\" y=\"" + fnum((f.mt + f.h - f.mb) / 2) +
       "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
       fnum((f.mt + f.h - f.mb) / 2) + ")\">" + ylab + "</text>\n";
}

void ytick(std::string& s, const Frame& f, double y, const std::string& label) {
  s += "<line x1=\"" + fnum(f.ml - 4) + "\" y1=\"" + fnum(f.py(y)) + "\" x2=\"" + fnum(f.ml) +
       "\" y2=\"" + fnum(f.py(y)) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fnum(f.ml - 7) + "\" y=\"" + fnum(f.py(y) + 4) +
       "\" font-size=\"10\" text-anchor=\"end\">" + label + "</text>\n";
}

void xtick(std::string& s, const Frame& f, double x, const std::string& label) {
  s += "<line x1=\"" + fnum(f.px(x)) + "\" y1=\"" + fnum(f.h - f.mb) + "\" x2=\"" + fnum(f.px(x)) +
       "\" y2=\"" + fnum(f.h - f.mb + 4) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fnum(f.px(x)) + "\" y=\"" + fnum(f.h - f.mb + 16) +
       "\" font-size=\"10\" text-anchor=\"middle\">" + label + "</text>\n";
}

// segments at non-finite points
void polyline(std::string& s, const Frame& f, const std::vector<double>& xs,
              const std::vector<double>& ys, const std::string& style) {
  std::string pts;
  auto flush = [&] {
    if (!pts.empty()) {
      s += "<polyline fill=\"none\" " + style + " points=\"" + pts + "\"/>\n";
      pts.clear();
    }
  };
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(ys[i])) {
      flush();
      continue;
    }
    pts += fnum(f.px(xs[i])) + "," + fnum(f.py(ys[i])) + " ";
  }
  flush();
}

}  // namespace

std::string svg_power_timeline(const RunLog& log) {
  if (log.steps.empty()) throw std::invalid_argument("empty run log");
  const int n = static_cast<int>(log.steps.size());
  double ymax = 0;
  std::vector<double> xs(static_cast<size_t>(n)), tru(static_cast<size_t>(n)),
      pred(static_cast<size_t>(n)), cap(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const StepRecord& s = log.steps[static_cast<size_t>(i)];
    xs[static_cast<size_t>(i)] = i;
    tru[static_cast<size_t>(i)] = s.true_power_w;
    pred[static_cast<size_t>(i)] = s.pred_power_w;
    cap[static_cast<size_t>(i)] = std::isfinite(s.p_max_w)
                                      ? s.p_max_w
                                      : std::numeric_limits<double>::quiet_NaN();
    ymax = std::max(ymax, s.true_power_w);
    if (std::isfinite(s.pred_power_w)) ymax = std::max(ymax, s.pred_power_w);
    if (std::isfinite(s.p_max_w)) ymax = std::max(ymax, s.p_max_w);
  }
  Frame f;
  f.x0 = 0;
  f.x1 = std::max(1, n - 1);
  f.y0 = 0;
  f.y1 = ymax * 1.05 + 1;

  std::string s;
  open_svg(s, f);
  int first_row = log.steps.front().row;
  for (const DrEvent& ev : log.events) {
    double a = f.px(ev.start - first_row), b = f.px(ev.end - first_row);
    s += "<rect x=\"" + fnum(a) + "\" y=\"" + fnum(f.mt) + "\" width=\"" + fnum(b - a) +
         "\" height=\"" + fnum(f.h - f.mt - f.mb) + "\" fill=\"#d62728\" fill-opacity=\"0.08\"/>\n";
  }
  polyline(s, f, xs, cap, "stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6,3\"");
  polyline(s, f, xs, pred, "stroke=\"#ff7f0e\" stroke-width=\"1.2\"");
  polyline(s, f, xs, tru, "stroke=\"#1f77b4\" stroke-width=\"1.5\"");
  axes(s, f, "timestep", "building power (W)");
  for (int k = 0; k <= 4; ++k) {
    double y = f.y0 + (f.y1 - f.y0) * k / 4;
    ytick(s, f, y, fnum(y));
  }
  int step = std::max(1, n / 8);
  for (int i = 0; i < n; i += step) xtick(s, f, i, std::to_string(i));
  s += "<text x=\"" + fnum(f.w - f.mr) + "\" y=\"" + fnum(f.mt + 12) +
       "\" font-size=\"11\" text-anchor=\"end\" fill=\"#1f77b4\">true</text>\n";
  s += "<text x=\"" + fnum(f.w - f.mr) + "\" y=\"" + fnum(f.mt + 26) +
       "\" font-size=\"11\" text-anchor=\"end\" fill=\"#ff7f0e\">predicted</text>\n";
  s += "<text x=\"" + fnum(f.w - f.mr) + "\" y=\"" + fnum(f.mt + 40) +
       "\" font-size=\"11\" text-anchor=\"end\" fill=\"#d62728\">cap</text>\n";
  s += "</svg>\n";
  return s;
}

std::string svg_residual_curves(const RunLog& log) {
  std::vector<const EpisodeRecord*> eps;
  int max_iter = 1;
  double lo = 0, hi = 1;
  bool any = false;
  for (const EpisodeRecord& e : log.episodes)
    if (!e.primal_residuals.empty()) {
      eps.push_back(&e);
      max_iter = std::max(max_iter, static_cast<int>(e.primal_residuals.size()));
      for (double r : e.primal_residuals) {
        double l = std::log10(std::max(r, 1e-16));
        if (!any) {
          lo = hi = l;
          any = true;
        } else {
          lo = std::min(lo, l);
          hi = std::max(hi, l);
        }
      }
    }
  if (!any) throw std::invalid_argument("no consensus episodes in run log");
  Frame f;
  f.x0 = 1;
  f.x1 = max_iter;
  f.y0 = lo - 0.2;
  f.y1 = hi + 0.2;

  std::string s;
  open_svg(s, f);
  for (const EpisodeRecord* e : eps) {
    std::vector<double> xs, ys;
    for (size_t i = 0; i < e->primal_residuals.size(); ++i) {
      xs.push_back(static_cast<double>(i + 1));
      ys.push_back(std::log10(std::max(e->primal_residuals[i], 1e-16)));
    }
    polyline(s, f, xs, ys, "stroke=\"#2ca02c\" stroke-width=\"1\" stroke-opacity=\"0.55\"");
  }
  axes(s, f, "consensus iteration", "log10 primal residual");
  for (int k = static_cast<int>(std::ceil(f.y0)); k <= static_cast<int>(std::floor(f.y1)); ++k)
    ytick(s, f, k, "1e" + std::to_string(k));
  for (int i = 1; i <= max_iter; i += std::max(1, max_iter / 10)) xtick(s, f, i, std::to_string(i));
  s += "</svg>\n";
  return s;
}

std::string svg_slack_comparison(const std::vector<SlackSeries>& series) {
  if (series.empty()) throw std::invalid_argument("no series");
  size_t n_events = series.front().events.size();
  for (const auto& sr : series)
    if (sr.events.size() != n_events)
      throw std::invalid_argument("series disagree on event count");
  if (n_events == 0) throw std::invalid_argument("no events");

  Frame f;
  f.x0 = 0;
  f.x1 = static_cast<double>(n_events);
  f.y0 = 0;
  f.y1 = 5;
  for (const auto& sr : series)
    for (const auto& e : sr.events) f.y1 = std::max(f.y1, e.actual_pct * 1.15);

  const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
  std::string s;
  open_svg(s, f);
  double group_w = (f.w - f.ml - f.mr) / static_cast<double>(n_events);
  double bar_w = group_w * 0.8 / static_cast<double>(series.size());
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % 5];
    for (size_t ei = 0; ei < n_events; ++ei) {
      double x = f.ml + group_w * (static_cast<double>(ei) + 0.1) + bar_w * static_cast<double>(si);
      double top = f.py(series[si].events[ei].actual_pct);
      s += "<rect x=\"" + fnum(x) + "\" y=\"" + fnum(top) + "\" width=\"" + fnum(bar_w * 0.92) +
           "\" height=\"" + fnum(f.h - f.mb - top) + "\" fill=\"" + color + "\"/>\n";
    }
    s += "<text x=\"" + fnum(f.w - f.mr) + "\" y=\"" +
         fnum(f.mt + 14 * static_cast<double>(si + 1)) +
         "\" font-size=\"11\" text-anchor=\"end\" fill=\"" + color + "\">" + series[si].label +
         "</text>\n";
  }
  axes(s, f, "event", "violation %");
  for (int k = 0; k <= 4; ++k) {
    double y = f.y1 * k / 4;
    ytick(s, f, y, fnum(y));
  }
  for (size_t ei = 0; ei < n_events; ++ei)
    xtick(s, f, static_cast<double>(ei) + 0.5, std::to_string(ei));
  s += "</svg>\n";
  return s;
}

std::string svg_line_chart(const std::vector<LineSeries>& series, const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("no series");
  size_t n = 0;
  for (const auto& sr : series) n = std::max(n, sr.ys.size());
  if (n < 2) throw std::invalid_argument("series too short");

  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& sr : series)
    for (double y : sr.ys)
      if (std::isfinite(y)) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
  if (!(ymin <= ymax)) throw std::invalid_argument("no finite samples");
  double pad = (ymax - ymin) * 0.05 + 1e-12;

  Frame f;
  f.x0 = 0;
  f.x1 = static_cast<double>(n - 1);
  f.y0 = ymin - pad;
  f.y1 = ymax + pad;

  const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
  std::string s;
  open_svg(s, f);
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % 5];
    std::vector<double> xs(series[si].ys.size());
    for (size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
    polyline(s, f, xs, series[si].ys,
             "stroke=\"" + std::string(color) + "\" stroke-width=\"1.3\"");
    s += "<text x=\"" + fnum(f.w - f.mr) + "\" y=\"" +
         fnum(f.mt + 14 * static_cast<double>(si + 1)) +
         "\" font-size=\"11\" text-anchor=\"end\" fill=\"" + color + "\">" + series[si].label +
         "</text>\n";
  }
  axes(s, f, "timestep", y_label);
  for (int k = 0; k <= 4; ++k) {
    double y = f.y0 + (f.y1 - f.y0) * k / 4;
    ytick(s, f, y, fnum(y));
  }
  size_t step = std::max<size_t>(1, n / 8);
  for (size_t i = 0; i < n; i += step) xtick(s, f, static_cast<double>(i), std::to_string(i));
  s += "</svg>\n";
  return s;
}

}  // namespace dpn
