#include "regulab/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "regulab/common.hpp"

namespace regulab {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// e = b - b_hat (5th minus embedded 4th order weights)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

class FieldEvaluator {
 public:
  explicit FieldEvaluator(const ClosedLoopSystem& sys)
      : cs_(sys.field, sys.state_names), dim_(sys.dim()) {}

  /// Returns false when the field is non-finite or hits a domain error.
  bool operator()(const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    try {
      cs_.eval({y.data(), static_cast<std::size_t>(dim_)},
               {dy.data(), static_cast<std::size_t>(dim_)});
    } catch (const EvalError&) {
      return false;
    }
    return dy.allFinite();
  }

 private:
  CompiledSystem cs_;
  int dim_;
};

struct StepResult {
  Eigen::VectorXd y_new, f_new;
  double error = 0.0;  // scaled error norm
  bool finite = true;
};

// One Dormand-Prince step from (y, f) with size h. FSAL: f_new is the field
// at the new point.
StepResult dopri_step(FieldEvaluator& field, const Eigen::VectorXd& y, const Eigen::VectorXd& f,
                      double h, double rtol, double atol) {
  const Eigen::Index n = y.size();
  StepResult bad;
  bad.finite = false;
  StepResult r;
  Eigen::VectorXd k2(n), k3(n), k4(n), k5(n), k6(n), tmp(n);
  tmp = y + h * (a21 * f);
  if (!field(tmp, k2)) return bad;
  tmp = y + h * (a31 * f + a32 * k2);
  if (!field(tmp, k3)) return bad;
  tmp = y + h * (a41 * f + a42 * k2 + a43 * k3);
  if (!field(tmp, k4)) return bad;
  tmp = y + h * (a51 * f + a52 * k2 + a53 * k3 + a54 * k4);
  if (!field(tmp, k5)) return bad;
  tmp = y + h * (a61 * f + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
  if (!field(tmp, k6)) return bad;
  r.y_new = y + h * (b1 * f + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  r.f_new.resize(n);
  if (!r.y_new.allFinite() || !field(r.y_new, r.f_new)) return bad;

  Eigen::VectorXd err = h * (e1 * f + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.f_new);
  double acc = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double sc = atol + rtol * std::max(std::abs(y(i)), std::abs(r.y_new(i)));
    double q = err(i) / sc;
    acc += q * q;
  }
  r.error = std::sqrt(acc / static_cast<double>(n));
  return r;
}

double initial_step_size(FieldEvaluator& field, const Eigen::VectorXd& y0,
                         const Eigen::VectorXd& f0, double t_end, double rtol, double atol) {
  const Eigen::Index n = y0.size();
  double d0 = 0, d1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double sc = atol + rtol * std::abs(y0(i));
    d0 += std::pow(y0(i) / sc, 2);
    d1 += std::pow(f0(i) / sc, 2);
  }
  d0 = std::sqrt(d0 / static_cast<double>(n));
  d1 = std::sqrt(d1 / static_cast<double>(n));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, t_end);

  Eigen::VectorXd y1 = y0 + h0 * f0, f1(n);
  if (!field(y1, f1)) return std::min(1e-6, t_end);
  double d2 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double sc = atol + rtol * std::abs(y0(i));
    d2 += std::pow((f1(i) - f0(i)) / sc, 2);
  }
  d2 = std::sqrt(d2 / static_cast<double>(n)) / h0;
  double h1 = (std::max(d1, d2) <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                          : std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min({100 * h0, h1, t_end});
}

}  // namespace

Eigen::VectorXd Trajectory::at(double t) const {
  if (times.empty()) throw ValidationError("empty trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - times.begin());
  std::size_t lo = hi - 1;
  double h = times[hi] - times[lo];
  double th = (t - times[lo]) / h;
  double h00 = (1 + 2 * th) * (1 - th) * (1 - th);
  double h10 = th * (1 - th) * (1 - th);
  double h01 = th * th * (3 - 2 * th);
  double h11 = th * th * (th - 1);
  return h00 * states[lo] + (h10 * h) * derivs[lo] + h01 * states[hi] + (h11 * h) * derivs[hi];
}

Trajectory integrate(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0, double t_end,
                     double rtol, double atol) {
  IntegrateOptions opts;
  opts.rtol = rtol;
  opts.atol = atol;
  return integrate(sys, x0, t_end, opts);
}

Trajectory integrate(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0, double t_end,
                     const IntegrateOptions& opts) {
  if (x0.size() != sys.dim()) throw ValidationError("integrate: x0 dimension != system dim");
  if (!(t_end > 0)) throw ValidationError("integrate: t_end must be positive");
  if (!(opts.rtol > 0) || !(opts.atol > 0))
    throw ValidationError("integrate: tolerances must be positive");
  if (!x0.allFinite()) throw ValidationError("integrate: non-finite initial state");

  FieldEvaluator field(sys);
  Trajectory traj;
  double t = 0.0;
  Eigen::VectorXd y = x0, f(sys.dim());
  if (!field(y, f))
    throw SimulationError(SimulationError::Kind::nonfinite_state, 0.0,
                          "field not evaluable at the initial state");
  traj.times.push_back(t);
  traj.states.push_back(y);
  traj.derivs.push_back(f);

  double h = opts.initial_step > 0 ? opts.initial_step
                                   : initial_step_size(field, y, f, t_end, opts.rtol, opts.atol);
  if (opts.max_step > 0) h = std::min(h, opts.max_step);

  while (t < t_end) {
    h = std::min(h, t_end - t);
    double h_floor = 1e-14 * std::max(1.0, std::abs(t));
    if (h < h_floor)
      throw SimulationError(SimulationError::Kind::finite_escape, t,
                            "step size underflow at t = " + std::to_string(t) +
                                " (probable finite escape; solution not complete)");
    if (traj.accepted_steps + traj.rejected_steps > opts.max_steps)
      throw SimulationError(SimulationError::Kind::finite_escape, t,
                            "step budget exhausted at t = " + std::to_string(t));

    StepResult r = dopri_step(field, y, f, h, opts.rtol, opts.atol);
    if (!r.finite) {
      ++traj.rejected_steps;
      h *= 0.25;
      continue;
    }
    if (r.error <= 1.0) {
      t += h;
      y = std::move(r.y_new);
      f = std::move(r.f_new);
      traj.times.push_back(t);
      traj.states.push_back(y);
      traj.derivs.push_back(f);
      ++traj.accepted_steps;
      double factor = r.error == 0 ? 5.0 : std::min(5.0, 0.9 * std::pow(r.error, -0.2));
      h *= std::max(0.2, factor);
      if (opts.max_step > 0) h = std::min(h, opts.max_step);
    } else {
      ++traj.rejected_steps;
      h *= std::max(0.1, 0.9 * std::pow(r.error, -0.2));
    }
  }
  return traj;
}

Trajectory integrate_fixed_step(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0,
                                double t_end, double step) {
  if (!(step > 0)) throw ValidationError("integrate_fixed_step: step must be positive");
  FieldEvaluator field(sys);
  Trajectory traj;
  double t = 0.0;
  Eigen::VectorXd y = x0, f(sys.dim());
  if (!field(y, f))
    throw SimulationError(SimulationError::Kind::nonfinite_state, 0.0,
                          "field not evaluable at the initial state");
  traj.times.push_back(t);
  traj.states.push_back(y);
  traj.derivs.push_back(f);
  const long n_steps = std::lround(t_end / step);
  for (long i = 0; i < n_steps; ++i) {
    double h = (i == n_steps - 1) ? t_end - t : step;
    StepResult r = dopri_step(field, y, f, h, 1.0, 1.0);
    if (!r.finite)
      throw SimulationError(SimulationError::Kind::nonfinite_state, t, "non-finite state");
    t += h;
    y = std::move(r.y_new);
    f = std::move(r.f_new);
    traj.times.push_back(t);
    traj.states.push_back(y);
    traj.derivs.push_back(f);
    ++traj.accepted_steps;
  }
  return traj;
}

UubVerdict check_uub(const std::vector<Trajectory>& trajs, double t_discard, double bound) {
  UubVerdict v;
  v.bounded = true;
  for (const Trajectory& tr : trajs) {
    if (t_discard >= tr.t_end())
      throw ValidationError("check_uub: t_discard must precede the trajectory end");
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      if (tr.times[i] < t_discard) continue;
      double n = tr.states[i].norm();
      v.max_tail_norm = std::max(v.max_tail_norm, n);
      if (n > bound) v.bounded = false;
    }
  }
  return v;
}

namespace {

// Resamples [t0, t0 + (count-1)*dt] through dense output.
std::vector<Eigen::VectorXd> resample_range(const Trajectory& traj, double t0, double dt,
                                            std::size_t count) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) out.push_back(traj.at(t0 + dt * static_cast<double>(j)));
  return out;
}

double shift_metric(const std::vector<Eigen::VectorXd>& samples, std::size_t lag) {
  double m = 0;
  for (std::size_t j = 0; j + lag < samples.size(); ++j)
    m = std::max(m, (samples[j] - samples[j + lag]).norm());
  return m;
}

}  // namespace

SteadyStateEstimate estimate_steady_state(const Trajectory& traj, std::optional<double> t_hint,
                                          const SteadyStateOptions& opts) {
  if (traj.times.size() < 4) throw ValidationError("trajectory too short");
  const double span = traj.t_end() - traj.t_begin();
  if (t_hint) {
    if (!(*t_hint > 0)) throw ValidationError("period hint must be positive");
    if (span < 10 * *t_hint)
      throw ValidationError("trajectory too short: spans less than 10 period hints");
  } else if (span < opts.min_horizon) {
    throw ValidationError("trajectory too short for steady-state extraction");
  }

  SteadyStateEstimate est;
  est.samples_per_period = opts.samples_per_period;
  const double tail_t0 = traj.t_begin() + (1.0 - opts.tail_fraction) * span;
  est.tail_start_index = static_cast<std::size_t>(
      std::lower_bound(traj.times.begin(), traj.times.end(), tail_t0) - traj.times.begin());
  const double tail_span = traj.t_end() - tail_t0;

  double sup = 0;
  for (std::size_t i = est.tail_start_index; i < traj.times.size(); ++i)
    sup = std::max(sup, traj.states[i].lpNorm<Eigen::Infinity>());
  est.state_scale = 1.0 + sup;

  auto classify_with_period = [&](double period) {
    const int k = static_cast<int>(std::floor(tail_span / period));
    if (k < 2) throw ValidationError("trajectory too short: tail covers < 2 periods");
    const std::size_t m = static_cast<std::size_t>(opts.samples_per_period);
    est.period = period;
    est.periods_covered = k;
    est.resample_dt = period / static_cast<double>(m);
    est.resample_t0 = traj.t_end() - period * k;
    est.resample = resample_range(traj, est.resample_t0, est.resample_dt,
                                  static_cast<std::size_t>(k) * m + 1);
    est.convergence_metric = shift_metric(est.resample, m);
    if (est.convergence_metric <= opts.tolerance * est.state_scale)
      est.verdict = PeriodicityVerdict::periodic;
    else if (est.convergence_metric <= 10 * opts.tolerance * est.state_scale)
      est.verdict = PeriodicityVerdict::undecided;
    else
      est.verdict = PeriodicityVerdict::aperiodic;
  };

  if (t_hint) {
    classify_with_period(*t_hint);
    return est;
  }

  // No hint: uniform scan of the tail.
  const std::size_t n_scan = 4096;
  const double dt_scan = tail_span / static_cast<double>(n_scan - 1);
  std::vector<Eigen::VectorXd> scan = resample_range(traj, tail_t0, dt_scan, n_scan);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(scan[0].size());
  for (const auto& s : scan) mean += s;
  mean /= static_cast<double>(n_scan);
  double variation = 0;
  for (const auto& s : scan) variation = std::max(variation, (s - mean).norm());

  if (variation <= opts.tolerance * est.state_scale) {
    // essentially constant tail: T-periodic for every T, report the default
    if (tail_span >= 2 * opts.default_period) {
      classify_with_period(opts.default_period);
    } else {
      est.period = opts.default_period;
      est.periods_covered = 0;
      est.resample_t0 = tail_t0;
      est.resample_dt = dt_scan;
      est.resample = std::move(scan);
      est.convergence_metric = variation;
      est.verdict = PeriodicityVerdict::periodic;
    }
    return est;
  }

  // autocorrelation peak of the mean-removed tail
  double r0 = 0;
  for (const auto& s : scan) r0 += (s - mean).squaredNorm();
  std::size_t best_lag = 0;
  double best_rho = -1;
  for (std::size_t lag = 8; lag <= n_scan / 2; ++lag) {
    double r = 0;
    for (std::size_t j = 0; j + lag < n_scan; ++j)
      r += (scan[j] - mean).dot(scan[j + lag] - mean);
    double rho = r / (r0 * (1.0 - static_cast<double>(lag) / n_scan));
    if (rho > best_rho) {
      best_rho = rho;
      best_lag = lag;
    }
  }
  if (best_lag == 0 || best_rho < 0.5) {
    est.verdict = PeriodicityVerdict::aperiodic;
    est.resample_t0 = tail_t0;
    est.resample_dt = dt_scan;
    est.resample = std::move(scan);
    est.convergence_metric = 2 * variation;
    return est;
  }
  // refine around the raw peak by minimizing the shift metric
  double t_best = static_cast<double>(best_lag) * dt_scan;
  double best_metric = shift_metric(scan, best_lag);
  for (double f : {0.99, 0.995, 1.005, 1.01}) {
    std::size_t lag = static_cast<std::size_t>(std::lround(t_best * f / dt_scan));
    if (lag < 4 || lag >= n_scan / 2) continue;
    double m = shift_metric(scan, lag);
    if (m < best_metric) {
      best_metric = m;
      t_best = static_cast<double>(lag) * dt_scan;
    }
  }
  classify_with_period(t_best);
  return est;
}

std::vector<Eigen::VectorXd> reachable_tail_cloud(const ClosedLoopSystem& sys,
                                                  const std::vector<Eigen::VectorXd>& samples,
                                                  double t, double t_end,
                                                  const IntegrateOptions& opts) {
  if (t > t_end) throw ValidationError("reachable_tail_cloud: t must not exceed t_end");
  std::vector<Eigen::VectorXd> cloud;
  for (const Eigen::VectorXd& x0 : samples) {
    Trajectory tr = integrate(sys, x0, t_end, opts);
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      if (tr.times[i] >= t) cloud.push_back(tr.states[i]);
  }
  return cloud;
}

}  // namespace regulab
