#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "regulab/dynamics.hpp"

namespace regulab {

/// Time-gridded solution of a closed-loop system. Stores the state and the
/// field value at every accepted step so any point can be reconstructed by
/// cubic Hermite interpolation (4th-order dense output).
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> derivs;
  long accepted_steps = 0;
  long rejected_steps = 0;

  int dim() const { return times.empty() ? 0 : static_cast<int>(states[0].size()); }
  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }

  /// Dense-output evaluation at any t inside the time span.
  Eigen::VectorXd at(double t) const;
};

struct IntegrateOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0: automatic
  double max_step = 0.0;      // 0: unrestricted
  long max_steps = 50'000'000;
};

/// Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince) with local error
/// control err <= atol + rtol*|state|. Throws SimulationError on step-size
/// underflow (probable finite escape) or non-finite states.
Trajectory integrate(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0, double t_end,
                     double rtol, double atol);
Trajectory integrate(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0, double t_end,
                     const IntegrateOptions& opts);

/// Fixed-step Dormand-Prince run (no error control); used by the asymptotic
/// order tests.
Trajectory integrate_fixed_step(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0,
                                double t_end, double step);

struct UubVerdict {
  bool bounded = false;
  double max_tail_norm = 0.0;
};

/// Uniform ultimate boundedness on data: every state past t_discard has
/// Euclidean norm <= bound.
UubVerdict check_uub(const std::vector<Trajectory>& trajs, double t_discard, double bound);

enum class PeriodicityVerdict { periodic, aperiodic, undecided };

/// Asymptotic tail of a trajectory resampled on a uniform grid, with a
/// periodicity verdict. When periodic, the resample covers a whole number
/// (>= 2) of periods ending at the trajectory's final time, with
/// `samples_per_period` points per period.
struct SteadyStateEstimate {
  std::size_t tail_start_index = 0;
  double resample_t0 = 0.0;
  double resample_dt = 0.0;
  std::vector<Eigen::VectorXd> resample;
  PeriodicityVerdict verdict = PeriodicityVerdict::undecided;
  double period = 0.0;           // T_est; meaningful when periodic
  int periods_covered = 0;       // whole periods in the resample
  int samples_per_period = 0;
  double convergence_metric = 0.0;  // sup |x(t) - x(t+T)| over the tail
  double state_scale = 1.0;         // 1 + sup |x| over the tail

  double resample_t_end() const {
    return resample_t0 + resample_dt * static_cast<double>(resample.size() - 1);
  }
};

struct SteadyStateOptions {
  double tail_fraction = 0.5;
  double tolerance = 1e-6;  // relative periodicity tolerance
  int samples_per_period = 2048;
  double default_period = 6.283185307179586;  // used for essentially constant tails
  double min_horizon = 1.0;
};

/// Extracts the tail of `traj` and classifies it as periodic / aperiodic /
/// undecided. With a period hint the trajectory must span >= 10 * T_hint;
/// without one the period is scanned from the autocorrelation peak of the
/// tail (constant tails count as periodic with the default period).
SteadyStateEstimate estimate_steady_state(const Trajectory& traj, std::optional<double> t_hint,
                                          const SteadyStateOptions& opts = {});

/// All grid states with time >= t from integrations started at each sample;
/// a finite stand-in for the reachable tail set.
std::vector<Eigen::VectorXd> reachable_tail_cloud(const ClosedLoopSystem& sys,
                                                  const std::vector<Eigen::VectorXd>& samples,
                                                  double t, double t_end,
                                                  const IntegrateOptions& opts = {});

}  // namespace regulab
