#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "regulab/common.hpp"
#include "regulab/simulate.hpp"

using namespace regulab;

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Bare autonomous system for integrator tests (no regulator involved).
ClosedLoopSystem make_system(std::vector<std::string> names, std::vector<const char*> field) {
  ClosedLoopSystem sys;
  sys.n_w = 0;
  sys.n_p = static_cast<int>(names.size());
  sys.n_c = 0;
  sys.n_e = 0;
  sys.state_names = std::move(names);
  for (const char* f : field) sys.field.push_back(parse(f));
  return sys;
}

ClosedLoopSystem rotation_system() {
  ClosedLoopSystem sys;
  sys.n_w = 2;
  sys.n_p = 0;
  sys.n_c = 0;
  sys.n_e = 0;
  sys.state_names = {"w1", "w2"};
  sys.field = {parse("w2"), parse("-w1")};
  return sys;
}

Trajectory analytic_sine(double t_end, double dt, double phase = 0.0) {
  Trajectory tr;
  for (double t = 0; t <= t_end + 1e-12; t += dt) {
    tr.times.push_back(t);
    tr.states.push_back(Eigen::VectorXd::Constant(1, std::sin(t + phase)));
    tr.derivs.push_back(Eigen::VectorXd::Constant(1, std::cos(t + phase)));
  }
  return tr;
}

}  // namespace

TEST_CASE("rotation round trip") {
  ClosedLoopSystem sys = rotation_system();
  Eigen::VectorXd x0(2);
  x0 << 0, 1;
  Trajectory tr = integrate(sys, x0, kTwoPi, 1e-10, 1e-12);
  CHECK((tr.states.back() - x0).norm() <= 1e-8);
  CHECK(tr.rejected_steps < tr.accepted_steps);
}

TEST_CASE("constant field stays put") {
  ClosedLoopSystem sys = make_system({"x1"}, {"0"});
  Trajectory tr = integrate(sys, Eigen::VectorXd::Constant(1, 5.0), 10.0, 1e-8, 1e-10);
  for (const auto& s : tr.states) CHECK(s(0) == 5.0);
}

TEST_CASE("finite escape is reported near the blow-up time") {
  ClosedLoopSystem sys = make_system({"x1"}, {"x1^2"});
  try {
    integrate(sys, Eigen::VectorXd::Constant(1, 1.0), 2.0, 1e-8, 1e-10);
    FAIL("expected SimulationError");
  } catch (const SimulationError& err) {
    CHECK(err.kind == SimulationError::Kind::finite_escape);
    CHECK(err.t_reached > 0.9);   // x(t) = 1/(1-t)
    CHECK(err.t_reached < 1.05);
  }
}

TEST_CASE("dense output interpolates the rotation accurately") {
  ClosedLoopSystem sys = rotation_system();
  Eigen::VectorXd x0(2);
  x0 << 0, 1;
  Trajectory tr = integrate(sys, x0, 10.0, 1e-10, 1e-12);
  for (double t : {0.3, 1.7, 4.4, 9.99}) {
    Eigen::VectorXd v = tr.at(t);
    CHECK(std::abs(v(0) - std::sin(t)) <= 1e-8);
    CHECK(std::abs(v(1) - std::cos(t)) <= 1e-8);
  }
}

TEST_CASE("asymptotic order: fixed-step error falls ~2^5 per halving") {
  ClosedLoopSystem sys = rotation_system();
  Eigen::VectorXd x0(2);
  x0 << 0, 1;
  double err_h = (integrate_fixed_step(sys, x0, kTwoPi, 0.2).states.back() - x0).norm();
  double err_h2 = (integrate_fixed_step(sys, x0, kTwoPi, 0.1).states.back() - x0).norm();
  CHECK(err_h / err_h2 >= 16.0);  // order >= 4 asymptotically
}

TEST_CASE("halving rtol tightens the endpoint error") {
  ClosedLoopSystem sys = rotation_system();
  Eigen::VectorXd x0(2);
  x0 << 0, 1;
  double e1 = (integrate(sys, x0, kTwoPi, 1e-6, 1e-12).states.back() - x0).norm();
  double e2 = (integrate(sys, x0, kTwoPi, 5e-7, 1e-12).states.back() - x0).norm();
  CHECK(e2 < e1);
}

TEST_CASE("check_uub examples") {
  // xdot = -x + 1 from 10: x(t) = 1 + 9 e^{-t}
  ClosedLoopSystem decay = make_system({"x1"}, {"1 - x1"});
  Trajectory tr = integrate(decay, Eigen::VectorXd::Constant(1, 10.0), 20.0, 1e-10, 1e-12);
  UubVerdict v = check_uub({tr}, 10.0, 1.1);
  CHECK(v.bounded);
  CHECK(v.max_tail_norm == doctest::Approx(1.0 + 9e-10).epsilon(1e-7));

  ClosedLoopSystem zero = make_system({"x1"}, {"0"});
  Trajectory tz = integrate(zero, Eigen::VectorXd::Zero(1), 5.0, 1e-8, 1e-10);
  CHECK(check_uub({tz}, 1.0, 1e-6).bounded);

  ClosedLoopSystem grow = make_system({"x1"}, {"x1"});
  Trajectory tg = integrate(grow, Eigen::VectorXd::Constant(1, 1.0), 10.0, 1e-10, 1e-12);
  CHECK_FALSE(check_uub({tg}, 5.0, 100.0).bounded);  // e^10 > 100
}

TEST_CASE("steady state of a sine with the right period hint") {
  Trajectory tr = analytic_sine(100.0, 0.01);
  SteadyStateEstimate est = estimate_steady_state(tr, kTwoPi);
  CHECK(est.verdict == PeriodicityVerdict::periodic);
  CHECK(est.convergence_metric <= 1e-6 * est.state_scale);
  CHECK(est.periods_covered >= 2);
  CHECK(est.resample.size() ==
        static_cast<std::size_t>(est.periods_covered) * 2048 + 1);
}

TEST_CASE("steady state of a sine with a half period hint is aperiodic") {
  Trajectory tr = analytic_sine(100.0, 0.01);
  SteadyStateEstimate est = estimate_steady_state(tr, kTwoPi / 2);
  CHECK(est.verdict == PeriodicityVerdict::aperiodic);
  CHECK(est.convergence_metric == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("decay to equilibrium counts as periodic with the default period") {
  ClosedLoopSystem decay = make_system({"x1"}, {"-x1"});
  Trajectory tr = integrate(decay, Eigen::VectorXd::Constant(1, 1.0), 60.0, 1e-10, 1e-12);
  SteadyStateEstimate est = estimate_steady_state(tr, std::nullopt);
  CHECK(est.verdict == PeriodicityVerdict::periodic);
  CHECK(est.period == doctest::Approx(kTwoPi));
  CHECK(est.convergence_metric <= 1e-6 * est.state_scale);
}

TEST_CASE("autocorrelation scan recovers an unknown period") {
  Trajectory tr = analytic_sine(200.0, 0.01);
  SteadyStateEstimate est = estimate_steady_state(tr, std::nullopt);
  CHECK(est.verdict == PeriodicityVerdict::periodic);
  CHECK(est.period == doctest::Approx(kTwoPi).epsilon(0.02));
}

TEST_CASE("periodicity verdict is shift invariant") {
  for (int k : {0, 1, 3}) {
    Trajectory tr = analytic_sine(120.0, 0.01, kTwoPi * k);
    SteadyStateEstimate est = estimate_steady_state(tr, kTwoPi);
    CHECK(est.verdict == PeriodicityVerdict::periodic);
  }
}

TEST_CASE("steady state preconditions") {
  Trajectory tr = analytic_sine(10.0, 0.01);
  CHECK_THROWS_AS(estimate_steady_state(tr, kTwoPi), ValidationError);  // < 10 periods
}

TEST_CASE("reachable tail cloud contracts to the origin") {
  ClosedLoopSystem decay = make_system({"x1"}, {"-x1"});
  std::vector<Eigen::VectorXd> samples = {Eigen::VectorXd::Constant(1, -1.0),
                                          Eigen::VectorXd::Constant(1, 1.0)};
  IntegrateOptions opts;
  opts.rtol = 1e-10;
  opts.atol = 1e-14;
  auto cloud = reachable_tail_cloud(decay, samples, 20.0, 25.0, opts);
  REQUIRE(!cloud.empty());
  for (const auto& p : cloud) CHECK(std::abs(p(0)) <= 3e-9);  // e^{-20}

  auto full = reachable_tail_cloud(decay, samples, 0.0, 5.0, opts);
  bool has_minus = false, has_plus = false;
  for (const auto& p : full) {
    if (p(0) == -1.0) has_minus = true;
    if (p(0) == 1.0) has_plus = true;
  }
  CHECK(has_minus);  // t = 0 keeps the initial points
  CHECK(has_plus);
}

TEST_CASE("tail radius is monotone in t") {
  ClosedLoopSystem sys = make_system({"x1", "x2"}, {"-x1 + 0.5*x2", "-x2 - 0.5*x1"});
  std::vector<Eigen::VectorXd> samples;
  SplitMix64 rng(5);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd p(2);
    p << rng.next_uniform(-2, 2), rng.next_uniform(-2, 2);
    samples.push_back(p);
  }
  auto radius = [&](double t) {
    auto cloud = reachable_tail_cloud(sys, samples, t, 12.0);
    double r = 0;
    for (const auto& p : cloud) r = std::max(r, p.norm());
    return r;
  };
  double r1 = radius(1.0), r2 = radius(4.0), r3 = radius(8.0);
  CHECK(r1 >= r2 - 1e-9);
  CHECK(r2 >= r3 - 1e-9);
}

TEST_CASE("integrate validates inputs") {
  ClosedLoopSystem sys = make_system({"x1"}, {"0"});
  CHECK_THROWS_AS(integrate(sys, Eigen::VectorXd::Zero(2), 1.0, 1e-8, 1e-10), ValidationError);
  CHECK_THROWS_AS(integrate(sys, Eigen::VectorXd::Zero(1), -1.0, 1e-8, 1e-10), ValidationError);
  CHECK_THROWS_AS(integrate(sys, Eigen::VectorXd::Zero(1), 1.0, 0.0, 1e-10), ValidationError);
}
