#pragma once

// Spatially uniform reduction of the film equations, integrated with an
// explicit adaptive Runge-Kutta (Dormand-Prince) scheme. Used as an
// independent reference for the method-of-lines solvers.

#include "tearfilm/model.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace tearfilm {

struct UniformSample {
  double t = 0.0;
  double h = 1.0, c = 1.0, f = 1.0;
};

struct UniformTrajectory {
  std::vector<UniformSample> samples;
  /// Time at which h reached zero, if it did before the final time.
  std::optional<double> touchdown;
};

/// dh/dt = -J + Pc (c - 1), h dc/dt = J c - Pc (c - 1) c, h df/dt = J f - Pc (c - 1) f
inline UniformTrajectory uniform_ode_oracle(double J, double Pc, const InitialConditions& ic,
                                            std::span<const double> times, double tol = 1e-10) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 3>;
  UniformTrajectory out;
  auto rhs = [J, Pc](const State& s, State& ds, double) {
    const double h = s[0], c = s[1], f = s[2];
    const double osm = Pc * (c - 1.0);
    ds[0] = -J + osm;
    ds[1] = (J - osm) * c / h;
    ds[2] = (J - osm) * f / h;
  };
  State s = {1.0, 1.0, ic.f0};
  auto stepper = odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<State>());
  double t = 0.0;
  stepper.initialize(s, t, 1e-6);
  std::size_t next = 0;
  const double t_end = times.empty() ? 0.0 : times.back();
  constexpr double h_floor = 1e-9;
  while (next < times.size() && times[next] <= 0.0) {
    out.samples.push_back({times[next], s[0], s[1], s[2]});
    ++next;
  }
  while (next < times.size() && stepper.current_time() < t_end) {
    stepper.do_step(rhs);
    State cur = stepper.current_state();
    while (next < times.size() && times[next] <= stepper.current_time()) {
      State x;
      stepper.calc_state(times[next], x);
      out.samples.push_back({times[next], x[0], x[1], x[2]});
      ++next;
    }
    if (!(cur[0] > h_floor)) {
      out.touchdown = stepper.current_time();
      break;
    }
  }
  return out;
}

}  // namespace tearfilm
