#pragma once

// Measurements shared by the unit tests and the acceptance binary.

#include "tearfilm/forward.hpp"
#include "tearfilm/uniform_oracle.hpp"

#include <random>

namespace tearfilm::checks {

struct BalanceReport {
  bool solved = false;
  std::string message;
  double hc_drift = 0.0;       // max |Q(t) - Q(0)| / |Q(0)|, Q = integral of h c
  double hf_drift = 0.0;       // same for h f
  double water_residual = 0.0; // max over probe times, relative to the integral of |J| + |Pc (c - 1)|
};

/// Solute totals over [0, t_end] and the water balance
/// d/dt int h = int (-J + Pc (c - 1)), the derivative taken by central
/// differences of the solver output at a handful of probe times.
inline BalanceReport balance_check(const EvaporationSpec& spec, const NondimParams& nd, const InitialConditions& ic,
                                   const SolverOptions& opts, double t_end = 1.0, double delta = 1e-3) {
  std::vector<double> probes = {0.2 * t_end, 0.4 * t_end, 0.6 * t_end, 0.8 * t_end};
  std::vector<double> times = {0.0};
  for (double t : probes) times.insert(times.end(), {t - delta, t, t + delta});
  times.push_back(t_end);

  BalanceReport rep;
  const auto r = solve_2d(spec, nd, ic, std::span<const double>(times), opts);
  rep.solved = r.ok();
  rep.message = r.message;
  if (!r.ok()) return rep;

  const Grid2D g(opts.m, opts.n);
  const double dA = g.cell_area();
  const Array2 J = EvaporationField(spec).sample(g);
  auto total = [dA](const Array2& a) { return a.sum() * dA; };
  const double hc0 = total(r.states[0].h * r.states[0].c), hf0 = total(r.states[0].h * r.states[0].f);
  for (const auto& s : r.states) {
    rep.hc_drift = std::max(rep.hc_drift, std::abs(total(s.h * s.c) - hc0) / std::abs(hc0));
    rep.hf_drift = std::max(rep.hf_drift, std::abs(total(s.h * s.f) - hf0) / std::abs(hf0));
  }
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto& lo = r.states[1 + 3 * p];
    const auto& mid = r.states[2 + 3 * p];
    const auto& hi = r.states[3 + 3 * p];
    const double dHdt = (total(hi.h) - total(lo.h)) / (2.0 * delta);
    const Array2 osm = nd.Pc * (mid.c - 1.0);
    const double rhs = total(-J + osm);
    const double scale = total(J.abs() + osm.abs());
    rep.water_residual = std::max(rep.water_residual, std::abs(dHdt - rhs) / scale);
  }
  return rep;
}

/// Random single-ellipse specs that are periodic on the domain and keep
/// the film from touching down before t = 1.
inline std::vector<EvaporationSpec> random_valid_specs(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<EvaporationSpec> out;
  while (int(out.size()) < count) {
    const double v_b = 0.02 + 0.1 * U(rng);
    EllipticPeak p;
    p.x0 = 1.0 * (U(rng) - 0.5);
    p.y0 = 1.0 * (U(rng) - 0.5);
    const double ang = 2.0 * pi * U(rng), focal = 0.1 + 0.4 * U(rng);
    p.fx = focal * std::cos(ang);
    p.fy = focal * std::sin(ang);
    p.e = 0.3 + 0.65 * U(rng);
    p.beta = 0.3 + 1.2 * U(rng);
    p.a = 0.2 + 0.6 * U(rng);
    EvaporationSpec s{v_b, {p}};
    if (periodicity_defect(s) < periodicity_threshold) out.push_back(s);
  }
  return out;
}

/// Max deviation of a uniform-J solve (2D) from the ODE reference at t = 0.5 and t = 1.
struct UniformAgreement {
  bool solved = false;
  double h = 0.0, c = 0.0, f = 0.0;
};

inline UniformAgreement uniform_agreement(double J, const NondimParams& nd, const InitialConditions& ic,
                                          const SolverOptions& opts) {
  const std::vector<double> times = {0.5, 1.0};
  const EvaporationSpec flat{J, {CircularPeak{0.0, 0.0, 1.0, 1.0, J}}};
  const auto r = solve_2d(flat, nd, ic, std::span<const double>(times), opts);
  UniformAgreement a;
  a.solved = r.ok();
  if (!r.ok()) return a;
  const auto ref = uniform_ode_oracle(J, nd.Pc, ic, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto& s = r.states[k];
    const auto& o = ref.samples[k];
    a.h = std::max(a.h, (s.h - o.h).abs().maxCoeff());
    a.c = std::max(a.c, (s.c - o.c).abs().maxCoeff());
    a.f = std::max(a.f, (s.f - o.f).abs().maxCoeff());
  }
  return a;
}

}  // namespace tearfilm::checks
