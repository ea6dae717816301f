#pragma once

// Forward solvers: 2D periodic, 1D streak and axisymmetric models, each as
// a staged method-of-lines integration (film + osmolarity, then
// fluorescein).

#include "tearfilm/thin_film.hpp"

#include <chrono>
#include <span>
#include <string>

namespace tearfilm {

struct SolverOptions {
  double rel_tol = 1e-7;
  double abs_tol = 1e-9;
  long max_steps = 50000;
  int m = 40;  // x points
  int n = 40;  // y points
  int radial_cells = 64;
  double radial_R0 = pi;
  /// Minimum film thickness treated as breakup; the solve stops there.
  double touchdown_h = 1e-3;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2) || !(abs_tol > 0.0 && abs_tol <= 1e-2))
      throw ConfigError("solver tolerances must lie in (0, 1e-2]");
    Grid2D(m, n).validate();
    if (max_steps < 1) throw ConfigError("max_steps must be positive");
  }

  BdfOptions bdf() const {
    BdfOptions b;
    b.rtol = rel_tol;
    b.atol = abs_tol;
    b.max_steps = max_steps;
    return b;
  }
};

enum class SolveStatus { success, integrator_failure, step_underflow };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::success: return "success";
    case SolveStatus::integrator_failure: return "integrator-failure";
    case SolveStatus::step_underflow: return "step-underflow";
  }
  return "unknown";
}

struct SolveStats {
  long steps_stage1 = 0;
  long steps_stage2 = 0;
  long rhs_evals = 0;
  double seconds = 0.0;
};

struct SolveResult {
  std::vector<double> times;
  std::vector<FieldState> states;
  SolveStatus status = SolveStatus::success;
  std::string message;
  SolveStats stats;

  bool ok() const { return status == SolveStatus::success; }
};

/// count equally spaced times on [0, t_end], both ends included.
inline std::vector<double> uniform_times(double t_end, int count) {
  if (count < 2) return {t_end};
  std::vector<double> t(count);
  for (int i = 0; i < count; ++i) t[i] = t_end * i / double(count - 1);
  t.back() = t_end;
  return t;
}

namespace detail {

inline void validate_times(std::span<const double> times) {
  if (times.empty()) throw ConfigError("at least one output time is required");
  if (times.front() < 0.0) throw ConfigError("output times must be non-negative");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw ConfigError("output times must be strictly increasing");
  if (!(times.back() > 0.0)) throw ConfigError("final time must be positive");
}

struct StageRun {
  SolveStatus status = SolveStatus::success;
  std::string message;
  std::vector<VectorXd> outputs;
  long steps = 0;
  long rhs_evals = 0;
};

/// Integrate from t = 0 and sample at the requested times. When track is
/// given, every accepted step is recorded with its derivative.
template <class System, class Linear, class Stop>
StageRun run_stage(System& sys, Linear& lin, const BdfOptions& bo, const VectorXd& y0,
                   std::span<const double> times, HermiteTrack* track, Stop&& stop) {
  StageRun run;
  Bdf<System, Linear> bdf(sys, lin, bo);
  const double t_end = times.back();
  bdf.initialize(0.0, y0, t_end);
  VectorXd f(y0.size());
  if (track) {
    track->clear();
    sys.rhs(0.0, y0, f);
    track->push(0.0, y0, f);
  }
  std::size_t next = 0;
  while (next < times.size() && times[next] <= 0.0) {
    run.outputs.push_back(y0);
    ++next;
  }
  while (next < times.size()) {
    const StepStatus st = bdf.step();
    if (st != StepStatus::ok) {
      run.status = st == StepStatus::step_underflow ? SolveStatus::step_underflow : SolveStatus::integrator_failure;
      run.message = st == StepStatus::step_underflow ? "step size underflow at t=" + std::to_string(bdf.t())
                                                      : "integrator failure at t=" + std::to_string(bdf.t());
      break;
    }
    if (!bdf.y().allFinite()) {
      run.status = SolveStatus::integrator_failure;
      run.message = "non-finite state at t=" + std::to_string(bdf.t());
      break;
    }
    if (track) {
      sys.rhs(bdf.t(), bdf.y(), f);
      track->push(bdf.t(), bdf.y(), f);
    }
    while (next < times.size() && times[next] <= bdf.t()) {
      run.outputs.push_back(times[next] == bdf.t() ? bdf.y() : bdf.dense(times[next]));
      ++next;
    }
    if (std::string why; stop(bdf.y(), why)) {
      run.status = SolveStatus::integrator_failure;
      run.message = why + " at t=" + std::to_string(bdf.t());
      break;
    }
  }
  run.steps = bdf.steps;
  run.rhs_evals = bdf.rhs_evals + lin.rhs_evals;
  return run;
}

inline auto touchdown_guard(Index points, double floor) {
  return [points, floor](const VectorXd& y, std::string& why) {
    if (y.head(points).minCoeff() < floor) {
      why = "film touchdown (h below " + std::to_string(floor) + ")";
      return true;
    }
    return false;
  };
}

inline auto no_guard() {
  return [](const VectorXd&, std::string&) { return false; };
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Full-order 2D solve with outputs at the given times.
inline SolveResult solve_2d(const EvaporationSpec& spec, const NondimParams& nd, const InitialConditions& ic,
                            std::span<const double> times, const SolverOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  opts.validate();
  ic.validate();
  detail::validate_times(times);
  const Grid2D grid(opts.m, opts.n);
  const Index N = grid.size();
  const auto co = FilmCoefficients::from(nd);

  const Array2 Jfield = EvaporationField(spec).sample(grid);
  VectorXd J = Eigen::Map<const VectorXd>(Jfield.data(), N);

  SolveResult res;
  res.times.assign(times.begin(), times.end());

  FilmStage1_2D s1(grid.n, grid.m, J, co);
  FilmStage1Preconditioner2D pre1(grid.n, grid.m, co);
  KrylovNewtonSolver lin1(s1, pre1);
  VectorXd y0 = VectorXd::Ones(2 * N);
  HermiteTrack track;
  auto run1 = detail::run_stage(s1, lin1, opts.bdf(), y0, times, &track, detail::touchdown_guard(N, opts.touchdown_h));
  res.stats.steps_stage1 = run1.steps;
  res.stats.rhs_evals = run1.rhs_evals;
  if (run1.status != SolveStatus::success) {
    res.status = run1.status;
    res.message = "stage 1: " + run1.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }

  FilmStage2_2D s2(grid.n, grid.m, [&track](double t, VectorXd& y) { track.eval(t, y); }, co);
  FilmStage2Preconditioner2D pre2(grid.n, grid.m, co);
  KrylovNewtonSolver lin2(s2, pre2);
  VectorXd g0 = VectorXd::Constant(N, ic.f0);
  auto run2 = detail::run_stage(s2, lin2, opts.bdf(), g0, times, nullptr, detail::no_guard());
  res.stats.steps_stage2 = run2.steps;
  res.stats.rhs_evals += run2.rhs_evals;
  if (run2.status != SolveStatus::success) {
    res.status = run2.status;
    res.message = "stage 2: " + run2.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }

  VectorXd p, u, v;
  for (std::size_t k = 0; k < times.size(); ++k) {
    FieldState s;
    s.t = times[k];
    const VectorXd& y = run1.outputs[k];
    s.h = as_field(y.data(), grid.n, grid.m);
    s.c = as_field(y.data() + N, grid.n, grid.m) / s.h;
    s.f = as_field(run2.outputs[k].data(), grid.n, grid.m) / s.h;
    const VectorXd h = y.head(N);
    s1.diagnostics(h, p, u, v);
    s.p = as_field(p.data(), grid.n, grid.m);
    s.u_bar = as_field(u.data(), grid.n, grid.m);
    s.v_bar = as_field(v.data(), grid.n, grid.m);
    res.states.push_back(std::move(s));
  }
  res.stats.seconds = detail::seconds_since(t0);
  return res;
}

inline SolveResult solve_2d(const EvaporationSpec& spec, const NondimParams& nd, const InitialConditions& ic,
                            double t_end, const SolverOptions& opts = {}, int outputs = 11) {
  const auto times = uniform_times(t_end, outputs);
  return solve_2d(spec, nd, ic, std::span<const double>(times), opts);
}

/// Periodic streak model on (-pi, pi] with opts.m points. States are 1 x m.
inline SolveResult solve_streak(const StreakEvaporation& spec, const NondimParams& nd, const InitialConditions& ic,
                                std::span<const double> times, const SolverOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  opts.validate();
  ic.validate();
  detail::validate_times(times);
  if (!(spec.x_w > 0.0)) throw GeometryError("streak width must be positive");
  const int n = opts.m;
  const auto xs = periodic_nodes(n);
  VectorXd J(n);
  for (int j = 0; j < n; ++j) J[j] = eval_streak_J(spec, xs[j]);
  const auto co = FilmCoefficients::from(nd);

  SolveResult res;
  res.times.assign(times.begin(), times.end());
  StreakStage1 s1(n, J, co);
  DenseNewtonSolver lin1(s1);
  HermiteTrack track;
  auto run1 = detail::run_stage(s1, lin1, opts.bdf(), VectorXd::Ones(2 * n), times, &track,
                                detail::touchdown_guard(n, opts.touchdown_h));
  res.stats.steps_stage1 = run1.steps;
  res.stats.rhs_evals = run1.rhs_evals;
  if (run1.status != SolveStatus::success) {
    res.status = run1.status;
    res.message = "stage 1: " + run1.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }
  StreakStage2 s2(n, [&track](double t, VectorXd& y) { track.eval(t, y); }, co);
  DenseNewtonSolver lin2(s2);
  auto run2 = detail::run_stage(s2, lin2, opts.bdf(), VectorXd::Constant(n, ic.f0), times, nullptr, detail::no_guard());
  res.stats.steps_stage2 = run2.steps;
  res.stats.rhs_evals += run2.rhs_evals;
  if (run2.status != SolveStatus::success) {
    res.status = run2.status;
    res.message = "stage 2: " + run2.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }
  VectorXd p, u;
  for (std::size_t k = 0; k < times.size(); ++k) {
    FieldState s;
    s.t = times[k];
    const VectorXd& y = run1.outputs[k];
    s.h = as_field(y.data(), 1, n);
    s.c = as_field(y.data() + n, 1, n) / s.h;
    s.f = as_field(run2.outputs[k].data(), 1, n) / s.h;
    s1.diagnostics(y.head(n), p, u);
    s.p = as_field(p.data(), 1, n);
    s.u_bar = as_field(u.data(), 1, n);
    s.v_bar = Array2::Zero(1, n);
    res.states.push_back(std::move(s));
  }
  res.stats.seconds = detail::seconds_since(t0);
  return res;
}

inline SolveResult solve_streak(const StreakEvaporation& spec, const NondimParams& nd, const InitialConditions& ic,
                                double t_end, const SolverOptions& opts = {}, int outputs = 11) {
  const auto times = uniform_times(t_end, outputs);
  return solve_streak(spec, nd, ic, std::span<const double>(times), opts);
}

/// Axisymmetric model on cell centres r_j = (j + 1/2) R0 / cells. States are
/// 1 x cells.
inline SolveResult solve_radial(const RadialEvaporation& spec, const NondimParams& nd, const InitialConditions& ic,
                                std::span<const double> times, const SolverOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  opts.validate();
  ic.validate();
  detail::validate_times(times);
  if (!(spec.r_w > 0.0)) throw GeometryError("radial width must be positive");
  const RadialGrid grid(opts.radial_cells, opts.radial_R0);
  const int n = grid.cells();
  VectorXd J(n);
  for (int j = 0; j < n; ++j) J[j] = eval_radial_J(spec, grid.r(j));
  const auto co = FilmCoefficients::from(nd);

  SolveResult res;
  res.times.assign(times.begin(), times.end());
  RadialStage1 s1(grid, J, co);
  DenseNewtonSolver lin1(s1);
  HermiteTrack track;
  auto run1 = detail::run_stage(s1, lin1, opts.bdf(), VectorXd::Ones(2 * n), times, &track,
                                detail::touchdown_guard(n, opts.touchdown_h));
  res.stats.steps_stage1 = run1.steps;
  res.stats.rhs_evals = run1.rhs_evals;
  if (run1.status != SolveStatus::success) {
    res.status = run1.status;
    res.message = "stage 1: " + run1.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }
  RadialStage2 s2(grid, [&track](double t, VectorXd& y) { track.eval(t, y); }, co);
  DenseNewtonSolver lin2(s2);
  auto run2 = detail::run_stage(s2, lin2, opts.bdf(), VectorXd::Constant(n, ic.f0), times, nullptr, detail::no_guard());
  res.stats.steps_stage2 = run2.steps;
  res.stats.rhs_evals += run2.rhs_evals;
  if (run2.status != SolveStatus::success) {
    res.status = run2.status;
    res.message = "stage 2: " + run2.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }
  VectorXd p, u;
  for (std::size_t k = 0; k < times.size(); ++k) {
    FieldState s;
    s.t = times[k];
    const VectorXd& y = run1.outputs[k];
    s.h = as_field(y.data(), 1, n);
    s.c = as_field(y.data() + n, 1, n) / s.h;
    s.f = as_field(run2.outputs[k].data(), 1, n) / s.h;
    s1.diagnostics(y.head(n), p, u);
    s.p = as_field(p.data(), 1, n);
    s.u_bar = as_field(u.data(), 1, n);
    s.v_bar = Array2::Zero(1, n);
    res.states.push_back(std::move(s));
  }
  res.stats.seconds = detail::seconds_since(t0);
  return res;
}

inline SolveResult solve_radial(const RadialEvaporation& spec, const NondimParams& nd, const InitialConditions& ic,
                                double t_end, const SolverOptions& opts = {}, int outputs = 11) {
  const auto times = uniform_times(t_end, outputs);
  return solve_radial(spec, nd, ic, std::span<const double>(times), opts);
}

}  // namespace tearfilm
