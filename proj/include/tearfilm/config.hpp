#pragma once

// INI run configuration. Every key has a built-in default, unknown sections
// and keys are rejected, and the resolved configuration can be written back
// out so that a run can be repeated exactly.

#include "tearfilm/inverse.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace tearfilm {

enum class FitMode { ellipse, multi, radial, streak };

inline const char* to_string(FitMode m) {
  switch (m) {
    case FitMode::ellipse: return "2d";
    case FitMode::multi: return "multi";
    case FitMode::radial: return "radial";
    case FitMode::streak: return "streak";
  }
  return "2d";
}

struct EvaporationConfig {
  std::string model = "ellipse";  // ellipse | radial | streak
  EvaporationSpec spec{0.07, {EllipticPeak{0.0, 0.0, 0.5, 0.5, 0.9, 0.8, 0.5}}};
  RadialEvaporation radial{0.07, 1.0, 0.8, 0.5};
  StreakEvaporation streak{0.07, 1.0, 0.8, 0.5};
};

struct RunConfig {
  PhysicalParams physical;
  SolverOptions solver;
  double t_end = 1.0;
  int outputs = 11;
  InitialConditions initial;
  EvaporationConfig evaporation;
  EvaporationConfig guess{"ellipse",
                          EvaporationSpec{0.2, {EllipticPeak{0.1, 0.1, 0.3, 0.3, 0.7, 1.5, 1.0}}},
                          RadialEvaporation{0.1, 1.0, 1.0, 1.0},
                          StreakEvaporation{0.1, 1.0, 1.0, 1.0}};
  bool guess_from_final_frame = false;
  OptimizerOptions optimizer;
  ObjectiveOptions objective;
  bool full_order_polish = true;
  FitMode fit_mode = FitMode::ellipse;
  std::string fit_data;
  std::string fit_case;
  StreakAxis streak_axis = StreakAxis::horizontal;
  double center_x = 0.0, center_y = 0.0;
  bool center_from_data = true;
  PreprocessOptions preprocess;
  std::string frames_dir;
  std::string metadata;
  double noise_sigma = 0.0;
  double image_scale = 1.25;
  std::uint64_t seed = 1;
};

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"physical", {"mu", "sigma0", "rho", "d", "v_max", "v_min", "V_w", "D_f", "D_o", "c0", "P0", "eps_f", "f_cr"}},
      {"grid", {"m", "n", "radial_cells", "radial_R0"}},
      {"solver", {"rel_tol", "abs_tol", "max_steps", "touchdown_h", "t_end", "outputs"}},
      {"initial", {"f0"}},
      {"evaporation", {}},
      {"guess", {"from_final_frame"}},
      {"optimizer",
       {"algorithm", "x_tol", "f_tol", "max_iterations", "max_evaluations", "initial_step", "max_step", "penalty",
        "max_restarts"}},
      {"rom", {"enabled", "snapshot_window", "snapshot_count", "energy", "max_modes", "rebuild_every", "polish"}},
      {"norm", {"x_lo", "x_hi", "y_lo", "y_hi", "frame_stride"}},
      {"fit", {"mode", "data", "case", "axis", "center_x", "center_y"}},
      {"preprocess", {"frames", "metadata", "search_radius", "sigma", "window_a", "window_b", "window_k", "m", "n"}},
      {"synth", {"noise_sigma", "image_scale"}},
      {"run", {"seed"}},
  };
  return keys;
}

/// Keys of the evaporation-like sections: model, v_b, the 1D widths and
/// per-peak keys a1, fx1, ... for any peak index.
inline bool evaporation_key(const std::string& k) {
  static const std::set<std::string> plain = {"model", "peaks", "v_b", "r_w", "x_w", "a", "beta"};
  if (plain.count(k)) return true;
  for (const char* p : {"a", "fx", "fy", "x", "y", "e", "beta"}) {
    const std::string pre(p);
    if (k.size() > pre.size() && k.compare(0, pre.size(), pre) == 0 &&
        k.find_first_not_of("0123456789", pre.size()) == std::string::npos && k[pre.size()] != '0')
      return true;
  }
  return false;
}

template <class T>
T get(const ptree& pt, const std::string& path, const T& fallback) {
  const auto v = pt.get_optional<std::string>(path);
  if (!v) return fallback;
  std::istringstream is(*v);
  T out{};
  is >> out;
  if (is.fail() || !(is >> std::ws).eof()) throw ConfigError("invalid value for '" + path + "': " + *v);
  return out;
}

template <>
inline std::string get<std::string>(const ptree& pt, const std::string& path, const std::string& fallback) {
  return pt.get<std::string>(path, fallback);
}

template <>
inline bool get<bool>(const ptree& pt, const std::string& path, const bool& fallback) {
  const auto v = pt.get_optional<std::string>(path);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("invalid boolean for '" + path + "': " + *v);
}

inline EvaporationConfig read_evaporation(const ptree& pt, const std::string& sec, EvaporationConfig e) {
  e.model = get<std::string>(pt, sec + ".model", e.model);
  if (e.model != "ellipse" && e.model != "radial" && e.model != "streak")
    throw ConfigError(sec + ".model must be ellipse, radial or streak");
  const double v_b = get<double>(pt, sec + ".v_b", e.spec.v_b);
  const int K = get<int>(pt, sec + ".peaks", int(e.spec.peaks.size()));
  if (K < 1) throw ConfigError(sec + ".peaks must be at least 1");
  EvaporationSpec s;
  s.v_b = v_b;
  for (int k = 0; k < K; ++k) {
    EllipticPeak q = k < int(e.spec.peaks.size()) && std::holds_alternative<EllipticPeak>(e.spec.peaks[k])
                         ? std::get<EllipticPeak>(e.spec.peaks[k])
                         : EllipticPeak{};
    const std::string i = std::to_string(k + 1);
    q.a = get<double>(pt, sec + ".a" + i, q.a);
    q.fx = get<double>(pt, sec + ".fx" + i, q.fx);
    q.fy = get<double>(pt, sec + ".fy" + i, q.fy);
    q.x0 = get<double>(pt, sec + ".x" + i, q.x0);
    q.y0 = get<double>(pt, sec + ".y" + i, q.y0);
    q.e = get<double>(pt, sec + ".e" + i, q.e);
    q.beta = get<double>(pt, sec + ".beta" + i, q.beta);
    s.peaks.push_back(q);
  }
  e.spec = s;
  e.radial = {get<double>(pt, sec + ".v_b", e.radial.v_b), get<double>(pt, sec + ".r_w", e.radial.r_w),
              get<double>(pt, sec + ".a", e.radial.a), get<double>(pt, sec + ".beta", e.radial.beta)};
  e.streak = {get<double>(pt, sec + ".v_b", e.streak.v_b), get<double>(pt, sec + ".x_w", e.streak.x_w),
              get<double>(pt, sec + ".a", e.streak.a), get<double>(pt, sec + ".beta", e.streak.beta)};
  return e;
}

inline void write_evaporation(std::ostream& os, const std::string& sec, const EvaporationConfig& e) {
  os << "[" << sec << "]\n";
  os << "model = " << e.model << "\n";
  if (e.model == "ellipse") {
    os << "v_b = " << e.spec.v_b << "\npeaks = " << e.spec.peaks.size() << "\n";
    for (std::size_t k = 0; k < e.spec.peaks.size(); ++k) {
      const auto& q = std::get<EllipticPeak>(e.spec.peaks[k]);
      const auto i = std::to_string(k + 1);
      os << "a" << i << " = " << q.a << "\nfx" << i << " = " << q.fx << "\nfy" << i << " = " << q.fy << "\nx" << i
         << " = " << q.x0 << "\ny" << i << " = " << q.y0 << "\ne" << i << " = " << q.e << "\nbeta" << i << " = "
         << q.beta << "\n";
    }
  } else if (e.model == "radial") {
    os << "v_b = " << e.radial.v_b << "\nr_w = " << e.radial.r_w << "\na = " << e.radial.a
       << "\nbeta = " << e.radial.beta << "\n";
  } else {
    os << "v_b = " << e.streak.v_b << "\nx_w = " << e.streak.x_w << "\na = " << e.streak.a
       << "\nbeta = " << e.streak.beta << "\n";
  }
}

}  // namespace detail

/// Parse INI text; every missing key keeps its default.
inline RunConfig parse_config(std::istream& is, const std::string& origin = "config") {
  using detail::get;
  detail::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const auto& allowed = detail::allowed_keys();
  for (const auto& [sec, body] : pt) {
    const auto it = allowed.find(sec);
    if (it == allowed.end()) throw ConfigError(origin + ": unknown section [" + sec + "]");
    if (body.empty() && !body.data().empty()) throw ConfigError(origin + ": key '" + sec + "' outside any section");
    for (const auto& [key, _] : body) {
      const bool evap = (sec == "evaporation" || sec == "guess") && detail::evaporation_key(key);
      if (!evap && !it->second.count(key)) throw ConfigError(origin + ": unknown key '" + key + "' in [" + sec + "]");
    }
  }

  RunConfig c;
  auto& ph = c.physical;
  ph.mu = get(pt, "physical.mu", ph.mu);
  ph.sigma0 = get(pt, "physical.sigma0", ph.sigma0);
  ph.rho = get(pt, "physical.rho", ph.rho);
  ph.d = get(pt, "physical.d", ph.d);
  ph.v_max = get(pt, "physical.v_max", ph.v_max);
  ph.v_min = get(pt, "physical.v_min", ph.v_min);
  ph.V_w = get(pt, "physical.V_w", ph.V_w);
  ph.D_f = get(pt, "physical.D_f", ph.D_f);
  ph.D_o = get(pt, "physical.D_o", ph.D_o);
  ph.c0 = get(pt, "physical.c0", ph.c0);
  ph.P0 = get(pt, "physical.P0", ph.P0);
  ph.eps_f = get(pt, "physical.eps_f", ph.eps_f);
  ph.f_cr = get(pt, "physical.f_cr", ph.f_cr);

  auto& so = c.solver;
  so.m = get(pt, "grid.m", so.m);
  so.n = get(pt, "grid.n", so.n);
  so.radial_cells = get(pt, "grid.radial_cells", so.radial_cells);
  so.radial_R0 = get(pt, "grid.radial_R0", so.radial_R0);
  so.rel_tol = get(pt, "solver.rel_tol", so.rel_tol);
  so.abs_tol = get(pt, "solver.abs_tol", so.abs_tol);
  so.max_steps = get(pt, "solver.max_steps", so.max_steps);
  so.touchdown_h = get(pt, "solver.touchdown_h", so.touchdown_h);
  c.t_end = get(pt, "solver.t_end", c.t_end);
  c.outputs = get(pt, "solver.outputs", c.outputs);
  c.initial.f0 = get(pt, "initial.f0", c.initial.f0);

  c.evaporation = detail::read_evaporation(pt, "evaporation", c.evaporation);
  c.guess = detail::read_evaporation(pt, "guess", c.guess);
  c.guess_from_final_frame = get(pt, "guess.from_final_frame", c.guess_from_final_frame);

  auto& op = c.optimizer;
  op.algorithm = parse_algorithm(get<std::string>(pt, "optimizer.algorithm", to_string(op.algorithm)));
  op.x_tol = get(pt, "optimizer.x_tol", op.x_tol);
  op.f_tol = get(pt, "optimizer.f_tol", op.f_tol);
  op.max_iterations = get(pt, "optimizer.max_iterations", op.max_iterations);
  op.max_evaluations = get(pt, "optimizer.max_evaluations", op.max_evaluations);
  op.initial_step = get(pt, "optimizer.initial_step", op.initial_step);
  op.max_step = get(pt, "optimizer.max_step", op.max_step);
  op.penalty = get(pt, "optimizer.penalty", op.penalty);
  op.max_restarts = get(pt, "optimizer.max_restarts", op.max_restarts);

  auto& ob = c.objective;
  ob.mode = get(pt, "rom.enabled", ob.mode == ForwardMode::pod) ? ForwardMode::pod : ForwardMode::full;
  ob.rom.snapshot_window = get(pt, "rom.snapshot_window", ob.rom.snapshot_window);
  ob.rom.snapshot_count = get(pt, "rom.snapshot_count", ob.rom.snapshot_count);
  ob.rom.energy = get(pt, "rom.energy", ob.rom.energy);
  ob.rom.max_modes = get(pt, "rom.max_modes", ob.rom.max_modes);
  ob.rebuild_every = get(pt, "rom.rebuild_every", ob.rebuild_every);
  c.full_order_polish = get(pt, "rom.polish", c.full_order_polish);
  ob.rect.x_lo = get(pt, "norm.x_lo", ob.rect.x_lo);
  ob.rect.x_hi = get(pt, "norm.x_hi", ob.rect.x_hi);
  ob.rect.y_lo = get(pt, "norm.y_lo", ob.rect.y_lo);
  ob.rect.y_hi = get(pt, "norm.y_hi", ob.rect.y_hi);
  ob.frame_stride = get(pt, "norm.frame_stride", ob.frame_stride);
  ob.penalty = op.penalty;

  const std::string mode = get<std::string>(pt, "fit.mode", to_string(c.fit_mode));
  if (mode == "2d") c.fit_mode = FitMode::ellipse;
  else if (mode == "multi") c.fit_mode = FitMode::multi;
  else if (mode == "radial") c.fit_mode = FitMode::radial;
  else if (mode == "streak") c.fit_mode = FitMode::streak;
  else throw ConfigError("fit.mode must be 2d, multi, radial or streak");
  c.fit_data = get<std::string>(pt, "fit.data", c.fit_data);
  c.fit_case = get<std::string>(pt, "fit.case", c.fit_case);
  const std::string axis = get<std::string>(pt, "fit.axis", "horizontal");
  if (axis != "horizontal" && axis != "vertical") throw ConfigError("fit.axis must be horizontal or vertical");
  c.streak_axis = axis == "horizontal" ? StreakAxis::horizontal : StreakAxis::vertical;
  c.center_from_data = !pt.get_optional<std::string>("fit.center_x") && !pt.get_optional<std::string>("fit.center_y");
  c.center_x = get(pt, "fit.center_x", c.center_x);
  c.center_y = get(pt, "fit.center_y", c.center_y);

  auto& pp = c.preprocess;
  c.frames_dir = get<std::string>(pt, "preprocess.frames", c.frames_dir);
  c.metadata = get<std::string>(pt, "preprocess.metadata", c.metadata);
  pp.search_radius = get(pt, "preprocess.search_radius", pp.search_radius);
  pp.sigma = get(pt, "preprocess.sigma", pp.sigma);
  pp.window.a = get(pt, "preprocess.window_a", pp.window.a);
  pp.window.b = get(pt, "preprocess.window_b", pp.window.b);
  pp.window.k = get(pt, "preprocess.window_k", pp.window.k);
  pp.m = get(pt, "preprocess.m", pp.m);
  pp.n = get(pt, "preprocess.n", pp.n);

  c.noise_sigma = get(pt, "synth.noise_sigma", c.noise_sigma);
  c.image_scale = get(pt, "synth.image_scale", c.image_scale);
  c.seed = get(pt, "run.seed", c.seed);

  // Validation of everything that does not depend on the command.
  c.physical.validate();
  c.solver.validate();
  c.initial.validate();
  c.optimizer.validate();
  c.objective.validate();
  if (!(c.t_end > 0.0)) throw ConfigError("solver.t_end must be positive");
  if (c.outputs < 2) throw ConfigError("solver.outputs must be at least 2");
  if (!(c.noise_sigma >= 0.0)) throw ConfigError("synth.noise_sigma must be non-negative");
  if (!(c.image_scale > 0.0)) throw ConfigError("synth.image_scale must be positive");
  if (pp.search_radius < 1) throw ConfigError("preprocess.search_radius must be at least 1");
  if (!(pp.sigma > 0.0)) throw ConfigError("preprocess.sigma must be positive");
  Grid2D(pp.m, pp.n).validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  return parse_config(is, path);
}

/// The fully resolved configuration as INI text.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto& ph = c.physical;
  os << "[physical]\nmu = " << ph.mu << "\nsigma0 = " << ph.sigma0 << "\nrho = " << ph.rho << "\nd = " << ph.d
     << "\nv_max = " << ph.v_max << "\nv_min = " << ph.v_min << "\nV_w = " << ph.V_w << "\nD_f = " << ph.D_f
     << "\nD_o = " << ph.D_o << "\nc0 = " << ph.c0 << "\nP0 = " << ph.P0 << "\neps_f = " << ph.eps_f
     << "\nf_cr = " << ph.f_cr << "\n\n";
  const auto& so = c.solver;
  os << "[grid]\nm = " << so.m << "\nn = " << so.n << "\nradial_cells = " << so.radial_cells
     << "\nradial_R0 = " << so.radial_R0 << "\n\n";
  os << "[solver]\nrel_tol = " << so.rel_tol << "\nabs_tol = " << so.abs_tol << "\nmax_steps = " << so.max_steps
     << "\ntouchdown_h = " << so.touchdown_h << "\nt_end = " << c.t_end << "\noutputs = " << c.outputs << "\n\n";
  os << "[initial]\nf0 = " << c.initial.f0 << "\n\n";
  detail::write_evaporation(os, "evaporation", c.evaporation);
  os << "\n";
  detail::write_evaporation(os, "guess", c.guess);
  os << "from_final_frame = " << (c.guess_from_final_frame ? "true" : "false") << "\n\n";
  const auto& op = c.optimizer;
  os << "[optimizer]\nalgorithm = " << to_string(op.algorithm) << "\nx_tol = " << op.x_tol << "\nf_tol = " << op.f_tol
     << "\nmax_iterations = " << op.max_iterations << "\nmax_evaluations = " << op.max_evaluations
     << "\ninitial_step = " << op.initial_step << "\nmax_step = " << op.max_step << "\npenalty = " << op.penalty
     << "\nmax_restarts = " << op.max_restarts << "\n\n";
  const auto& ob = c.objective;
  os << "[rom]\nenabled = " << (ob.mode == ForwardMode::pod ? "true" : "false")
     << "\nsnapshot_window = " << ob.rom.snapshot_window << "\nsnapshot_count = " << ob.rom.snapshot_count
     << "\nenergy = " << ob.rom.energy << "\nmax_modes = " << ob.rom.max_modes
     << "\nrebuild_every = " << ob.rebuild_every << "\npolish = " << (c.full_order_polish ? "true" : "false")
     << "\n\n";
  os << "[norm]\nx_lo = " << ob.rect.x_lo << "\nx_hi = " << ob.rect.x_hi << "\ny_lo = " << ob.rect.y_lo
     << "\ny_hi = " << ob.rect.y_hi << "\nframe_stride = " << ob.frame_stride << "\n\n";
  os << "[fit]\nmode = " << to_string(c.fit_mode) << "\n";
  if (!c.fit_data.empty()) os << "data = " << c.fit_data << "\n";
  if (!c.fit_case.empty()) os << "case = " << c.fit_case << "\n";
  os << "axis = " << (c.streak_axis == StreakAxis::horizontal ? "horizontal" : "vertical") << "\n";
  if (!c.center_from_data) os << "center_x = " << c.center_x << "\ncenter_y = " << c.center_y << "\n";
  os << "\n";
  const auto& pp = c.preprocess;
  os << "[preprocess]\n";
  if (!c.frames_dir.empty()) os << "frames = " << c.frames_dir << "\n";
  if (!c.metadata.empty()) os << "metadata = " << c.metadata << "\n";
  os << "search_radius = " << pp.search_radius << "\nsigma = " << pp.sigma << "\nwindow_a = " << pp.window.a
     << "\nwindow_b = " << pp.window.b << "\nwindow_k = " << pp.window.k << "\nm = " << pp.m << "\nn = " << pp.n
     << "\n\n";
  os << "[synth]\nnoise_sigma = " << c.noise_sigma << "\nimage_scale = " << c.image_scale << "\n\n";
  os << "[run]\nseed = " << c.seed << "\n";
  return os.str();
}

}  // namespace tearfilm
