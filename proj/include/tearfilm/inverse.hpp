#pragma once

// Fitting evaporation parameters to intensity sequences: parameter codecs,
// the restricted least-squares misfit with penalties, relative-error traces
// and the 2D / radial / streak fit drivers.

#include "tearfilm/optimize.hpp"
#include "tearfilm/pod.hpp"
#include "tearfilm/preprocess.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace tearfilm {

// ---------------------------------------------------------------------------
// Parameter layouts

enum class ModelKind { ellipse, radial, streak };

struct ParameterLayout {
  ModelKind kind = ModelKind::ellipse;
  int peaks = 1;

  Index size() const { return kind == ModelKind::ellipse ? 7 * Index(peaks) + 1 : 4; }

  std::string tag() const {
    switch (kind) {
      case ModelKind::ellipse: return peaks == 1 ? "ellipse" : "ellipse-" + std::to_string(peaks);
      case ModelKind::radial: return "radial";
      case ModelKind::streak: return "streak";
    }
    return "unknown";
  }

  static ParameterLayout from_tag(const std::string& tag) {
    if (tag == "ellipse") return {ModelKind::ellipse, 1};
    if (tag == "radial") return {ModelKind::radial, 1};
    if (tag == "streak") return {ModelKind::streak, 1};
    if (tag.rfind("ellipse-", 0) == 0) {
      const int k = std::stoi(tag.substr(8));
      if (k >= 1) return {ModelKind::ellipse, k};
    }
    throw ConfigError("unknown parameter layout '" + tag + "'");
  }

  /// Names in vector order: v_b, a_k, (fx_k, fy_k), (x_k, y_k), e_k, beta_k.
  std::vector<std::string> names() const {
    if (kind == ModelKind::radial) return {"v_b", "r_w", "a", "beta"};
    if (kind == ModelKind::streak) return {"v_b", "x_w", "a", "beta"};
    std::vector<std::string> n{"v_b"};
    const auto k = [](const char* s, int i) { return std::string(s) + std::to_string(i + 1); };
    for (int i = 0; i < peaks; ++i) n.push_back(k("a", i));
    for (int i = 0; i < peaks; ++i) n.push_back(k("fx", i)), n.push_back(k("fy", i));
    for (int i = 0; i < peaks; ++i) n.push_back(k("x", i)), n.push_back(k("y", i));
    for (int i = 0; i < peaks; ++i) n.push_back(k("e", i));
    for (int i = 0; i < peaks; ++i) n.push_back(k("beta", i));
    return n;
  }
};

inline VectorXd encode(const EvaporationSpec& s) {
  const Index K = Index(s.peaks.size());
  if (K < 1) throw ParameterError("cannot encode a spec without peaks");
  VectorXd p(7 * K + 1);
  p[0] = s.v_b;
  for (Index k = 0; k < K; ++k) {
    if (!std::holds_alternative<EllipticPeak>(s.peaks[k]))
      throw ParameterError("only elliptic peaks have a parameter-vector encoding");
    const auto& q = std::get<EllipticPeak>(s.peaks[k]);
    p[1 + k] = q.a;
    p[1 + K + 2 * k] = q.fx;
    p[2 + K + 2 * k] = q.fy;
    p[1 + 3 * K + 2 * k] = q.x0;
    p[2 + 3 * K + 2 * k] = q.y0;
    p[1 + 5 * K + k] = q.e;
    p[1 + 6 * K + k] = q.beta;
  }
  return p;
}

inline EvaporationSpec decode_spec(const VectorXd& p, int peaks) {
  const Index K = peaks;
  if (K < 1 || p.size() != 7 * K + 1) throw ParameterError("parameter vector length does not match the layout");
  EvaporationSpec s;
  s.v_b = p[0];
  for (Index k = 0; k < K; ++k) {
    EllipticPeak q;
    q.a = p[1 + k];
    q.fx = p[1 + K + 2 * k];
    q.fy = p[2 + K + 2 * k];
    q.x0 = p[1 + 3 * K + 2 * k];
    q.y0 = p[2 + 3 * K + 2 * k];
    q.e = p[1 + 5 * K + k];
    q.beta = p[1 + 6 * K + k];
    s.peaks.push_back(q);
  }
  return s;
}

inline VectorXd encode(const RadialEvaporation& s) { return (VectorXd(4) << s.v_b, s.r_w, s.a, s.beta).finished(); }
inline VectorXd encode(const StreakEvaporation& s) { return (VectorXd(4) << s.v_b, s.x_w, s.a, s.beta).finished(); }

inline RadialEvaporation decode_radial(const VectorXd& p) {
  if (p.size() != 4) throw ParameterError("radial layout has four parameters");
  return {p[0], p[1], p[2], p[3]};
}

inline StreakEvaporation decode_streak(const VectorXd& p) {
  if (p.size() != 4) throw ParameterError("streak layout has four parameters");
  return {p[0], p[1], p[2], p[3]};
}

/// Elliptic peaks are admissible when e in (0, 0.999], |F| > 0, beta > 0 and
/// amplitudes are non-negative; J must also fit the periodic domain.
inline bool admissible(const EvaporationSpec& s, std::string* why = nullptr) {
  auto fail = [&](const char* m) {
    if (why) *why = m;
    return false;
  };
  if (!(s.v_b >= 0.0)) return fail("negative background");
  for (const auto& pk : s.peaks) {
    if (const auto* q = std::get_if<EllipticPeak>(&pk)) {
      if (!(q->e > 0.0 && q->e <= max_eccentricity)) return fail("eccentricity outside (0, 0.999]");
      if (!(std::hypot(q->fx, q->fy) > 1e-8)) return fail("degenerate focal vector");
      if (!(q->beta > 0.0)) return fail("non-positive beta");
      if (!(q->a >= 0.0)) return fail("negative peak amplitude");
      if (!std::isfinite(q->x0) || !std::isfinite(q->y0)) return fail("non-finite centre");
    }
  }
  if (!(periodicity_defect(s) <= periodicity_threshold)) return fail("evaporation not periodic on the domain");
  return true;
}

// ---------------------------------------------------------------------------
// Data, norms and relative errors

/// Intensity frames on the model grid at nondimensional times.
struct IntensityData {
  std::vector<double> times;
  std::vector<Array2> frames;

  void validate() const {
    if (frames.empty() || frames.size() != times.size()) throw ConfigError("intensity data needs one time per frame");
    detail::validate_times(times);
    for (const auto& f : frames)
      if (f.rows() != frames.front().rows() || f.cols() != frames.front().cols())
        throw ConfigError("all data frames must share a shape");
  }
  int ny() const { return int(frames.front().rows()); }
  int nx() const { return int(frames.front().cols()); }
};

/// Frame times in seconds become nondimensional times from the first frame.
inline IntensityData to_intensity_data(const ProcessedSequence& s, const NondimParams& nd) {
  IntensityData d;
  d.frames = s.frames;
  for (double t : s.times) d.times.push_back(nondim_time(t - s.times.front(), nd));
  return d;
}

struct NormRect {
  double x_lo = -2.6, x_hi = 2.6;
  double y_lo = -2.6, y_hi = 2.6;

  /// Grid points of an ny x nx periodic grid inside the rectangle.
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask(int ny, int nx) const {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(ny, nx);
    const auto ys = periodic_nodes(ny), xs = periodic_nodes(nx);
    for (int i = 0; i < ny; ++i)
      for (int j = 0; j < nx; ++j) m(i, j) = xs[j] >= x_lo && xs[j] <= x_hi && ys[i] >= y_lo && ys[i] <= y_hi;
    if (!m.any()) throw ConfigError("norm rectangle contains no grid points");
    return m;
  }
};

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double masked_sq_norm(const Array2& a, const Mask& m) { return m.select(a.square(), 0.0).sum(); }

/// ||I_th - I_ex|| / ||I_ex|| per frame over the mask; NaN where ||I_ex|| = 0.
inline std::vector<double> relative_error_trace(const std::vector<Array2>& th, const std::vector<Array2>& ex,
                                                const Mask& mask) {
  if (th.size() != ex.size()) throw ConfigError("model and data frame counts differ");
  std::vector<double> out;
  for (std::size_t k = 0; k < th.size(); ++k) {
    if (th[k].rows() != ex[k].rows() || th[k].cols() != ex[k].cols() || mask.rows() != ex[k].rows() ||
        mask.cols() != ex[k].cols())
      throw ConfigError("frame shapes do not match");
    const double den = masked_sq_norm(ex[k], mask);
    out.push_back(den > 0.0 ? std::sqrt(masked_sq_norm(th[k] - ex[k], mask) / den)
                            : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

inline std::vector<Array2> render_intensity(const SolveResult& r, double I0, double phi) {
  std::vector<Array2> out;
  for (const auto& s : r.states) out.push_back(intensity(s.h, s.f, I0, phi));
  return out;
}

// ---------------------------------------------------------------------------
// 2D objective

enum class ForwardMode { full, pod };

struct ObjectiveOptions {
  NormRect rect;
  double penalty = 1e8;
  ForwardMode mode = ForwardMode::pod;
  RomOptions rom;
  int rebuild_every = 10;  // optimizer iterations between basis rebuilds
  int frame_stride = 1;
  SolverOptions solver;

  void validate() const {
    if (!(penalty > 0.0)) throw ConfigError("penalty must be positive");
    if (rebuild_every < 1) throw ConfigError("rebuild_every must be positive");
    if (frame_stride < 1) throw ConfigError("frame_stride must be positive");
    rom.validate();
    solver.validate();
  }
};

/// Sum over frames and in-rectangle points of the squared intensity misfit.
/// Every failure (inadmissible J, solver breakdown, touchdown) returns the
/// penalty.
class Objective {
 public:
  Objective(IntensityData data, NondimParams nd, InitialConditions ic, int peaks, ObjectiveOptions opts)
      : nd_(nd), ic_(ic), peaks_(peaks), opts_(std::move(opts)) {
    data.validate();
    opts_.validate();
    for (std::size_t k = 0; k < data.frames.size(); k += opts_.frame_stride) {
      data_.times.push_back(data.times[k]);
      data_.frames.push_back(data.frames[k]);
    }
    if (data_.times.front() <= 0.0 && data_.times.size() == 1) throw ConfigError("need a frame after t = 0");
    opts_.solver.m = data_.nx();
    opts_.solver.n = data_.ny();
    mask_ = opts_.rect.mask(data_.ny(), data_.nx());
    I0_ = normalization_coefficient(ic_.f0, nd_.phi);
    const double points = double(mask_.count()) * double(data_.frames.size());
    if (!(opts_.penalty > points)) throw ConfigError("penalty must exceed the number of compared points");
  }

  double operator()(const VectorXd& p) {
    ++evaluations;
    const auto frames = model_frames(p);
    if (!frames) {
      ++penalties;
      return opts_.penalty;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < frames->size(); ++k) sum += masked_sq_norm((*frames)[k] - data_.frames[k], mask_);
    return std::isfinite(sum) ? std::min(sum, opts_.penalty) : opts_.penalty;
  }

  /// Model intensity frames at the data times, or nothing if p is penalized.
  std::optional<std::vector<Array2>> model_frames(const VectorXd& p) {
    EvaporationSpec spec;
    try {
      spec = decode_spec(p, peaks_);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (!p.allFinite() || !admissible(spec)) return std::nullopt;
    if (mode_ == ForwardMode::pod) {
      if (!basis_) rebuild_basis(p);
      if (basis_) {
        const auto r = solve_reduced(spec, nd_, ic_, data_.times, *basis_, opts_.solver);
        if (r.ok()) return render_intensity(r, I0_, nd_.phi);
        ++rom_fallbacks;
      }
    }
    const auto r = solve_2d(spec, nd_, ic_, data_.times, opts_.solver);
    if (!r.ok()) return std::nullopt;
    return render_intensity(r, I0_, nd_.phi);
  }

  /// Snapshot basis around p; returns false (and keeps the old basis) if p is
  /// inadmissible or the snapshot solve fails.
  bool rebuild_basis(const VectorXd& p) {
    EvaporationSpec spec;
    try {
      spec = decode_spec(p, peaks_);
    } catch (const Error&) {
      return false;
    }
    if (!admissible(spec)) return false;
    SolveStatus st;
    auto b = build_basis_for(spec, nd_, ic_, data_.times.back(), opts_.rom, opts_.solver, &st);
    if (st != SolveStatus::success) return false;
    basis_ = std::move(b);
    ++rebuilds;
    return true;
  }

  void set_mode(ForwardMode m) { mode_ = m; }
  ForwardMode mode() const { return mode_; }
  const IntensityData& data() const { return data_; }
  const Mask& mask() const { return mask_; }
  const ObjectiveOptions& options() const { return opts_; }
  double I0() const { return I0_; }

  long evaluations = 0;
  long penalties = 0;
  long rom_fallbacks = 0;
  int rebuilds = 0;

 private:
  IntensityData data_;
  NondimParams nd_;
  InitialConditions ic_;
  int peaks_;
  ObjectiveOptions opts_;
  ForwardMode mode_ = opts_.mode;
  Mask mask_;
  double I0_ = 1.0;
  std::optional<PodBasis> basis_;
};

// ---------------------------------------------------------------------------
// Fit results and drivers

struct FitResult {
  ParameterLayout layout;
  VectorXd p0, p;
  Algorithm algorithm = Algorithm::principal_axis;
  int iterations = 0;
  long evaluations = 0;
  double objective = 0.0;
  std::vector<double> history;
  std::vector<double> rel_err;  // per data frame, lifted to 2D for 1D models
  std::vector<double> times;
  std::string status;           // converged | max-iterations | max-evaluations
  double seconds = 0.0;
  int rom_rebuilds = 0;
  std::vector<Array2> model;    // model intensity frames at the data times (2D)

  bool converged() const { return status == "converged"; }
};

struct FitOptions {
  OptimizerOptions optimizer;
  ObjectiveOptions objective;
  /// After a reduced-model search, continue with the full model.
  bool full_order_polish = true;
};

namespace detail {

inline void append_history(FitResult& fr, const OptimizeResult& r) {
  fr.history.insert(fr.history.end(), r.history.begin(), r.history.end());
  fr.iterations += r.iterations;
  fr.evaluations += r.evaluations;
}

}  // namespace detail

/// Fit K elliptic peaks to 2D intensity data.
inline FitResult fit_2d(const IntensityData& data, const NondimParams& nd, const InitialConditions& ic,
                        const VectorXd& p0, int peaks, const FitOptions& fo) {
  const auto t0 = std::chrono::steady_clock::now();
  Objective obj(data, nd, ic, peaks, fo.objective);
  FitResult fr;
  fr.layout = {ModelKind::ellipse, peaks};
  if (p0.size() != fr.layout.size()) throw ConfigError("initial guess length does not match the layout");
  fr.p0 = p0;
  fr.algorithm = fo.optimizer.algorithm;
  ObjectiveFunction f = [&obj](const VectorXd& p) { return obj(p); };

  OptimizeResult r;
  if (obj.mode() == ForwardMode::pod) {
    const int every = fo.objective.rebuild_every;
    IterationHook hook = [&obj, every](int it, const VectorXd& best, double) {
      return it % every == 0 && obj.rebuild_basis(best);
    };
    r = minimize(f, p0, fo.optimizer, hook);
    detail::append_history(fr, r);
    if (fo.full_order_polish && fr.iterations < fo.optimizer.max_iterations) {
      obj.set_mode(ForwardMode::full);
      OptimizerOptions polish = fo.optimizer;
      polish.max_iterations = fo.optimizer.max_iterations - fr.iterations;
      const VectorXd start = r.x;
      r = minimize(f, start, polish);
      detail::append_history(fr, r);
    }
  } else {
    r = minimize(f, p0, fo.optimizer);
    detail::append_history(fr, r);
  }
  fr.p = r.x;
  fr.objective = r.f;
  fr.status = to_string(r.status);
  fr.rom_rebuilds = obj.rebuilds;
  fr.times = obj.data().times;

  obj.set_mode(ForwardMode::full);
  if (auto frames = obj.model_frames(fr.p)) {
    fr.rel_err = relative_error_trace(*frames, obj.data().frames, obj.mask());
    fr.model = std::move(*frames);
  }
  fr.seconds = detail::seconds_since(t0);
  return fr;
}

/// Several spots at once; Nelder-Mead unless the caller chose otherwise.
inline FitResult fit_multi_spot(const IntensityData& data, const NondimParams& nd, const InitialConditions& ic,
                                const VectorXd& p0, int peaks, FitOptions fo, bool keep_algorithm = false) {
  if (peaks < 2) throw ConfigError("multi-spot fits need at least two peaks");
  if (p0.size() != 7 * peaks + 1) throw ConfigError("multi-spot initial guess must have 7K+1 entries");
  if (!keep_algorithm) fo.optimizer.algorithm = Algorithm::nelder_mead;
  return fit_2d(data, nd, ic, p0, peaks, fo);
}

// ---------------------------------------------------------------------------
// Radial model fitted to radially averaged 2D data

/// Angular average of a periodic frame on circles r_j about (xc, yc).
inline VectorXd radial_average(const Array2& frame, double xc, double yc, const RadialGrid& g, int angles = 64) {
  VectorXd prof(g.cells());
  for (Index j = 0; j < g.cells(); ++j) {
    double acc = 0.0;
    for (int a = 0; a < angles; ++a) {
      const double th = 2.0 * pi * (a + 0.5) / angles;
      acc += periodic_sample(frame, xc + g.r(j) * std::cos(th), yc + g.r(j) * std::sin(th));
    }
    prof[j] = acc / angles;
  }
  return prof;
}

/// Rotate a radial profile about (xc, yc) onto an ny x nx grid; linear in r,
/// constant beyond the last cell centre.
inline Array2 lift_radial(const VectorXd& prof, double xc, double yc, const RadialGrid& g, int ny, int nx) {
  Array2 out(ny, nx);
  const auto ys = periodic_nodes(ny), xs = periodic_nodes(nx);
  const Index n = prof.size();
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < nx; ++j) {
      const double r = std::hypot(xs[j] - xc, ys[i] - yc);
      const double u = r / g.dr() - 0.5;
      if (u <= 0.0) out(i, j) = prof[0];
      else if (u >= double(n - 1)) out(i, j) = prof[n - 1];
      else {
        const Index k = Index(u);
        const double w = u - double(k);
        out(i, j) = (1.0 - w) * prof[k] + w * prof[k + 1];
      }
    }
  return out;
}

struct OneDimFitOptions {
  OptimizerOptions optimizer;
  SolverOptions solver;
  NormRect rect;
  double penalty = 1e8;
};

inline FitResult fit_radial_to_2d(const IntensityData& data, const NondimParams& nd, const InitialConditions& ic,
                                  const VectorXd& p0, double xc, double yc, const OneDimFitOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  data.validate();
  const RadialGrid g(o.solver.radial_cells, o.solver.radial_R0);
  const double r_norm = std::min({o.rect.x_hi - xc, xc - o.rect.x_lo, o.rect.y_hi - yc, yc - o.rect.y_lo});
  if (!(r_norm > 0.0)) throw ConfigError("spot centre lies outside the norm rectangle");
  std::vector<VectorXd> profiles;
  for (const auto& f : data.frames) profiles.push_back(radial_average(f, xc, yc, g));
  VectorXd w(g.cells());
  for (Index j = 0; j < g.cells(); ++j) w[j] = g.r(j) <= r_norm ? g.r(j) * g.dr() : 0.0;
  const double I0 = normalization_coefficient(ic.f0, nd.phi);

  auto model = [&](const VectorXd& p) -> std::optional<std::vector<VectorXd>> {
    if (!p.allFinite()) return std::nullopt;
    const auto s = decode_radial(p);
    if (!(s.v_b >= 0.0 && s.r_w > 0.0 && s.a >= 0.0 && s.beta > 0.0)) return std::nullopt;
    const auto r = solve_radial(s, nd, ic, data.times, o.solver);
    if (!r.ok()) return std::nullopt;
    std::vector<VectorXd> out;
    for (const auto& st : r.states) {
      const Array2 I = intensity(st.h, st.f, I0, nd.phi);
      out.push_back(Eigen::Map<const VectorXd>(I.data(), I.size()));
    }
    return out;
  };
  ObjectiveFunction f = [&](const VectorXd& p) {
    const auto m = model(p);
    if (!m) return o.penalty;
    double sum = 0.0;
    for (std::size_t k = 0; k < m->size(); ++k) sum += (w.array() * ((*m)[k] - profiles[k]).array().square()).sum();
    return std::isfinite(sum) ? std::min(sum, o.penalty) : o.penalty;
  };

  FitResult fr;
  fr.layout = {ModelKind::radial, 1};
  fr.p0 = p0;
  fr.algorithm = o.optimizer.algorithm;
  const auto r = minimize(f, p0, o.optimizer);
  detail::append_history(fr, r);
  fr.p = r.x;
  fr.objective = r.f;
  fr.status = to_string(r.status);
  fr.times = data.times;
  if (const auto m = model(fr.p)) {
    for (const auto& prof : *m) fr.model.push_back(lift_radial(prof, xc, yc, g, data.ny(), data.nx()));
    fr.rel_err = relative_error_trace(fr.model, data.frames, o.rect.mask(data.ny(), data.nx()));
  }
  fr.seconds = detail::seconds_since(t0);
  return fr;
}

// ---------------------------------------------------------------------------
// Streak model fitted to a line through the intensity minimum

enum class StreakAxis { horizontal, vertical };

/// Line of `frame` through its minimum, rolled so that the minimum column (or
/// row) lands on x = 0; `roll` receives the applied shift.
inline VectorXd extract_line(const Array2& frame, StreakAxis axis, Index line, Index roll) {
  const Array2 F = axis == StreakAxis::horizontal ? Array2(frame) : Array2(frame.transpose());
  const Index n = F.cols();
  VectorXd v(n);
  for (Index j = 0; j < n; ++j) v[j] = F(line, ((j - roll) % n + n) % n);
  return v;
}

inline FitResult fit_streak_to_2d(const IntensityData& data, const NondimParams& nd, const InitialConditions& ic,
                                  const VectorXd& p0, StreakAxis axis, const OneDimFitOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  data.validate();
  const Array2& last = data.frames.back();
  Index mi = 0, mj = 0;
  last.minCoeff(&mi, &mj);
  const Index line0 = axis == StreakAxis::horizontal ? mi : mj;
  const Index along = axis == StreakAxis::horizontal ? mj : mi;
  const Index n = axis == StreakAxis::horizontal ? data.nx() : data.ny();
  const Index roll = n / 2 - 1 - along;  // node n/2 - 1 sits at x = 0

  // Track the minimum line over time; frames without structure keep the final line.
  std::vector<VectorXd> lines;
  for (const auto& fr : data.frames) {
    Index i = 0, j = 0;
    fr.minCoeff(&i, &j);
    Index line = axis == StreakAxis::horizontal ? i : j;
    if (fr.maxCoeff() - fr.minCoeff() < 1e-12) line = line0;
    lines.push_back(extract_line(fr, axis, line, roll));
  }
  const auto xs = periodic_nodes(int(n));
  const double lo = axis == StreakAxis::horizontal ? o.rect.x_lo : o.rect.y_lo;
  const double hi = axis == StreakAxis::horizontal ? o.rect.x_hi : o.rect.y_hi;
  const double shift = double(roll) * 2.0 * pi / double(n);
  VectorXd w(n);
  for (Index j = 0; j < n; ++j) {
    const double x_data = xs[j] - shift;  // original coordinate of rolled sample j
    const double xw = x_data - 2.0 * pi * std::floor((x_data + pi) / (2.0 * pi));
    w[j] = (xw >= lo && xw <= hi) ? 1.0 : 0.0;
  }
  const double I0 = normalization_coefficient(ic.f0, nd.phi);
  SolverOptions so = o.solver;
  so.m = int(n);

  auto model = [&](const VectorXd& p) -> std::optional<std::vector<VectorXd>> {
    if (!p.allFinite()) return std::nullopt;
    const auto s = decode_streak(p);
    if (!(s.v_b >= 0.0 && s.x_w > 0.0 && s.a >= 0.0 && s.beta > 0.0)) return std::nullopt;
    if (!(periodicity_defect(s) <= periodicity_threshold)) return std::nullopt;
    const auto r = solve_streak(s, nd, ic, data.times, so);
    if (!r.ok()) return std::nullopt;
    std::vector<VectorXd> out;
    for (const auto& st : r.states) {
      const Array2 I = intensity(st.h, st.f, I0, nd.phi);
      out.push_back(Eigen::Map<const VectorXd>(I.data(), I.size()));
    }
    return out;
  };
  ObjectiveFunction f = [&](const VectorXd& p) {
    const auto m = model(p);
    if (!m) return o.penalty;
    double sum = 0.0;
    for (std::size_t k = 0; k < m->size(); ++k) sum += (w.array() * ((*m)[k] - lines[k]).array().square()).sum();
    return std::isfinite(sum) ? std::min(sum, o.penalty) : o.penalty;
  };

  FitResult fr;
  fr.layout = {ModelKind::streak, 1};
  fr.p0 = p0;
  fr.algorithm = o.optimizer.algorithm;
  const auto r = minimize(f, p0, o.optimizer);
  detail::append_history(fr, r);
  fr.p = r.x;
  fr.objective = r.f;
  fr.status = to_string(r.status);
  fr.times = data.times;
  if (const auto m = model(fr.p)) {
    for (const auto& prof : *m) {
      Array2 F(data.ny(), data.nx());
      for (Index j = 0; j < n; ++j) {
        const double v = prof[((j + roll) % n + n) % n];
        if (axis == StreakAxis::horizontal) F.col(j).setConstant(v);
        else F.row(j).setConstant(v);
      }
      fr.model.push_back(std::move(F));
    }
    fr.rel_err = relative_error_trace(fr.model, data.frames, o.rect.mask(data.ny(), data.nx()));
  }
  fr.seconds = detail::seconds_since(t0);
  return fr;
}

}  // namespace tearfilm
