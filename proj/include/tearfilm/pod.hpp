#pragma once

// Proper orthogonal decomposition reduced-order model for the 2D film.
//
// Each field (h, and the solute contents h c and h f) gets its own basis:
// an affine offset (the temporal mean of the snapshots), the normalized
// uniform vector, and the leading left singular vectors of the
// mean-centred snapshots with their uniform component removed. The
// uniform direction is always present, so the spatially averaged dynamics
// (water balance, solute totals) are represented exactly even with zero
// fluctuation modes.

#include "tearfilm/forward.hpp"

#include <Eigen/SVD>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace tearfilm {

struct RomOptions {
  double snapshot_window = 0.1;  // fraction of the horizon sampled
  int snapshot_count = 40;
  double energy = 1.0 - 1e-10;
  int max_modes = 60;

  void validate() const {
    if (!(snapshot_window > 0.0 && snapshot_window <= 1.0)) throw ConfigError("snapshot window must lie in (0, 1]");
    if (!(energy > 0.9 && energy < 1.0)) throw ConfigError("energy threshold must lie in (0.9, 1)");
    if (snapshot_count < 2) throw ConfigError("at least two snapshots are required");
    if (max_modes < 0) throw ConfigError("max_modes must be non-negative");
  }
};

struct FieldBasis {
  VectorXd mean;             // affine offset
  MatrixXd modes;            // N x r fluctuation modes, orthonormal, orthogonal to the uniform vector
  VectorXd singular_values;  // all fluctuation singular values, non-increasing
  double retained_energy = 1.0;

  Index points() const { return mean.size(); }
  int fluctuation_modes() const { return int(modes.cols()); }

  /// [uniform, modes], the Galerkin trial space.
  MatrixXd trial() const {
    MatrixXd B(points(), 1 + modes.cols());
    B.col(0).setConstant(1.0 / std::sqrt(double(points())));
    B.rightCols(modes.cols()) = modes;
    return B;
  }
};

struct PodBasis {
  int ny = 0, nx = 0;
  FieldBasis h, c, f;  // bases for h, h c and h f
  int snapshot_count = 0;
  double energy_threshold = 0.0;
  std::vector<std::string> warnings;
};

/// Basis for one field from its snapshot columns.
inline FieldBasis build_field_basis(const MatrixXd& snapshots, double energy, int max_modes,
                                    std::vector<std::string>* warnings = nullptr, const char* name = "") {
  const Index N = snapshots.rows();
  FieldBasis b;
  b.mean = snapshots.rowwise().mean();
  MatrixXd X = snapshots.colwise() - b.mean;
  const VectorXd e = VectorXd::Constant(N, 1.0 / std::sqrt(double(N)));
  X -= e * (e.transpose() * X);

  Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU);
  b.singular_values = svd.singularValues();
  const VectorXd& s = b.singular_values;
  const double total = s.squaredNorm();
  const double scale = snapshots.norm();
  if (s.size() == 0 || total <= std::pow(1e-14 * std::max(scale, 1e-300), 2)) {
    b.modes.resize(N, 0);
    b.retained_energy = 1.0;
    return b;
  }
  Index rank = 0;
  while (rank < s.size() && s[rank] > 1e-12 * s[0]) ++rank;
  if (warnings && rank < X.cols() - 1)
    warnings->push_back(std::string(name) + ": snapshot set is rank deficient (numerical rank " +
                        std::to_string(rank) + "), basis truncated");
  Index r = 0;
  double acc = 0.0;
  while (r < rank && acc < energy * total) acc += s[r] * s[r], ++r;
  if (r > max_modes) {
    if (warnings)
      warnings->push_back(std::string(name) + ": energy threshold needs " + std::to_string(r) +
                          " modes, capped at " + std::to_string(max_modes));
    r = max_modes;
  }
  b.modes = svd.matrixU().leftCols(r);
  b.retained_energy = s.head(r).squaredNorm() / total;
  return b;
}

inline PodBasis build_basis(const std::vector<FieldState>& snapshots, const RomOptions& opts) {
  opts.validate();
  if (snapshots.size() < 2) throw ConfigError("at least two snapshots are required to build a POD basis");
  const Index ny = snapshots.front().h.rows(), nx = snapshots.front().h.cols();
  const Index N = ny * nx;
  MatrixXd H(N, snapshots.size()), Q(N, snapshots.size()), G(N, snapshots.size());
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    const auto& s = snapshots[k];
    if (s.h.rows() != ny || s.h.cols() != nx) throw ConfigError("snapshots must share the grid shape");
    Array2 q = s.h * s.c, g = s.h * s.f;
    H.col(k) = Eigen::Map<const VectorXd>(s.h.data(), N);
    Q.col(k) = Eigen::Map<const VectorXd>(q.data(), N);
    G.col(k) = Eigen::Map<const VectorXd>(g.data(), N);
  }
  PodBasis b;
  b.ny = int(ny);
  b.nx = int(nx);
  b.snapshot_count = int(snapshots.size());
  b.energy_threshold = opts.energy;
  b.h = build_field_basis(H, opts.energy, opts.max_modes, &b.warnings, "h");
  b.c = build_field_basis(Q, opts.energy, opts.max_modes, &b.warnings, "c");
  b.f = build_field_basis(G, opts.energy, opts.max_modes, &b.warnings, "f");
  return b;
}

/// Galerkin projection of a full-order system onto per-block trial spaces.
/// The right-hand side is evaluated by lifting to the grid, applying the
/// collocation operators and projecting back.
template <class Full>
class GalerkinSystem {
 public:
  GalerkinSystem(Full& full, std::vector<const FieldBasis*> blocks) : full_(full) {
    Index off = 0, roff = 0;
    for (const auto* b : blocks) {
      trial_.push_back(b->trial());
      mean_.push_back(b->mean);
      offset_.push_back(off);
      roff_.push_back(roff);
      off += b->points();
      roff += trial_.back().cols();
    }
    full_size_ = off;
    size_ = roff;
    y_.resize(full_size_);
    f_.resize(full_size_);
  }

  Index size() const { return size_; }

  void lift(const VectorXd& a, VectorXd& y) const {
    y.resize(full_size_);
    for (std::size_t b = 0; b < trial_.size(); ++b)
      y.segment(offset_[b], mean_[b].size()) = mean_[b] + trial_[b] * a.segment(roff_[b], trial_[b].cols());
  }

  VectorXd project(const VectorXd& y) const {
    VectorXd a(size_);
    for (std::size_t b = 0; b < trial_.size(); ++b)
      a.segment(roff_[b], trial_[b].cols()) =
          trial_[b].transpose() * (y.segment(offset_[b], mean_[b].size()) - mean_[b]);
    return a;
  }

  bool admissible(const VectorXd& a) const {
    lift(a, y_);
    return y_.head(mean_[0].size()).minCoeff() > 0.0;
  }

  void rhs(double t, const VectorXd& a, VectorXd& out) {
    lift(a, y_);
    full_.rhs(t, y_, f_);
    out.resize(size_);
    for (std::size_t b = 0; b < trial_.size(); ++b)
      out.segment(roff_[b], trial_[b].cols()) = trial_[b].transpose() * f_.segment(offset_[b], mean_[b].size());
  }

 private:
  Full& full_;
  std::vector<MatrixXd> trial_;
  std::vector<VectorXd> mean_;
  std::vector<Index> offset_, roff_;
  Index full_size_ = 0, size_ = 0;
  mutable VectorXd y_;
  VectorXd f_;
};

/// Reduced-order solve of the 2D model with a prebuilt basis.
inline SolveResult solve_reduced(const EvaporationSpec& spec, const NondimParams& nd, const InitialConditions& ic,
                                 std::span<const double> times, const PodBasis& basis,
                                 const SolverOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  opts.validate();
  ic.validate();
  detail::validate_times(times);
  if (basis.nx != opts.m || basis.ny != opts.n) throw ConfigError("POD basis grid does not match the solver grid");
  const Grid2D grid(opts.m, opts.n);
  const Index N = grid.size();
  const auto co = FilmCoefficients::from(nd);
  const Array2 Jfield = EvaporationField(spec).sample(grid);
  const VectorXd J = Eigen::Map<const VectorXd>(Jfield.data(), N);

  SolveResult res;
  res.times.assign(times.begin(), times.end());

  FilmStage1_2D full1(grid.n, grid.m, J, co);
  GalerkinSystem rom1(full1, {&basis.h, &basis.c});
  DenseNewtonSolver lin1(rom1);
  const VectorXd a0 = rom1.project(VectorXd::Ones(2 * N));
  HermiteTrack track;
  auto guard = [&rom1, N, floor = opts.touchdown_h](const VectorXd& a, std::string& why) {
    VectorXd y;
    rom1.lift(a, y);
    if (y.head(N).minCoeff() < floor) {
      why = "film touchdown (h below " + std::to_string(floor) + ")";
      return true;
    }
    return false;
  };
  auto run1 = detail::run_stage(rom1, lin1, opts.bdf(), a0, times, &track, guard);
  res.stats.steps_stage1 = run1.steps;
  res.stats.rhs_evals = run1.rhs_evals;
  if (run1.status != SolveStatus::success) {
    res.status = run1.status;
    res.message = "reduced stage 1: " + run1.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }

  VectorXd a_tmp;
  auto history = [&](double t, VectorXd& y) {
    track.eval(t, a_tmp);
    rom1.lift(a_tmp, y);
  };
  FilmStage2_2D full2(grid.n, grid.m, history, co);
  GalerkinSystem rom2(full2, {&basis.f});
  DenseNewtonSolver lin2(rom2);
  const VectorXd b0 = rom2.project(VectorXd::Constant(N, ic.f0));
  auto run2 = detail::run_stage(rom2, lin2, opts.bdf(), b0, times, nullptr, detail::no_guard());
  res.stats.steps_stage2 = run2.steps;
  res.stats.rhs_evals += run2.rhs_evals;
  if (run2.status != SolveStatus::success) {
    res.status = run2.status;
    res.message = "reduced stage 2: " + run2.message;
    res.stats.seconds = detail::seconds_since(t0);
    return res;
  }

  VectorXd y, g, p, u, v;
  for (std::size_t k = 0; k < times.size(); ++k) {
    rom1.lift(run1.outputs[k], y);
    rom2.lift(run2.outputs[k], g);
    FieldState s;
    s.t = times[k];
    s.h = as_field(y.data(), grid.n, grid.m);
    s.c = as_field(y.data() + N, grid.n, grid.m) / s.h;
    s.f = as_field(g.data(), grid.n, grid.m) / s.h;
    full1.diagnostics(y.head(N), p, u, v);
    s.p = as_field(p.data(), grid.n, grid.m);
    s.u_bar = as_field(u.data(), grid.n, grid.m);
    s.v_bar = as_field(v.data(), grid.n, grid.m);
    res.states.push_back(std::move(s));
  }
  res.stats.seconds = detail::seconds_since(t0);
  return res;
}

/// Snapshot solve over the first window of the horizon, then SVD.
inline PodBasis build_basis_for(const EvaporationSpec& spec, const NondimParams& nd, const InitialConditions& ic,
                                double t_end, const RomOptions& rom, const SolverOptions& opts,
                                SolveStatus* status = nullptr) {
  rom.validate();
  const auto snap_times = uniform_times(rom.snapshot_window * t_end, rom.snapshot_count);
  const auto snaps = solve_2d(spec, nd, ic, std::span<const double>(snap_times), opts);
  if (status) *status = snaps.status;
  if (!snaps.ok()) return {};
  return build_basis(snaps.states, rom);
}

struct RomTiming {
  bool reduced = true;
  double full_seconds = 0.0;
  double snapshot_seconds = 0.0;
  double reduced_seconds = 0.0;
  double speedup = 1.0;  // full / reduced solve wall time
  int modes_h = 0, modes_c = 0, modes_f = 0;
};

inline RomTiming rom_speedup_report(const EvaporationSpec& spec, const NondimParams& nd, const InitialConditions& ic,
                                    double t_end, const RomOptions& rom = {}, const SolverOptions& opts = {},
                                    bool use_reduced = true, int outputs = 11) {
  RomTiming r;
  r.reduced = use_reduced;
  const auto times = uniform_times(t_end, outputs);
  const auto full = solve_2d(spec, nd, ic, std::span<const double>(times), opts);
  r.full_seconds = full.stats.seconds;
  if (!use_reduced) return r;
  const auto t0 = std::chrono::steady_clock::now();
  const auto basis = build_basis_for(spec, nd, ic, t_end, rom, opts);
  r.snapshot_seconds = detail::seconds_since(t0);
  r.modes_h = basis.h.fluctuation_modes();
  r.modes_c = basis.c.fluctuation_modes();
  r.modes_f = basis.f.fluctuation_modes();
  const auto red = solve_reduced(spec, nd, ic, std::span<const double>(times), basis, opts);
  r.reduced_seconds = red.stats.seconds;
  r.speedup = r.reduced_seconds > 0.0 ? r.full_seconds / r.reduced_seconds : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Binary persistence: "TFPOD" magic, format version, grid shape, field order,
// then per field the mode count, mean, singular values and modes.

inline constexpr std::uint32_t pod_format_version = 1;

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated POD basis file");
  return v;
}

}  // namespace detail

inline void save_basis(const PodBasis& b, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write POD basis file " + path);
  os.write("TFPOD", 5);
  detail::write_pod(os, pod_format_version);
  detail::write_pod(os, std::int32_t(b.ny));
  detail::write_pod(os, std::int32_t(b.nx));
  os.write("hcf", 3);
  detail::write_pod(os, std::int32_t(b.snapshot_count));
  detail::write_pod(os, b.energy_threshold);
  for (const FieldBasis* f : {&b.h, &b.c, &b.f}) {
    detail::write_pod(os, std::int32_t(f->modes.cols()));
    detail::write_pod(os, std::int32_t(f->singular_values.size()));
    detail::write_pod(os, f->retained_energy);
    os.write(reinterpret_cast<const char*>(f->mean.data()), sizeof(double) * f->mean.size());
    os.write(reinterpret_cast<const char*>(f->singular_values.data()), sizeof(double) * f->singular_values.size());
    os.write(reinterpret_cast<const char*>(f->modes.data()), sizeof(double) * f->modes.size());
  }
  if (!os) throw IoError("failed writing POD basis file " + path);
}

inline PodBasis load_basis(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open POD basis file " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::string(magic, 5) != "TFPOD") throw IoError("not a POD basis file: " + path);
  const auto version = detail::read_pod<std::uint32_t>(is);
  if (version != pod_format_version) throw IoError("unsupported POD basis version " + std::to_string(version));
  PodBasis b;
  b.ny = detail::read_pod<std::int32_t>(is);
  b.nx = detail::read_pod<std::int32_t>(is);
  char order[3];
  is.read(order, 3);
  if (!is || std::string(order, 3) != "hcf") throw IoError("unexpected field order in POD basis file");
  b.snapshot_count = detail::read_pod<std::int32_t>(is);
  b.energy_threshold = detail::read_pod<double>(is);
  const Index N = Index(b.ny) * b.nx;
  if (b.ny <= 0 || b.nx <= 0) throw IoError("invalid grid shape in POD basis file");
  for (FieldBasis* f : {&b.h, &b.c, &b.f}) {
    const auto r = detail::read_pod<std::int32_t>(is);
    const auto ns = detail::read_pod<std::int32_t>(is);
    if (r < 0 || ns < 0 || r > N) throw IoError("invalid mode count in POD basis file");
    f->retained_energy = detail::read_pod<double>(is);
    f->mean.resize(N);
    f->singular_values.resize(ns);
    f->modes.resize(N, r);
    is.read(reinterpret_cast<char*>(f->mean.data()), sizeof(double) * N);
    is.read(reinterpret_cast<char*>(f->singular_values.data()), sizeof(double) * ns);
    is.read(reinterpret_cast<char*>(f->modes.data()), sizeof(double) * N * r);
    if (!is) throw IoError("truncated POD basis file");
  }
  return b;
}

}  // namespace tearfilm
