#pragma once

// Semi-discrete thin-film systems. Stage 1 evolves the film thickness h and
// the solute content q = h c; stage 2 evolves the fluorescein content
// g = h f given the stage-1 history. Writing the solute equations for the
// contents h c and h f puts them in divergence form, so their integrals are
// conserved by the discretization itself.

#include "tearfilm/bdf.hpp"
#include "tearfilm/evaporation.hpp"
#include "tearfilm/model.hpp"
#include "tearfilm/spectral.hpp"

#include <algorithm>
#include <functional>
#include <vector>

namespace tearfilm {

/// Piecewise cubic Hermite history of a trajectory, built from the states
/// and derivatives at accepted integrator steps.
class HermiteTrack {
 public:
  void clear() {
    t_.clear();
    y_.clear();
    f_.clear();
  }
  void push(double t, const VectorXd& y, const VectorXd& f) {
    t_.push_back(t);
    y_.push_back(y);
    f_.push_back(f);
  }
  bool empty() const { return t_.empty(); }
  std::size_t knots() const { return t_.size(); }
  double t_begin() const { return t_.front(); }
  double t_end() const { return t_.back(); }

  void eval(double t, VectorXd& out) const {
    if (t_.size() == 1 || t <= t_.front()) {
      out = y_.front();
      return;
    }
    if (t >= t_.back()) {
      out = y_.back();
      return;
    }
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t k = std::size_t(it - t_.begin()) - 1;
    const double h = t_[k + 1] - t_[k];
    const double s = (t - t_[k]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    out = h00 * y_[k] + (h10 * h) * f_[k] + h01 * y_[k + 1] + (h11 * h) * f_[k + 1];
  }

 private:
  std::vector<double> t_;
  std::vector<VectorXd> y_, f_;
};

struct FilmCoefficients {
  double Pc = 0.0;
  double Pe_c = 1.0;
  double Pe_f = 1.0;

  static FilmCoefficients from(const NondimParams& nd) { return {nd.Pc, nd.Pe_c, nd.Pe_f}; }
};

// ---------------------------------------------------------------------------
// 2D periodic, Fourier collocation

/// Stage 1 on the 2D grid: y = [h; q].
class FilmStage1_2D {
 public:
  FilmStage1_2D(int ny, int nx, VectorXd J, FilmCoefficients co)
      : ops_(ny, nx), J_(std::move(J)), co_(co), N_(Index(ny) * nx) {
    for (auto* v : {&c_, &gx_, &gy_, &Fx_, &Fy_, &cx_, &cy_, &div_}) v->resize(N_);
  }

  Index size() const { return 2 * N_; }
  Index points() const { return N_; }
  SpectralOperators2D& ops() { return ops_; }

  bool admissible(const VectorXd& y) const { return y.head(N_).minCoeff() > 0.0; }

  void rhs(double, const VectorXd& y, VectorXd& out) {
    out.resize(2 * N_);
    const auto h = y.head(N_).array();
    const auto q = y.tail(N_).array();
    c_.array() = q / h;

    // h u = (h^3/12) grad(lap h)
    ops_.gradient_of_laplacian(y.data(), gx_.data(), gy_.data());
    const auto mob = h.cube() / 12.0;
    Fx_.array() = mob * gx_.array();
    Fy_.array() = mob * gy_.array();
    ops_.divergence(Fx_.data(), Fy_.data(), div_.data());
    out.head(N_).array() = -div_.array() - J_.array() + co_.Pc * (c_.array() - 1.0);

    // q flux: c h u - Pe_c^{-1} h grad c
    ops_.gradient(c_.data(), cx_.data(), cy_.data());
    const double kc = 1.0 / co_.Pe_c;
    Fx_.array() = c_.array() * Fx_.array() - kc * h * cx_.array();
    Fy_.array() = c_.array() * Fy_.array() - kc * h * cy_.array();
    ops_.divergence(Fx_.data(), Fy_.data(), div_.data());
    out.tail(N_) = -div_;
  }

  /// Pressure and depth-averaged velocities for output.
  void diagnostics(const VectorXd& h, VectorXd& p, VectorXd& u, VectorXd& v) {
    p.resize(N_);
    u.resize(N_);
    v.resize(N_);
    ops_.gradient_of_laplacian(h.data(), gx_.data(), gy_.data(), p.data());
    p = -p;
    u.array() = h.array().square() / 12.0 * gx_.array();
    v.array() = h.array().square() / 12.0 * gy_.array();
  }

 private:
  SpectralOperators2D ops_;
  VectorXd J_;
  FilmCoefficients co_;
  Index N_;
  VectorXd c_, gx_, gy_, Fx_, Fy_, cx_, cy_, div_;
};

/// Constant-coefficient Fourier approximation of I - c J for stage 1:
/// h is damped by the mean mobility times |k|^4, q by diffusion, with the
/// h -> q coupling kept.
class FilmStage1Preconditioner2D {
 public:
  FilmStage1Preconditioner2D(int ny, int nx, FilmCoefficients co)
      : fft_(ny, nx), co_(co), N_(Index(ny) * nx) {
    k2_.resize(fft_.spectral_size());
    for (int i = 0; i < ny; ++i) {
      const double ky = detail::wavenumber(i, ny);
      for (int j = 0; j < fft_.nx_complex(); ++j) k2_[Index(i) * fft_.nx_complex() + j] = ky * ky + double(j) * j;
    }
    rh_.resize(fft_.spectral_size());
    rq_.resize(fft_.spectral_size());
  }

  void setup(double, const VectorXd& y, double c) {
    const auto h = y.head(N_).array();
    mob_ = (h.cube() / 12.0).mean();
    cbar_ = (y.tail(N_).array() / h).mean();
    gamma_ = c;
  }

  void apply(const VectorXd& r, VectorXd& z) {
    z.resize(2 * N_);
    fft_.forward(r.data(), rh_.data());
    fft_.forward(r.data() + N_, rq_.data());
    const double kc = 1.0 / co_.Pe_c;
    for (std::size_t k = 0; k < k2_.size(); ++k) {
      const double kk = k2_[k], k4 = kk * kk;
      rh_[k] /= 1.0 + gamma_ * mob_ * k4;
      rq_[k] = (rq_[k] - gamma_ * cbar_ * (mob_ * k4 - kc * kk) * rh_[k]) / (1.0 + gamma_ * kc * kk);
    }
    fft_.inverse(rh_.data(), z.data());
    fft_.inverse(rq_.data(), z.data() + N_);
  }

 private:
  RealFourier fft_;
  FilmCoefficients co_;
  Index N_;
  std::vector<double> k2_;
  std::vector<cplx> rh_, rq_;
  double mob_ = 1.0 / 12.0, cbar_ = 1.0, gamma_ = 0.0;
};

/// Stage 2 on the 2D grid: y = g = h f, driven by a stage-1 history.
class FilmStage2_2D {
 public:
  using History = std::function<void(double, VectorXd&)>;

  FilmStage2_2D(int ny, int nx, History stage1, FilmCoefficients co)
      : ops_(ny, nx), stage1_(std::move(stage1)), co_(co), N_(Index(ny) * nx) {
    for (auto* v : {&h_, &hux_, &huy_, &f_, &fx_, &fy_, &Fx_, &Fy_, &div_}) v->resize(N_);
  }

  Index size() const { return N_; }

  void rhs(double t, const VectorXd& g, VectorXd& out) {
    refresh(t);
    out.resize(N_);
    f_.array() = g.array() / h_.array();
    ops_.gradient(f_.data(), fx_.data(), fy_.data());
    const double kf = 1.0 / co_.Pe_f;
    Fx_.array() = hux_.array() * f_.array() - kf * h_.array() * fx_.array();
    Fy_.array() = huy_.array() * f_.array() - kf * h_.array() * fy_.array();
    ops_.divergence(Fx_.data(), Fy_.data(), div_.data());
    out = -div_;
  }

  const VectorXd& thickness(double t) {
    refresh(t);
    return h_;
  }

 private:
  void refresh(double t) {
    if (have_ && t == t_cached_) return;
    stage1_(t, y1_);
    h_ = y1_.head(N_);
    ops_.gradient_of_laplacian(h_.data(), hux_.data(), huy_.data());
    const auto mob = h_.array().cube() / 12.0;
    hux_.array() *= mob;
    huy_.array() *= mob;
    t_cached_ = t;
    have_ = true;
  }

  SpectralOperators2D ops_;
  History stage1_;
  FilmCoefficients co_;
  Index N_;
  VectorXd y1_, h_, hux_, huy_, f_, fx_, fy_, Fx_, Fy_, div_;
  double t_cached_ = 0.0;
  bool have_ = false;
};

class FilmStage2Preconditioner2D {
 public:
  FilmStage2Preconditioner2D(int ny, int nx, FilmCoefficients co) : ops_(ny, nx), co_(co) {}

  void setup(double, const VectorXd&, double c) { gamma_ = c; }

  void apply(const VectorXd& r, VectorXd& z) {
    z.resize(r.size());
    ops_.solve_symbol(r.data(), z.data(), 1.0, gamma_ / co_.Pe_f, 0.0);
  }

 private:
  SpectralOperators2D ops_;
  FilmCoefficients co_;
  double gamma_ = 0.0;
};

// ---------------------------------------------------------------------------
// 1D periodic streak, Fourier collocation

class StreakStage1 {
 public:
  StreakStage1(int n, VectorXd J, FilmCoefficients co) : ops_(n), J_(std::move(J)), co_(co), N_(n) {
    for (auto* v : {&c_, &g_, &F_, &cx_, &div_}) v->resize(N_);
  }

  Index size() const { return 2 * N_; }
  bool admissible(const VectorXd& y) const { return y.head(N_).minCoeff() > 0.0; }

  void rhs(double, const VectorXd& y, VectorXd& out) {
    out.resize(2 * N_);
    const auto h = y.head(N_).array();
    c_.array() = y.tail(N_).array() / h;
    ops_.dxxx(y.data(), g_.data());
    F_.array() = h.cube() / 12.0 * g_.array();
    ops_.dx(F_.data(), div_.data());
    out.head(N_).array() = -div_.array() - J_.array() + co_.Pc * (c_.array() - 1.0);
    ops_.dx(c_.data(), cx_.data());
    F_.array() = c_.array() * F_.array() - (1.0 / co_.Pe_c) * h * cx_.array();
    ops_.dx(F_.data(), div_.data());
    out.tail(N_) = -div_;
  }

  void diagnostics(const VectorXd& h, VectorXd& p, VectorXd& u) {
    p.resize(N_);
    u.resize(N_);
    ops_.dxxx(h.data(), g_.data(), p.data());
    p = -p;
    u.array() = h.array().square() / 12.0 * g_.array();
  }

 private:
  SpectralOperators1D ops_;
  VectorXd J_;
  FilmCoefficients co_;
  Index N_;
  VectorXd c_, g_, F_, cx_, div_;
};

class StreakStage2 {
 public:
  using History = std::function<void(double, VectorXd&)>;

  StreakStage2(int n, History stage1, FilmCoefficients co) : ops_(n), stage1_(std::move(stage1)), co_(co), N_(n) {
    for (auto* v : {&h_, &hu_, &f_, &fx_, &F_, &div_}) v->resize(N_);
  }

  Index size() const { return N_; }

  void rhs(double t, const VectorXd& g, VectorXd& out) {
    refresh(t);
    out.resize(N_);
    f_.array() = g.array() / h_.array();
    ops_.dx(f_.data(), fx_.data());
    F_.array() = hu_.array() * f_.array() - (1.0 / co_.Pe_f) * h_.array() * fx_.array();
    ops_.dx(F_.data(), div_.data());
    out = -div_;
  }

 private:
  void refresh(double t) {
    if (have_ && t == t_cached_) return;
    stage1_(t, y1_);
    h_ = y1_.head(N_);
    ops_.dxxx(h_.data(), hu_.data());
    hu_.array() *= h_.array().cube() / 12.0;
    t_cached_ = t;
    have_ = true;
  }

  SpectralOperators1D ops_;
  History stage1_;
  FilmCoefficients co_;
  Index N_;
  VectorXd y1_, h_, hu_, f_, fx_, F_, div_;
  double t_cached_ = 0.0;
  bool have_ = false;
};

// ---------------------------------------------------------------------------
// Axisymmetric, finite volumes on the half-offset grid r_j = (j + 1/2) dr over
// (0, R0), no flux through r = R0.

class RadialGrid {
 public:
  RadialGrid(int cells, double R0) : N_(cells), R0_(R0), dr_(R0 / cells) {
    if (cells < 4) throw ConfigError("radial grid needs at least 4 cells");
    if (!(R0 > 0.0)) throw ConfigError("radial domain radius must be positive");
  }
  int cells() const { return N_; }
  double R0() const { return R0_; }
  double dr() const { return dr_; }
  double r(int j) const { return (j + 0.5) * dr_; }
  double face(int j) const { return j * dr_; }  // r_{j-1/2}
  /// Annulus area / (2 pi) of cell j.
  double weight(int j) const { return r(j) * dr_; }

 private:
  int N_;
  double R0_, dr_;
};

namespace detail {

/// Pressure p = -(1/r) d/dr (r dh/dr) at cell centres with zero-slope
/// closure at both ends.
inline void radial_pressure(const RadialGrid& g, const double* h, double* p) {
  const int N = g.cells();
  const double dr2 = g.dr() * g.dr();
  for (int j = 0; j < N; ++j) {
    const double right = j + 1 < N ? g.face(j + 1) * (h[j + 1] - h[j]) : 0.0;
    const double left = j > 0 ? g.face(j) * (h[j] - h[j - 1]) : 0.0;
    p[j] = -(right - left) / (g.r(j) * dr2);
  }
}

/// Face flux h u at r_{j+1/2}, j = 0..N-2; the wall flux is zero.
inline void radial_film_flux(const RadialGrid& g, const double* h, const double* p, double* F) {
  const int N = g.cells();
  for (int j = 0; j + 1 < N; ++j) {
    const double hf = 0.5 * (h[j] + h[j + 1]);
    F[j] = -(hf * hf * hf / 12.0) * (p[j + 1] - p[j]) / g.dr();
  }
}

/// -(1/r) d/dr (r F) for face fluxes F[j] at r_{j+1/2}.
inline void radial_divergence(const RadialGrid& g, const double* F, double* out) {
  const int N = g.cells();
  for (int j = 0; j < N; ++j) {
    const double right = j + 1 < N ? g.face(j + 1) * F[j] : 0.0;
    const double left = j > 0 ? g.face(j) * F[j - 1] : 0.0;
    out[j] = -(right - left) / g.weight(j);
  }
}

}  // namespace detail

class RadialStage1 {
 public:
  RadialStage1(RadialGrid grid, VectorXd J, FilmCoefficients co)
      : g_(grid), J_(std::move(J)), co_(co), N_(grid.cells()) {
    p_.resize(N_);
    F_.resize(N_);
    Fq_.resize(N_);
    div_.resize(N_);
  }

  Index size() const { return 2 * N_; }
  const RadialGrid& grid() const { return g_; }
  bool admissible(const VectorXd& y) const { return y.head(N_).minCoeff() > 0.0; }

  void rhs(double, const VectorXd& y, VectorXd& out) {
    out.resize(2 * N_);
    const double* h = y.data();
    const double* q = y.data() + N_;
    detail::radial_pressure(g_, h, p_.data());
    detail::radial_film_flux(g_, h, p_.data(), F_.data());
    detail::radial_divergence(g_, F_.data(), div_.data());
    for (Index j = 0; j < N_; ++j) out[j] = div_[j] - J_[j] + co_.Pc * (q[j] / h[j] - 1.0);
    const double kc = 1.0 / co_.Pe_c;
    for (Index j = 0; j + 1 < N_; ++j) {
      const double cl = q[j] / h[j], cr = q[j + 1] / h[j + 1];
      const double hf = 0.5 * (h[j] + h[j + 1]);
      Fq_[j] = F_[j] * 0.5 * (cl + cr) - kc * hf * (cr - cl) / g_.dr();
    }
    detail::radial_divergence(g_, Fq_.data(), out.data() + N_);
  }

  void diagnostics(const VectorXd& h, VectorXd& p, VectorXd& u) {
    p.resize(N_);
    u.resize(N_);
    detail::radial_pressure(g_, h.data(), p.data());
    for (Index j = 0; j < N_; ++j) {
      // centred pressure gradient with zero slope at both ends
      const double pl = j > 0 ? p[j - 1] : p[j];
      const double pr = j + 1 < N_ ? p[j + 1] : p[j];
      const double dpdr = (pr - pl) / ((j > 0 ? 1.0 : 0.5) * g_.dr() + (j + 1 < N_ ? 1.0 : 0.5) * g_.dr());
      u[j] = -(h[j] * h[j] / 12.0) * dpdr;
    }
  }

 private:
  RadialGrid g_;
  VectorXd J_;
  FilmCoefficients co_;
  Index N_;
  VectorXd p_, F_, Fq_, div_;
};

class RadialStage2 {
 public:
  using History = std::function<void(double, VectorXd&)>;

  RadialStage2(RadialGrid grid, History stage1, FilmCoefficients co)
      : g_(grid), stage1_(std::move(stage1)), co_(co), N_(grid.cells()) {
    p_.resize(N_);
    F_.resize(N_);
    Fg_.resize(N_);
  }

  Index size() const { return N_; }

  void rhs(double t, const VectorXd& gvec, VectorXd& out) {
    refresh(t);
    out.resize(N_);
    const double kf = 1.0 / co_.Pe_f;
    const double* h = y1_.data();
    for (Index j = 0; j + 1 < N_; ++j) {
      const double fl = gvec[j] / h[j], fr = gvec[j + 1] / h[j + 1];
      const double hf = 0.5 * (h[j] + h[j + 1]);
      Fg_[j] = F_[j] * 0.5 * (fl + fr) - kf * hf * (fr - fl) / g_.dr();
    }
    detail::radial_divergence(g_, Fg_.data(), out.data());
  }

 private:
  void refresh(double t) {
    if (have_ && t == t_cached_) return;
    stage1_(t, y1_);
    detail::radial_pressure(g_, y1_.data(), p_.data());
    detail::radial_film_flux(g_, y1_.data(), p_.data(), F_.data());
    t_cached_ = t;
    have_ = true;
  }

  RadialGrid g_;
  History stage1_;
  FilmCoefficients co_;
  Index N_;
  VectorXd y1_, p_, F_, Fg_;
  double t_cached_ = 0.0;
  bool have_ = false;
};

}  // namespace tearfilm
