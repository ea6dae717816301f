#pragma once

// Fourier collocation operators on uniform periodic grids over (-pi, pi].
// Each instance owns its FFTW plans and scratch buffers, so an instance is
// not shareable between threads; separate instances are independent.

#include "tearfilm/core.hpp"

#include <fftw3.h>

#include <complex>
#include <memory>
#include <mutex>
#include <vector>

namespace tearfilm {

using cplx = std::complex<double>;

namespace detail {

/// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

/// Signed integer wavenumber for FFT index i of an n-point transform.
inline int wavenumber(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace detail

/// Real-to-complex transform pair for an ny x nx row-major field (ny = 1 for
/// 1D). Coefficient layout is ny x (nx/2 + 1).
class RealFourier {
 public:
  RealFourier(int ny, int nx)
      : ny_(ny), nx_(nx), nxc_(nx / 2 + 1),
        real_(detail::fftw_alloc<double>(std::size_t(ny) * nx)),
        spec_(detail::fftw_alloc<fftw_complex>(std::size_t(ny) * (nx / 2 + 1))) {
    std::lock_guard lock(detail::fftw_planner_mutex());
    auto* cbuf = spec_.get();
    if (ny == 1) {
      fwd_.reset(fftw_plan_dft_r2c_1d(nx, real_.get(), cbuf, FFTW_ESTIMATE));
      inv_.reset(fftw_plan_dft_c2r_1d(nx, cbuf, real_.get(), FFTW_ESTIMATE));
    } else {
      fwd_.reset(fftw_plan_dft_r2c_2d(ny, nx, real_.get(), cbuf, FFTW_ESTIMATE));
      inv_.reset(fftw_plan_dft_c2r_2d(ny, nx, cbuf, real_.get(), FFTW_ESTIMATE));
    }
  }

  int ny() const { return ny_; }
  int nx() const { return nx_; }
  Index real_size() const { return Index(ny_) * nx_; }
  Index spectral_size() const { return Index(ny_) * nxc_; }
  int nx_complex() const { return nxc_; }

  void forward(const double* in, cplx* out) {
    std::copy(in, in + real_size(), real_.get());
    fftw_execute(fwd_.get());
    const auto* s = reinterpret_cast<const cplx*>(spec_.get());
    std::copy(s, s + spectral_size(), out);
  }

  /// Inverse including the 1/(nx ny) normalization.
  void inverse(const cplx* in, double* out) {
    std::copy(in, in + spectral_size(), reinterpret_cast<cplx*>(spec_.get()));
    fftw_execute(inv_.get());
    const double scale = 1.0 / double(real_size());
    const double* r = real_.get();
    for (Index i = 0; i < real_size(); ++i) out[i] = r[i] * scale;
  }

 private:
  int ny_, nx_, nxc_;
  detail::FftwBuffer<double> real_;
  detail::FftwBuffer<fftw_complex> spec_;
  detail::PlanPtr fwd_, inv_;
};

/// Differentiation on the periodic (-pi, pi]^2 grid. First derivatives drop
/// the Nyquist mode; second derivatives keep it.
class SpectralOperators2D {
 public:
  SpectralOperators2D(int ny, int nx) : fft_(ny, nx) {
    const Index ns = fft_.spectral_size();
    ikx_.resize(ns);
    iky_.resize(ns);
    k2_.resize(ns);
    for (int i = 0; i < ny; ++i) {
      const int ky = detail::wavenumber(i, ny);
      for (int j = 0; j < fft_.nx_complex(); ++j) {
        const int kx = j;
        const Index idx = Index(i) * fft_.nx_complex() + j;
        ikx_[idx] = cplx(0.0, (2 * kx == nx) ? 0.0 : double(kx));
        iky_[idx] = cplx(0.0, (2 * i == ny) ? 0.0 : double(ky));
        k2_[idx] = double(kx) * kx + double(ky) * ky;
      }
    }
    a_.resize(ns);
    b_.resize(ns);
    c_.resize(ns);
  }

  int ny() const { return fft_.ny(); }
  int nx() const { return fft_.nx(); }
  Index size() const { return fft_.real_size(); }
  Index spectral_size() const { return fft_.spectral_size(); }
  RealFourier& fft() { return fft_; }

  /// |k|^2 for each spectral coefficient.
  const std::vector<double>& k2() const { return k2_; }

  void dx(const double* u, double* out) { apply_one(u, out, ikx_); }
  void dy(const double* u, double* out) { apply_one(u, out, iky_); }

  void gradient(const double* u, double* ux, double* uy) {
    fft_.forward(u, a_.data());
    for (Index k = 0; k < spectral_size(); ++k) {
      b_[k] = ikx_[k] * a_[k];
      c_[k] = iky_[k] * a_[k];
    }
    fft_.inverse(b_.data(), ux);
    fft_.inverse(c_.data(), uy);
  }

  void laplacian(const double* u, double* out) {
    fft_.forward(u, a_.data());
    for (Index k = 0; k < spectral_size(); ++k) a_[k] *= -k2_[k];
    fft_.inverse(a_.data(), out);
  }

  /// grad(lap u), and optionally lap u itself.
  void gradient_of_laplacian(const double* u, double* gx, double* gy, double* lap = nullptr) {
    fft_.forward(u, a_.data());
    for (Index k = 0; k < spectral_size(); ++k) {
      const cplx l = -k2_[k] * a_[k];
      b_[k] = ikx_[k] * l;
      c_[k] = iky_[k] * l;
      if (lap) a_[k] = l;
    }
    fft_.inverse(b_.data(), gx);
    fft_.inverse(c_.data(), gy);
    if (lap) fft_.inverse(a_.data(), lap);
  }

  /// d/dx Fx + d/dy Fy
  void divergence(const double* Fx, const double* Fy, double* out) {
    fft_.forward(Fx, a_.data());
    fft_.forward(Fy, b_.data());
    for (Index k = 0; k < spectral_size(); ++k) a_[k] = ikx_[k] * a_[k] + iky_[k] * b_[k];
    fft_.inverse(a_.data(), out);
  }

  /// Solve (alpha + beta |k|^2 + gamma |k|^4) u = r for each Fourier mode.
  void solve_symbol(const double* r, double* u, double alpha, double beta, double gamma) {
    fft_.forward(r, a_.data());
    for (Index k = 0; k < spectral_size(); ++k) {
      const double kk = k2_[k];
      a_[k] /= alpha + beta * kk + gamma * kk * kk;
    }
    fft_.inverse(a_.data(), u);
  }

 private:
  void apply_one(const double* u, double* out, const std::vector<cplx>& sym) {
    fft_.forward(u, a_.data());
    for (Index k = 0; k < spectral_size(); ++k) a_[k] *= sym[k];
    fft_.inverse(a_.data(), out);
  }

  RealFourier fft_;
  std::vector<cplx> ikx_, iky_;
  std::vector<double> k2_;
  std::vector<cplx> a_, b_, c_;
};

/// 1D periodic differentiation on (-pi, pi].
class SpectralOperators1D {
 public:
  explicit SpectralOperators1D(int n) : fft_(1, n) {
    const Index ns = fft_.spectral_size();
    ik_.resize(ns);
    k2_.resize(ns);
    for (Index j = 0; j < ns; ++j) {
      ik_[j] = cplx(0.0, (2 * j == n) ? 0.0 : double(j));
      k2_[j] = double(j) * double(j);
    }
    a_.resize(ns);
  }

  Index size() const { return fft_.real_size(); }

  void dx(const double* u, double* out) {
    fft_.forward(u, a_.data());
    for (Index k = 0; k < fft_.spectral_size(); ++k) a_[k] *= ik_[k];
    fft_.inverse(a_.data(), out);
  }

  void dxx(const double* u, double* out) {
    fft_.forward(u, a_.data());
    for (Index k = 0; k < fft_.spectral_size(); ++k) a_[k] *= -k2_[k];
    fft_.inverse(a_.data(), out);
  }

  /// d^3/dx^3 u and optionally d^2/dx^2 u.
  void dxxx(const double* u, double* out, double* second = nullptr) {
    fft_.forward(u, a_.data());
    std::vector<cplx>& b = scratch_;
    b.resize(a_.size());
    for (Index k = 0; k < fft_.spectral_size(); ++k) {
      const cplx l = -k2_[k] * a_[k];
      b[k] = ik_[k] * l;
      a_[k] = l;
    }
    fft_.inverse(b.data(), out);
    if (second) fft_.inverse(a_.data(), second);
  }

  void solve_symbol(const double* r, double* u, double alpha, double beta, double gamma) {
    fft_.forward(r, a_.data());
    for (Index k = 0; k < fft_.spectral_size(); ++k) {
      const double kk = k2_[k];
      a_[k] /= alpha + beta * kk + gamma * kk * kk;
    }
    fft_.inverse(a_.data(), u);
  }

 private:
  RealFourier fft_;
  std::vector<cplx> ik_;
  std::vector<double> k2_;
  std::vector<cplx> a_, scratch_;
};

}  // namespace tearfilm
