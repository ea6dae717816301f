#pragma once

// Physical constants, nondimensional groups, the periodic grid, field
// containers and the fluorescence intensity law.

#include "tearfilm/core.hpp"

#include <vector>

namespace tearfilm {

/// Molar mass of sodium fluorescein, g/mol.
inline constexpr double fluorescein_molar_mass = 376.27;

/// Dimensional parameters (SI units). Defaults are the literature values used
/// throughout the model; v_min is not a tabulated value and defaults to
/// 0.07 v_max.
struct PhysicalParams {
  double mu = 1.3e-3;                  // Pa s
  double sigma0 = 0.045;               // N/m
  double rho = 1.0e3;                  // kg/m^3
  double d = 4.5e-6;                   // m
  double v_max = 10.0e-6 / 60.0;       // m/s
  double v_min = 0.07 * 10.0e-6 / 60.0;  // m/s
  double V_w = 1.8e-5;                 // m^3/mol
  double D_f = 0.39e-9;                // m^2/s
  double D_o = 1.6e-9;                 // m^2/s
  double c0 = 300.0;                   // mol/m^3
  double P0 = 12.1e-6;                 // m/s
  double eps_f = 1.75e7;               // L/(m mol), i.e. 1/(M m)
  double f_cr = 0.002;                 // mass fraction

  void validate() const {
    const double all[] = {mu, sigma0, rho, d, v_max, v_min, V_w, D_f, D_o, c0, P0, eps_f, f_cr};
    for (double v : all)
      if (!(v > 0.0) || !std::isfinite(v))
        throw ParameterError("physical parameters must be finite and strictly positive");
    if (!(v_min < v_max)) throw ParameterError("v_min must be smaller than v_max");
  }
};

struct NondimParams {
  double eps = 0.0;      // d / ell
  double ell = 0.0;      // transverse length scale, m
  double Pc = 0.0;       // osmotic permeability group
  double Pe_c = 0.0;     // osmolarity Peclet number
  double Pe_f = 0.0;     // fluorescein Peclet number
  double phi = 0.0;      // nondimensional extinction coefficient
  double t_scale = 0.0;  // s per unit nondimensional time
  double v_b = 0.0;      // v_min / v_max
};

/// Critical fluorescein concentration converted from mass fraction to mol/L.
inline double critical_molarity(const PhysicalParams& p) {
  // rho [kg/m^3] equals grams per litre of solution.
  return p.f_cr * p.rho / fluorescein_molar_mass;
}

inline NondimParams derive_nondim(const PhysicalParams& p) {
  p.validate();
  NondimParams nd;
  nd.ell = std::pow(p.sigma0 / p.mu / p.v_max, 0.25) * p.d;
  nd.eps = p.d / nd.ell;
  nd.Pc = p.P0 * p.V_w * p.c0 / p.v_max;
  nd.Pe_f = p.v_max * nd.ell / (nd.eps * p.D_f);
  nd.Pe_c = p.v_max * nd.ell / (nd.eps * p.D_o);
  nd.phi = p.eps_f * critical_molarity(p) * p.d;
  nd.t_scale = p.d / p.v_max;
  nd.v_b = p.v_min / p.v_max;
  return nd;
}

inline double nondim_time(double seconds, const NondimParams& nd) {
  if (seconds < 0.0) throw ParameterError("elapsed time must be non-negative");
  return seconds / nd.t_scale;
}

/// I = I0 (1 - exp(-phi f h)) / (1 + f^2)
inline double intensity(double h, double f, double I0, double phi) {
  return I0 * (1.0 - std::exp(-phi * f * h)) / (1.0 + f * f);
}

inline Array2 intensity(const Array2& h, const Array2& f, double I0, double phi) {
  return I0 * (1.0 - (-phi * f * h).exp()) / (1.0 + f.square());
}

/// I0 such that the uniform initial state (h = 1, f = f0) has unit intensity.
inline double normalization_coefficient(double f0, double phi) {
  if (!(f0 > 0.0)) throw ParameterError("degenerate normalization: f0 must be positive");
  if (!(phi > 1e-12)) throw ParameterError("degenerate normalization: phi must exceed 1e-12");
  return (1.0 + f0 * f0) / (1.0 - std::exp(-phi * f0));
}

/// Uniform periodic grid on (-pi, pi]^2 with m points in x and n in y.
struct Grid2D {
  int m = 40;
  int n = 40;

  Grid2D() = default;
  Grid2D(int m_, int n_) : m(m_), n(n_) { validate(); }

  void validate() const {
    if (m < 2 || n < 2 || m % 2 != 0 || n % 2 != 0)
      throw ConfigError("grid point counts must be even and at least 2");
  }
  Index size() const { return Index(m) * n; }
  double dx() const { return 2.0 * pi / m; }
  double dy() const { return 2.0 * pi / n; }
  double x(int j) const { return -pi + (j + 1) * dx(); }
  double y(int i) const { return -pi + (i + 1) * dy(); }
  double cell_area() const { return dx() * dy(); }

  std::vector<double> xs() const {
    std::vector<double> v(m);
    for (int j = 0; j < m; ++j) v[j] = x(j);
    return v;
  }
  std::vector<double> ys() const {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = y(i);
    return v;
  }
};

/// Uniform 1D periodic grid on (-pi, pi].
inline std::vector<double> periodic_nodes(int m) {
  std::vector<double> v(m);
  for (int j = 0; j < m; ++j) v[j] = -pi + (j + 1) * 2.0 * pi / m;
  return v;
}

struct InitialConditions {
  double f0 = 1.0;

  void validate() const {
    if (!(f0 > 0.0)) throw ParameterError("initial fluorescein concentration must be positive");
  }
};

/// Fields at one instant. 2D states use ny x nx arrays; 1D models use a
/// single row.
struct FieldState {
  double t = 0.0;
  Array2 h, c, f;
  Array2 p, u_bar, v_bar;
};

inline FieldState uniform_state(Index ny, Index nx, const InitialConditions& ic) {
  FieldState s;
  s.h = Array2::Ones(ny, nx);
  s.c = Array2::Ones(ny, nx);
  s.f = Array2::Constant(ny, nx, ic.f0);
  s.p = Array2::Zero(ny, nx);
  s.u_bar = Array2::Zero(ny, nx);
  s.v_bar = Array2::Zero(ny, nx);
  return s;
}

}  // namespace tearfilm
