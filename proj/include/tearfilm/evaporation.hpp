#pragma once

// Evaporation-rate distributions J: background plus Gaussian peaks
// (axis-aligned or elliptical), and the 1D radial / streak profiles.

#include "tearfilm/core.hpp"
#include "tearfilm/model.hpp"

#include <algorithm>
#include <variant>
#include <vector>

namespace tearfilm {

struct CircularPeak {
  double x0 = 0.0, y0 = 0.0;
  double xw = 1.0, yw = 1.0;
  double a = 1.0;
};

/// Elliptical peak described by its focal vector F (centre to focus) and
/// eccentricity e. beta scales the background under this peak.
struct EllipticPeak {
  double x0 = 0.0, y0 = 0.0;
  double fx = 0.5, fy = 0.5;
  double e = 0.5;
  double a = 1.0;
  double beta = 1.0;
};

using Peak = std::variant<CircularPeak, EllipticPeak>;

struct EvaporationSpec {
  double v_b = 0.07;
  std::vector<Peak> peaks;
};

struct RadialEvaporation {
  double v_b = 0.07;
  double r_w = 1.0;
  double a = 1.0;
  double beta = 1.0;
};

struct StreakEvaporation {
  double v_b = 0.07;
  double x_w = 1.0;
  double a = 1.0;
  double beta = 1.0;
};

struct EllipseGeometry {
  double focal = 0.0;  // |F|
  double a = 0.0;      // semi-major axis
  double b = 0.0;      // semi-minor axis
  double theta = 0.0;  // major-axis angle
};

inline constexpr double max_eccentricity = 0.999;

inline EllipseGeometry ellipse_geometry(double fx, double fy, double e) {
  if (!(e > 0.0) || !(e < 1.0)) throw GeometryError("eccentricity must lie in (0, 1)");
  if (e > max_eccentricity) throw GeometryError("eccentricity too close to 1 (degenerate ellipse)");
  const double focal = std::hypot(fx, fy);
  if (!(focal > 0.0) || !std::isfinite(focal)) throw GeometryError("focal vector must be nonzero");
  EllipseGeometry g;
  g.focal = focal;
  g.a = focal / e;
  g.b = std::sqrt(g.a * g.a - focal * focal);
  g.theta = std::atan2(fy, fx);
  return g;
}

namespace detail {

/// Precomputed Gaussian factor exp(-Q/2) for one peak, plus its amplitude
/// above the scaled background.
struct PeakKernel {
  double x0, y0;
  double A11, A12, A22;  // symmetric quadratic form
  double beta;
  double a;

  double gauss(double x, double y) const {
    const double dx = x - x0, dy = y - y0;
    const double q = A11 * dx * dx + 2.0 * A12 * dx * dy + A22 * dy * dy;
    return std::exp(-0.5 * q);
  }
};

inline PeakKernel make_kernel(const CircularPeak& p) {
  if (!(p.xw > 0.0) || !(p.yw > 0.0)) throw GeometryError("peak widths must be positive");
  return {p.x0, p.y0, 1.0 / (p.xw * p.xw), 0.0, 1.0 / (p.yw * p.yw), 1.0, p.a};
}

inline PeakKernel make_kernel(const EllipticPeak& p) {
  const auto g = ellipse_geometry(p.fx, p.fy, p.e);
  if (!(p.beta > 0.0)) throw GeometryError("background multiplier beta must be positive");
  // A = R diag(1/a^2, 1/b^2) R^T
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  const double ia = 1.0 / (g.a * g.a), ib = 1.0 / (g.b * g.b);
  return {p.x0, p.y0, c * c * ia + s * s * ib, c * s * (ia - ib), s * s * ia + c * c * ib, p.beta, p.a};
}

inline PeakKernel make_kernel(const Peak& p) {
  return std::visit([](const auto& q) { return make_kernel(q); }, p);
}

}  // namespace detail

/// Compiled form of an EvaporationSpec; evaluation is allocation-free.
class EvaporationField {
 public:
  explicit EvaporationField(const EvaporationSpec& spec) : v_b_(spec.v_b) {
    if (spec.peaks.empty()) throw ParameterError("evaporation spec needs at least one peak");
    if (!(spec.v_b >= 0.0)) throw ParameterError("background v_b must be non-negative");
    double beta_sum = 0.0;
    for (const auto& p : spec.peaks) {
      kernels_.push_back(detail::make_kernel(p));
      beta_sum += kernels_.back().beta;
    }
    background_ = v_b_ * (beta_sum / double(kernels_.size()));
  }

  double background() const { return background_; }

  double operator()(double x, double y) const {
    double sum = 0.0;
    for (const auto& k : kernels_) sum += (k.a - k.beta * v_b_) * k.gauss(x, y);
    return background_ + sum;
  }

  /// Largest |a_k - beta_k v_b|.
  double max_amplitude() const {
    double m = 0.0;
    for (const auto& k : kernels_) m = std::max(m, std::abs(k.a - k.beta * v_b_));
    return m;
  }

  Array2 sample(const Grid2D& g) const {
    Array2 J(g.n, g.m);
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.m; ++j) J(i, j) = (*this)(g.x(j), g.y(i));
    return J;
  }

 private:
  double v_b_;
  double background_ = 0.0;
  std::vector<detail::PeakKernel> kernels_;
};

/// Single elliptical peak: beta v_b + (a_1 - beta v_b) exp(-Q/2).
inline double eval_elliptic_J(const EvaporationSpec& spec, double x, double y) {
  if (spec.peaks.size() != 1 || !std::holds_alternative<EllipticPeak>(spec.peaks.front()))
    throw ParameterError("eval_elliptic_J needs exactly one elliptic peak");
  const auto& p = std::get<EllipticPeak>(spec.peaks.front());
  const auto k = detail::make_kernel(p);
  return p.beta * spec.v_b + (p.a - p.beta * spec.v_b) * k.gauss(x, y);
}

inline double eval_multi_J(const EvaporationSpec& spec, double x, double y) {
  return EvaporationField(spec)(x, y);
}

inline double eval_radial_J(const RadialEvaporation& s, double r) {
  const double z = r / s.r_w;
  return s.beta * s.v_b + (s.a - s.v_b) * std::exp(-0.5 * z * z);
}

inline double eval_streak_J(const StreakEvaporation& s, double x) {
  const double z = x / s.x_w;
  return s.beta * s.v_b + (s.a - s.beta * s.v_b) * std::exp(-0.5 * z * z);
}

/// Relative departure of J from its background level on the edges of
/// [-pi, pi]^2. Large values mean J is not representable on the periodic
/// domain.
inline double periodicity_defect(const EvaporationSpec& spec, int samples_per_edge = 257) {
  const EvaporationField J(spec);
  const double amp = J.max_amplitude();
  if (amp == 0.0) return 0.0;
  double worst = 0.0;
  for (int s = 0; s < samples_per_edge; ++s) {
    const double u = -pi + 2.0 * pi * s / (samples_per_edge - 1);
    for (double edge : {-pi, pi}) {
      worst = std::max(worst, std::abs(J(edge, u) - J.background()));
      worst = std::max(worst, std::abs(J(u, edge) - J.background()));
    }
  }
  return worst / amp;
}

inline double periodicity_defect(const StreakEvaporation& s) {
  const double amp = std::abs(s.a - s.beta * s.v_b);
  if (amp == 0.0) return 0.0;
  return std::abs(eval_streak_J(s, pi) - s.beta * s.v_b) / amp;
}

inline constexpr double periodicity_threshold = 1e-3;

}  // namespace tearfilm
