#pragma once

// Linear solvers for the Newton systems (I - c J) x = r arising in implicit
// multistep integration. Two flavours: a dense finite-difference Jacobian
// with LU, and a matrix-free GMRES with a user preconditioner.

#include "tearfilm/core.hpp"

#include <Eigen/LU>

#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

namespace tearfilm {

template <class S>
concept OdeSystem = requires(S& s, const S& cs, double t, const VectorXd& y, VectorXd& out) {
  { cs.size() } -> std::convertible_to<Index>;
  s.rhs(t, y, out);
};

template <class S>
concept HasAnalyticJacobian = requires(S& s, double t, const VectorXd& y, MatrixXd& J) {
  s.jacobian(t, y, J);
};

/// Weighted RMS norm used for error and convergence control.
inline double scaled_rms(const VectorXd& v, const VectorXd& scale) {
  if (v.size() == 0) return 0.0;
  return std::sqrt((v.array() / scale.array()).square().mean());
}

template <OdeSystem System>
class DenseNewtonSolver {
 public:
  explicit DenseNewtonSolver(System& sys) : sys_(sys) {}

  void update_jacobian(double t, const VectorXd& y, const VectorXd& fy) {
    const Index n = y.size();
    J_.resize(n, n);
    if constexpr (HasAnalyticJacobian<System>) {
      sys_.jacobian(t, y, J_);
    } else {
      VectorXd yp = y, fp(n);
      const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
      for (Index j = 0; j < n; ++j) {
        const double delta = root_eps * std::max(std::abs(y[j]), 1e-3);
        yp[j] = y[j] + delta;
        sys_.rhs(t, yp, fp);
        J_.col(j) = (fp - fy) / delta;
        yp[j] = y[j];
      }
      rhs_evals += n;
    }
    ++jacobian_evals;
  }

  void set_coefficient(double c) {
    const Index n = J_.rows();
    lu_.compute(MatrixXd::Identity(n, n) - c * J_);
    ++factorizations;
  }

  bool solve(const VectorXd& r, const VectorXd& /*scale*/, double /*tol*/, VectorXd& x) {
    x = lu_.solve(r);
    return x.allFinite();
  }

  long rhs_evals = 0;
  long jacobian_evals = 0;
  long factorizations = 0;

 private:
  System& sys_;
  MatrixXd J_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

/// Preconditioner for I - c J: setup at the Jacobian point, then apply an
/// approximate inverse.
template <class P>
concept NewtonPreconditioner = requires(P& p, double t, const VectorXd& y, double c, const VectorXd& r,
                                        VectorXd& z) {
  p.setup(t, y, c);
  p.apply(r, z);
};

struct IdentityPreconditioner {
  void setup(double, const VectorXd&, double) {}
  void apply(const VectorXd& r, VectorXd& z) { z = r; }
};

/// Right-preconditioned restarted GMRES on the scaled system, with the
/// Jacobian applied by finite differences at a frozen linearization point.
template <OdeSystem System, NewtonPreconditioner Precond>
class KrylovNewtonSolver {
 public:
  KrylovNewtonSolver(System& sys, Precond& pre, int restart = 40, int max_iters = 200)
      : sys_(sys), pre_(pre), restart_(restart), max_iters_(max_iters) {}

  void update_jacobian(double t, const VectorXd& y, const VectorXd& fy) {
    tJ_ = t;
    yJ_ = y;
    fJ_ = fy;
    ++jacobian_evals;
  }

  void set_coefficient(double c) {
    c_ = c;
    pre_.setup(tJ_, yJ_, c);
    ++factorizations;
  }

  /// Solve (I - cJ) x = r until the scaled RMS residual is below tol.
  bool solve(const VectorXd& r, const VectorXd& scale, double tol, VectorXd& x) {
    const Index n = r.size();
    const double sqrt_n = std::sqrt(double(n));
    // Work with z = x / scale so the 2-norm matches the integrator norm.
    const VectorXd w = scale.cwiseInverse();
    VectorXd b = r.cwiseProduct(w);
    const double target = tol * sqrt_n;
    VectorXd z = VectorXd::Zero(n);
    const double bnorm = b.norm();
    if (bnorm <= target) {
      x.setZero(n);
      return true;
    }

    const int m = restart_;
    MatrixXd V(n, m + 1);
    MatrixXd Zp(n, m);
    MatrixXd H = MatrixXd::Zero(m + 1, m);
    VectorXd cs(m), sn(m), g(m + 1);
    VectorXd tmp(n), av(n), u(n);

    int total = 0;
    VectorXd resid = b;
    double beta = bnorm;
    while (total < max_iters_) {
      V.col(0) = resid / beta;
      g.setZero();
      g[0] = beta;
      H.setZero();
      int k = 0;
      for (; k < m && total < max_iters_; ++k, ++total) {
        // Zp_k = M^{-1} v_k in scaled coordinates
        tmp = V.col(k).cwiseProduct(scale);
        pre_.apply(tmp, u);
        Zp.col(k) = u.cwiseProduct(w);
        apply_operator(u, av);
        VectorXd vk = av.cwiseProduct(w);
        for (int i = 0; i <= k; ++i) {
          H(i, k) = V.col(i).dot(vk);
          vk -= H(i, k) * V.col(i);
        }
        H(k + 1, k) = vk.norm();
        if (H(k + 1, k) > 0.0) V.col(k + 1) = vk / H(k + 1, k);
        for (int i = 0; i < k; ++i) {
          const double t0 = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
          H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
          H(i, k) = t0;
        }
        const double den = std::hypot(H(k, k), H(k + 1, k));
        cs[k] = den > 0.0 ? H(k, k) / den : 1.0;
        sn[k] = den > 0.0 ? H(k + 1, k) / den : 0.0;
        H(k, k) = den;
        H(k + 1, k) = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] = cs[k] * g[k];
        ++krylov_iters;
        if (std::abs(g[k + 1]) <= target || H(k, k) == 0.0) {
          ++k;
          break;
        }
      }
      // back substitution
      VectorXd yk = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
      z += Zp.leftCols(k) * yk;
      // true residual
      tmp = z.cwiseProduct(scale);
      apply_operator(tmp, av);
      resid = b - av.cwiseProduct(w);
      beta = resid.norm();
      if (!std::isfinite(beta)) return false;
      if (beta <= target) break;
    }
    x = z.cwiseProduct(scale);
    return x.allFinite() && beta <= 10.0 * target;
  }

  long rhs_evals = 0;
  long jacobian_evals = 0;
  long factorizations = 0;
  long krylov_iters = 0;

 private:
  /// out = v - c J v with J v from a forward difference.
  void apply_operator(const VectorXd& v, VectorXd& out) {
    const double vn = v.norm();
    if (vn == 0.0) {
      out.setZero(v.size());
      return;
    }
    const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    const double sigma = root_eps * (1.0 + yJ_.norm()) / vn;
    ypert_ = yJ_ + sigma * v;
    fpert_.resize(v.size());
    sys_.rhs(tJ_, ypert_, fpert_);
    ++rhs_evals;
    out = v - (c_ / sigma) * (fpert_ - fJ_);
  }

  System& sys_;
  Precond& pre_;
  int restart_, max_iters_;
  double tJ_ = 0.0, c_ = 0.0;
  VectorXd yJ_, fJ_, ypert_, fpert_;
};

}  // namespace tearfilm
