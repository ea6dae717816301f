#pragma once

// Derivative-free minimizers: Nelder-Mead simplex and Brent's principal-axis
// method. Both keep the best point seen and report it whatever the exit
// reason.

#include "tearfilm/core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace tearfilm {

enum class Algorithm { nelder_mead, principal_axis };

inline const char* to_string(Algorithm a) {
  return a == Algorithm::nelder_mead ? "nelder-mead" : "principal-axis";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "nelder-mead" || s == "nm") return Algorithm::nelder_mead;
  if (s == "principal-axis" || s == "praxis") return Algorithm::principal_axis;
  throw ConfigError("unknown optimizer '" + s + "' (expected nelder-mead or principal-axis)");
}

struct OptimizerOptions {
  Algorithm algorithm = Algorithm::principal_axis;
  double x_tol = 1e-8;
  double f_tol = 1e-12;
  int max_iterations = 500;
  long max_evaluations = 100000;
  /// Initial simplex edge, relative to max(|x_i|, 0.1).
  double initial_step = 0.1;
  /// Largest principal-axis line-search step; 0 selects max(1, |x0|_inf).
  double max_step = 0.0;
  double penalty = 1e8;
  int max_restarts = 3;

  void validate() const {
    if (!(x_tol > 0.0) || !(f_tol > 0.0)) throw ConfigError("optimizer tolerances must be positive");
    if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
    if (max_evaluations < 1) throw ConfigError("max_evaluations must be positive");
    if (!(initial_step > 0.0)) throw ConfigError("initial_step must be positive");
    if (!(max_step >= 0.0)) throw ConfigError("max_step must be non-negative");
    if (!(penalty > 0.0)) throw ConfigError("penalty must be positive");
    if (max_restarts < 0) throw ConfigError("max_restarts must be non-negative");
  }
};

enum class OptimizeStatus { converged, max_iterations, max_evaluations };

inline const char* to_string(OptimizeStatus s) {
  switch (s) {
    case OptimizeStatus::converged: return "converged";
    case OptimizeStatus::max_iterations: return "max-iterations";
    case OptimizeStatus::max_evaluations: return "max-evaluations";
  }
  return "unknown";
}

struct OptimizeResult {
  VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  long evaluations = 0;
  int restarts = 0;
  OptimizeStatus status = OptimizeStatus::max_iterations;
  Algorithm algorithm = Algorithm::principal_axis;
  /// Best objective after each iteration.
  std::vector<double> history;

  bool converged() const { return status == OptimizeStatus::converged; }
};

using ObjectiveFunction = std::function<double(const VectorXd&)>;

/// Called after every iteration with (iteration, best x, best f). Returning
/// true signals that the objective itself changed (e.g. a surrogate was
/// rebuilt) and cached values must be re-evaluated.
using IterationHook = std::function<bool(int, const VectorXd&, double)>;

namespace detail {

/// Counts evaluations and tracks the best point.
class TrackedObjective {
 public:
  TrackedObjective(const ObjectiveFunction& f, const OptimizerOptions& o) : f_(f), opts_(o) {}

  double operator()(const VectorXd& x) {
    ++evaluations;
    double v = f_(x);
    if (!std::isfinite(v)) v = opts_.penalty;
    if (v >= opts_.penalty) ++penalties;
    if (v < best_f || best_x.size() == 0) {
      best_f = v;
      best_x = x;
    }
    return v;
  }

  bool budget_exhausted() const { return evaluations >= opts_.max_evaluations; }
  bool is_penalty(double v) const { return v >= opts_.penalty; }

  /// Forget the best value after the objective changed; keep the point.
  void reset_best() { best_f = std::numeric_limits<double>::infinity(); }

  long evaluations = 0;
  long penalties = 0;
  double best_f = std::numeric_limits<double>::infinity();
  VectorXd best_x;

 private:
  const ObjectiveFunction& f_;
  const OptimizerOptions& opts_;
};

inline VectorXd initial_steps(const VectorXd& x0, double rel) {
  VectorXd s(x0.size());
  for (Index i = 0; i < x0.size(); ++i) s[i] = rel * std::max(std::abs(x0[i]), 0.1);
  return s;
}

// ---------------------------------------------------------------------------

class NelderMead {
 public:
  NelderMead(TrackedObjective& f, const OptimizerOptions& o, const IterationHook& hook)
      : f_(f), o_(o), hook_(hook) {}

  OptimizeResult run(const VectorXd& x0) {
    OptimizeResult r;
    r.algorithm = Algorithm::nelder_mead;
    n_ = x0.size();
    init_simplex(x0, initial_steps(x0, o_.initial_step));
    int it = 0;
    for (;;) {
      if (it >= o_.max_iterations) {
        r.status = OptimizeStatus::max_iterations;
        break;
      }
      if (f_.budget_exhausted()) {
        r.status = OptimizeStatus::max_evaluations;
        break;
      }
      order();
      if (small_enough()) {
        // Restart once around the converged point; stop if that does not help.
        if (r.restarts >= o_.max_restarts || last_restart_f_ <= fv_[0] + o_.f_tol) {
          r.status = OptimizeStatus::converged;
          break;
        }
        last_restart_f_ = fv_[0];
        ++r.restarts;
        restart(0.5);
        continue;
      }
      iterate();
      ++it;
      order();
      r.history.push_back(f_.best_f);
      if (penalised_majority() && !f_.is_penalty(fv_[0]) && r.restarts < o_.max_restarts) {
        ++r.restarts;
        restart(0.5);
      }
      if (hook_ && hook_(it, f_.best_x, f_.best_f)) {
        f_.reset_best();
        for (Index i = 0; i <= n_; ++i) fv_[i] = f_(X_.col(i));
        last_restart_f_ = std::numeric_limits<double>::infinity();
      }
    }
    r.iterations = it;
    r.x = f_.best_x;
    r.f = f_.best_f;
    r.evaluations = f_.evaluations;
    return r;
  }

 private:
  void init_simplex(const VectorXd& x0, const VectorXd& step) {
    X_.resize(n_, n_ + 1);
    fv_.resize(n_ + 1);
    X_.col(0) = x0;
    fv_[0] = f_(x0);
    for (Index i = 0; i < n_; ++i) {
      X_.col(i + 1) = x0;
      X_(i, i + 1) += step[i];
      fv_[i + 1] = f_(X_.col(i + 1));
    }
  }

  void restart(double shrink) {
    order();
    const VectorXd best = X_.col(0);
    VectorXd step(n_);
    for (Index i = 0; i < n_; ++i) {
      double spread = 0.0;
      for (Index j = 1; j <= n_; ++j) spread = std::max(spread, std::abs(X_(i, j) - best[i]));
      const double base = o_.initial_step * std::max(std::abs(best[i]), 0.1);
      step[i] = std::max(shrink * base * 0.1, std::min(base, std::max(spread, 100.0 * o_.x_tol)));
    }
    const double fb = fv_[0];
    X_.col(0) = best;
    fv_[0] = fb;
    for (Index i = 0; i < n_; ++i) {
      X_.col(i + 1) = best;
      X_(i, i + 1) += step[i];
      fv_[i + 1] = f_(X_.col(i + 1));
    }
  }

  void order() {
    std::vector<Index> idx(n_ + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return fv_[a] < fv_[b]; });
    MatrixXd X(n_, n_ + 1);
    VectorXd fv(n_ + 1);
    for (Index i = 0; i <= n_; ++i) {
      X.col(i) = X_.col(idx[i]);
      fv[i] = fv_[idx[i]];
    }
    X_.swap(X);
    fv_.swap(fv);
  }

  bool small_enough() const {
    double dx = 0.0;
    for (Index j = 1; j <= n_; ++j) dx = std::max(dx, (X_.col(j) - X_.col(0)).lpNorm<Eigen::Infinity>());
    const double df = fv_[n_] - fv_[0];
    return dx <= o_.x_tol && df <= o_.f_tol;
  }

  bool penalised_majority() const {
    Index k = 0;
    for (Index i = 0; i <= n_; ++i) k += f_.is_penalty(fv_[i]);
    return 2 * k > n_ + 1;
  }

  void iterate() {
    const VectorXd xbar = X_.leftCols(n_).rowwise().mean();
    const VectorXd& worst = X_.col(n_);
    const VectorXd xr = xbar + (xbar - worst);
    const double fr = f_(xr);
    if (fr < fv_[0]) {
      const VectorXd xe = xbar + 2.0 * (xbar - worst);
      const double fe = f_(xe);
      if (fe < fr) accept(xe, fe);
      else accept(xr, fr);
      return;
    }
    if (fr < fv_[n_ - 1]) {
      accept(xr, fr);
      return;
    }
    if (fr < fv_[n_]) {
      const VectorXd xc = xbar + 0.5 * (xr - xbar);
      const double fc = f_(xc);
      if (fc <= fr) {
        accept(xc, fc);
        return;
      }
    } else {
      const VectorXd xc = xbar + 0.5 * (worst - xbar);
      const double fc = f_(xc);
      if (fc < fv_[n_]) {
        accept(xc, fc);
        return;
      }
    }
    for (Index i = 1; i <= n_; ++i) {
      X_.col(i) = X_.col(0) + 0.5 * (X_.col(i) - X_.col(0));
      fv_[i] = f_(X_.col(i));
    }
  }

  void accept(const VectorXd& x, double fx) {
    X_.col(n_) = x;
    fv_[n_] = fx;
  }

  TrackedObjective& f_;
  const OptimizerOptions& o_;
  const IterationHook& hook_;
  Index n_ = 0;
  MatrixXd X_;
  VectorXd fv_;
  double last_restart_f_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Brent's principal-axis method. Iterations are line searches.

class PrincipalAxis {
 public:
  PrincipalAxis(TrackedObjective& f, const OptimizerOptions& o, const IterationHook& hook)
      : f_(f), o_(o), hook_(hook), rng_(4711) {}

  OptimizeResult run(const VectorXd& x0) {
    OptimizeResult r;
    r.algorithm = Algorithm::principal_axis;
    n_ = x0.size();
    x_ = x0;
    result_ = &r;
    try {
      if (n_ == 1) {
        minimize_1d();
      } else {
        praxis();
      }
      r.status = OptimizeStatus::converged;
    } catch (const Stop& s) {
      r.status = s.status;
    }
    r.iterations = nl_;
    r.x = f_.best_x;
    r.f = f_.best_f;
    r.evaluations = f_.evaluations;
    return r;
  }

 private:
  struct Stop {
    OptimizeStatus status;
  };

  double eval(const VectorXd& x) {
    if (f_.budget_exhausted()) throw Stop{OptimizeStatus::max_evaluations};
    ++nf_;
    return f_(x);
  }

  /// Called after each line search.
  void line_search_done() {
    ++nl_;
    result_->history.push_back(f_.best_f);
    if (hook_ && hook_(nl_, f_.best_x, f_.best_f)) {
      f_.reset_best();
      fx_ = eval(x_);
    }
    if (nl_ >= o_.max_iterations) throw Stop{OptimizeStatus::max_iterations};
  }

  double step_limit() const {
    return o_.max_step > 0.0 ? o_.max_step : std::max(1.0, x_.lpNorm<Eigen::Infinity>());
  }

  /// f along direction j (j >= 0) or along the quadratic through q0, x, q1 (j < 0).
  double flin(int j, double l) {
    VectorXd t(n_);
    if (j >= 0) {
      t = x_ + l * V_.col(j);
    } else {
      qa_ = l * (l - qd1_) / (qd0_ * (qd0_ + qd1_));
      qb_ = (l + qd0_) * (qd1_ - l) / (qd0_ * qd1_);
      qc_ = l * (l + qd0_) / (qd1_ * (qd0_ + qd1_));
      t = qa_ * q0_ + qb_ * x_ + qc_ * q1_;
    }
    return eval(t);
  }

  /// Line minimization along direction j (or the space curve when j < 0).
  /// d2 approximates half the second derivative, x1 is the step estimate,
  /// f1 = f(x1) when fk is true.
  void minny(int j, int nits, double& d2, double& x1, double& f1, bool fk) {
    const double sf1 = f1, sx1 = x1;
    int k = 0;
    double xm = 0.0, fm = fx_, f0 = fx_;
    const bool dz = d2 < machep_;
    double s = x_.norm();
    const double temp = dz ? dmin_ : d2;
    double t2 = m4_ * std::sqrt(std::abs(fx_) / temp + s * ldt_) + m2_ * ldt_;
    s = m4_ * s + t_;
    if (dz && t2 > s) t2 = s;
    t2 = std::max(t2, small_);
    t2 = std::min(t2, 0.01 * h_);
    if (fk && f1 <= fm) {
      xm = x1;
      fm = f1;
    }
    if (!fk || std::abs(x1) < t2) {
      x1 = x1 >= 0.0 ? t2 : -t2;
      f1 = flin(j, x1);
    }
    if (f1 <= fm) {
      xm = x1;
      fm = f1;
    }

    bool need_second = dz;
    double x2 = 0.0, f2 = 0.0;
    for (;;) {
      if (need_second) {
        // Evaluate at a second point to estimate curvature.
        x2 = f0 < f1 ? -x1 : 2.0 * x1;
        f2 = flin(j, x2);
        if (f2 <= fm) {
          xm = x2;
          fm = f2;
        }
        d2 = (x2 * (f1 - f0) - x1 * (f2 - f0)) / ((x1 * x2) * (x1 - x2));
      }
      const double d1 = (f1 - f0) / x1 - x1 * d2;
      need_second = true;
      if (d2 <= small_) {
        x2 = d1 < 0.0 ? h_ : -h_;
      } else {
        x2 = -0.5 * d1 / d2;
      }
      if (std::abs(x2) > h_) x2 = x2 > 0.0 ? h_ : -h_;

      bool ok = true;
      for (;;) {
        f2 = flin(j, x2);
        if (k >= nits || f2 <= f0) break;
        ++k;
        if (f0 < f1 && x1 * x2 > 0.0) {
          ok = false;
          break;
        }
        x2 *= 0.5;
      }
      if (ok) break;
    }

    if (f2 > fm) {
      x2 = xm;
    } else {
      fm = f2;
    }
    if (std::abs(x2 * (x2 - x1)) > small_) {
      d2 = (x2 * (f1 - f0) - x1 * (fm - f0)) / ((x1 * x2) * (x1 - x2));
    } else if (k > 0) {
      d2 = 0.0;
    }
    d2 = std::max(d2, small_);
    x1 = x2;
    fx_ = fm;
    if (sf1 < fx_) {
      fx_ = sf1;
      x1 = sx1;
    }
    if (j >= 0) x_ += x1 * V_.col(j);
    line_search_done();
  }

  /// Search along the quadratic curve through the last three iterates.
  void quad() {
    std::swap(fx_, qf1_);
    std::swap(x_, q1_);
    qd1_ = (x_ - q1_).norm();
    double l = qd1_;
    double s = 0.0;
    if (qd0_ > 0.0 && qd1_ > 0.0 && nl_ >= 3 * n_ * n_) {
      double value = qf1_;
      minny(-1, 2, s, l, value, true);
      qa_ = l * (l - qd1_) / (qd0_ * (qd0_ + qd1_));
      qb_ = (l + qd0_) * (qd1_ - l) / (qd0_ * qd1_);
      qc_ = l * (l + qd0_) / (qd1_ * (qd0_ + qd1_));
    } else {
      fx_ = qf1_;
      qa_ = 0.0;
      qb_ = 0.0;
      qc_ = 1.0;
    }
    qd0_ = qd1_;
    const VectorXd s0 = q0_;
    q0_ = x_;
    x_ = qa_ * s0 + qb_ * x_ + qc_ * q1_;
  }

  void praxis() {
    machep_ = std::numeric_limits<double>::epsilon();
    small_ = machep_ * machep_;
    vsmall_ = small_ * small_;
    large_ = 1.0 / small_;
    vlarge_ = 1.0 / vsmall_;
    m2_ = std::sqrt(machep_);
    m4_ = std::sqrt(m2_);
    const int ktm = 1;
    bool illc = false;
    double ldfac = 0.01;
    int kt = 0;

    h_ = std::max(step_limit(), 100.0 * o_.x_tol);
    t_ = small_ + o_.x_tol;
    double t2 = t_;
    dmin_ = small_;
    ldt_ = h_;
    fx_ = eval(x_);
    qf1_ = fx_;
    V_ = MatrixXd::Identity(n_, n_);
    d_ = VectorXd::Zero(n_);
    qa_ = qb_ = qc_ = 0.0;
    qd0_ = qd1_ = 0.0;
    q0_ = x_;
    q1_ = x_;
    VectorXd y(n_), z(n_);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    for (;;) {
      const long penalties_before = f_.penalties;
      const long evals_before = f_.evaluations;
      double sf = d_[0];
      d_[0] = 0.0;
      double s = 0.0;
      double value = fx_;
      minny(0, 2, d_[0], s, value, false);
      if (s <= 0.0) V_.col(0) = -V_.col(0);
      if (sf <= 0.9 * d_[0] || 0.9 * sf >= d_[0]) d_.tail(n_ - 1).setZero();

      int kl = 0;
      for (int k = 1; k < n_; ++k) {
        y = x_;
        sf = fx_;
        if (kt > 0) illc = true;
        for (;;) {
          kl = k;
          double df = 0.0;
          if (illc) {
            for (int j = 0; j < n_; ++j) {
              s = (0.1 * ldt_ + t2 * std::pow(10.0, kt)) * (uni(rng_) - 0.5);
              z[j] = s;
              x_ += s * V_.col(j);
            }
            fx_ = eval(x_);
          }
          for (int k2 = k; k2 < n_; ++k2) {
            const double sl = fx_;
            s = 0.0;
            value = fx_;
            minny(k2, 2, d_[k2], s, value, false);
            const double gain = illc ? d_[k2] * (s + z[k2]) * (s + z[k2]) : sl - fx_;
            if (df <= gain) {
              df = gain;
              kl = k2;
            }
          }
          if (illc || df >= std::abs(100.0 * machep_ * fx_)) break;
          illc = true;
        }
        for (int k2 = 0; k2 < k; ++k2) {
          s = 0.0;
          value = fx_;
          minny(k2, 2, d_[k2], s, value, false);
        }
        const double f1 = fx_;
        fx_ = sf;
        double lds = 0.0;
        for (int i = 0; i < n_; ++i) {
          const double sl = x_[i];
          x_[i] = y[i];
          y[i] = sl - y[i];
          lds += y[i] * y[i];
        }
        lds = std::sqrt(lds);
        if (lds > small_) {
          for (int i = kl - 1; i >= k; --i) {
            V_.col(i + 1) = V_.col(i);
            d_[i + 1] = d_[i];
          }
          d_[k] = 0.0;
          V_.col(k) = y / lds;
          double fval = f1;
          minny(k, 4, d_[k], lds, fval, true);
          if (lds <= 0.0) {
            lds = -lds;
            V_.col(k) = -V_.col(k);
          }
        }
        ldt_ = std::max(ldfac * ldt_, lds);
        t2 = m2_ * x_.norm() + t_;
        if (ldt_ > 0.5 * t2) kt = -1;
        ++kt;
        if (kt > ktm) return;
      }

      quad();

      // Principal axes of the approximate Hessian from the direction set.
      double dn = 0.0;
      for (int i = 0; i < n_; ++i) {
        d_[i] = 1.0 / std::sqrt(std::max(d_[i], small_));
        dn = std::max(dn, d_[i]);
      }
      for (int j = 0; j < n_; ++j) V_.col(j) *= d_[j] / dn;
      Eigen::JacobiSVD<MatrixXd> svd(V_, Eigen::ComputeFullU);
      V_ = svd.matrixU();
      const VectorXd sv = svd.singularValues();
      for (int i = 0; i < n_; ++i) {
        const double si = dn * sv[i];
        d_[i] = si > large_ ? vsmall_ : (si < small_ ? vlarge_ : 1.0 / (si * si));
      }
      std::vector<int> idx(n_);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d_[a] > d_[b]; });
      MatrixXd Vs(n_, n_);
      VectorXd ds(n_);
      for (int i = 0; i < n_; ++i) {
        Vs.col(i) = V_.col(idx[i]);
        ds[i] = d_[idx[i]];
      }
      V_.swap(Vs);
      d_.swap(ds);
      dmin_ = std::max(d_[n_ - 1], small_);
      illc = m2_ * d_[0] > dmin_;

      // Restart the direction set after a sweep dominated by penalties.
      const long pen = f_.penalties - penalties_before, ev = f_.evaluations - evals_before;
      if (ev > 0 && 2 * pen > ev && !f_.is_penalty(fx_)) {
        ++result_->restarts;
        V_.setIdentity();
        d_.setZero();
        ldt_ = h_;
        illc = false;
      }
    }
  }

  /// One-dimensional case: repeated parabolic line searches.
  void minimize_1d() {
    machep_ = std::numeric_limits<double>::epsilon();
    small_ = machep_ * machep_;
    m2_ = std::sqrt(machep_);
    m4_ = std::sqrt(m2_);
    h_ = std::max(step_limit(), 100.0 * o_.x_tol);
    t_ = small_ + o_.x_tol;
    dmin_ = small_;
    ldt_ = h_;
    V_ = MatrixXd::Identity(1, 1);
    d_ = VectorXd::Zero(1);
    fx_ = eval(x_);
    for (;;) {
      const VectorXd before = x_;
      double s = 0.0, value = fx_;
      minny(0, 2, d_[0], s, value, false);
      if ((x_ - before).norm() <= o_.x_tol) return;
    }
  }

  TrackedObjective& f_;
  const OptimizerOptions& o_;
  const IterationHook& hook_;
  OptimizeResult* result_ = nullptr;
  std::mt19937_64 rng_;

  int n_ = 0;
  int nl_ = 0;
  long nf_ = 0;
  VectorXd x_, d_, q0_, q1_;
  MatrixXd V_;
  double fx_ = 0.0, qf1_ = 0.0;
  double qa_ = 0.0, qb_ = 0.0, qc_ = 0.0, qd0_ = 0.0, qd1_ = 0.0;
  double t_ = 0.0, h_ = 0.0, ldt_ = 0.0, dmin_ = 0.0;
  double machep_ = 0.0, small_ = 0.0, vsmall_ = 0.0, large_ = 0.0, vlarge_ = 0.0, m2_ = 0.0, m4_ = 0.0;
};

}  // namespace detail

/// Minimize f from x0. The returned point is always the best one evaluated.
inline OptimizeResult minimize(const ObjectiveFunction& f, const VectorXd& x0, const OptimizerOptions& opts = {},
                               const IterationHook& hook = {}) {
  opts.validate();
  if (x0.size() == 0) throw ConfigError("cannot optimize over an empty parameter vector");
  detail::TrackedObjective tracked(f, opts);
  if (opts.algorithm == Algorithm::nelder_mead) return detail::NelderMead(tracked, opts, hook).run(x0);
  return detail::PrincipalAxis(tracked, opts, hook).run(x0);
}

}  // namespace tearfilm
