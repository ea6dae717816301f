#pragma once

// Variable-order (1-5), quasi-constant step numerical differentiation
// formulas in backward-difference form. The step size changes by
// re-interpolating the difference array; the order adapts from the
// neighbouring-order error estimates. kappa coefficients follow Shampine's
// NDF choices; order 5 is plain BDF.

#include "tearfilm/newton_linear.hpp"

#include <array>
#include <limits>
#include <optional>

namespace tearfilm {

struct BdfOptions {
  double rtol = 1e-7;
  double atol = 1e-9;
  double max_step = std::numeric_limits<double>::infinity();
  double first_step = 0.0;  // 0 selects automatically
  long max_steps = 200000;
};

enum class StepStatus { ok, step_underflow, failure };

template <class S>
concept HasAdmissibility = requires(const S& s, const VectorXd& y) {
  { s.admissible(y) } -> std::convertible_to<bool>;
};

template <OdeSystem System, class Linear>
class Bdf {
 public:
  static constexpr int max_order = 5;

  Bdf(System& sys, Linear& lin, BdfOptions opts) : sys_(sys), lin_(lin), opts_(opts) {
    if (!(opts.rtol > 0.0) || !(opts.atol > 0.0)) throw ParameterError("tolerances must be positive");
    constexpr std::array<double, 6> kappa = {0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0};
    gamma_[0] = 0.0;
    for (int j = 1; j <= max_order; ++j) gamma_[j] = gamma_[j - 1] + 1.0 / j;
    for (int j = 0; j <= max_order; ++j) {
      alpha_[j] = (1.0 - kappa[j]) * gamma_[j];
      error_const_[j] = kappa[j] * gamma_[j] + 1.0 / (j + 1);
    }
    const double eps = std::numeric_limits<double>::epsilon();
    newton_tol_ = std::max(10.0 * eps / opts.rtol, std::min(0.03, std::sqrt(opts.rtol)));
  }

  void initialize(double t0, const VectorXd& y0, double t_bound) {
    t_ = t0;
    t_old_ = t0;
    t_bound_ = t_bound;
    y_ = y0;
    const Index n = y0.size();
    VectorXd f0(n);
    eval(t0, y0, f0);
    h_abs_ = opts_.first_step > 0.0 ? opts_.first_step : initial_step(f0);
    h_abs_ = std::min({h_abs_, opts_.max_step, t_bound - t0});
    D_ = MatrixXd::Zero(max_order + 3, n);
    D_.row(0) = y0.transpose();
    D_.row(1) = (f0 * h_abs_).transpose();
    order_ = 1;
    n_equal_steps_ = 0;
    lin_.update_jacobian(t0, y0, f0);
    jac_current_ = true;
    factored_ = false;
    steps = 0;
  }

  double t() const { return t_; }
  double t_old() const { return t_old_; }
  const VectorXd& y() const { return y_; }
  int order() const { return order_; }
  double step_size() const { return h_abs_; }

  /// Interpolated solution for t in [t_old, t] from the last accepted step.
  VectorXd dense(double t) const {
    VectorXd out = dense_D_.row(0).transpose();
    double p = 1.0;
    for (int j = 0; j < dense_order_; ++j) {
      const double shift = dense_t_ - dense_h_ * j;
      const double denom = dense_h_ * (1 + j);
      p *= (t - shift) / denom;
      out += p * dense_D_.row(j + 1).transpose();
    }
    return out;
  }

  StepStatus step() {
    if (steps >= opts_.max_steps) return StepStatus::failure;
    const double min_step = 10.0 * std::abs(std::nextafter(t_, std::numeric_limits<double>::infinity()) - t_);
    double h_abs = h_abs_;
    if (h_abs > opts_.max_step) {
      change_D(order_, opts_.max_step / h_abs);
      h_abs = opts_.max_step;
      n_equal_steps_ = 0;
      factored_ = false;
    } else if (h_abs < min_step) {
      change_D(order_, min_step / h_abs);
      h_abs = min_step;
      n_equal_steps_ = 0;
      factored_ = false;
    }

    const int order = order_;
    const Index n = y_.size();
    VectorXd y_predict(n), psi(n), scale(n), y_new(n), d(n);
    double t_new = t_;
    int n_iter = 0;
    double error_norm = 0.0;

    bool accepted = false;
    while (!accepted) {
      if (h_abs < min_step) return StepStatus::step_underflow;
      t_new = t_ + h_abs;
      if (t_new - t_bound_ > 0.0) {
        t_new = t_bound_;
        change_D(order, std::abs(t_new - t_) / h_abs);
        n_equal_steps_ = 0;
        factored_ = false;
      }
      const double h = t_new - t_;
      h_abs = std::abs(h);

      y_predict = D_.topRows(order + 1).colwise().sum().transpose();
      scale = opts_.atol + opts_.rtol * y_predict.array().abs();
      psi.setZero();
      for (int j = 1; j <= order; ++j) psi += gamma_[j] * D_.row(j).transpose();
      psi /= alpha_[order];

      const double c = h / alpha_[order];
      bool converged = false;
      for (;;) {
        if (!factored_ || c != factored_c_) {
          lin_.set_coefficient(c);
          factored_ = true;
          factored_c_ = c;
        }
        converged = newton(t_new, y_predict, c, psi, scale, y_new, d, n_iter);
        if (converged || jac_current_) break;
        VectorXd fp(n);
        eval(t_new, y_predict, fp);
        lin_.update_jacobian(t_new, y_predict, fp);
        jac_current_ = true;
        factored_ = false;
      }

      if (!converged) {
        constexpr double factor = 0.5;
        h_abs *= factor;
        change_D(order, factor);
        n_equal_steps_ = 0;
        factored_ = false;
        continue;
      }

      const double safety = 0.9 * (2 * newton_maxiter + 1) / double(2 * newton_maxiter + n_iter);
      scale = opts_.atol + opts_.rtol * y_new.array().abs();
      error_norm = error_const_[order] * scaled_rms(d, scale);
      if (error_norm > 1.0) {
        const double factor = std::max(min_factor, safety * std::pow(error_norm, -1.0 / (order + 1)));
        h_abs *= factor;
        change_D(order, factor);
        n_equal_steps_ = 0;
      } else {
        accepted = true;
        last_safety_ = safety;
      }
    }

    ++steps;
    ++n_equal_steps_;
    t_old_ = t_;
    t_ = t_new;
    y_ = y_new;
    h_abs_ = h_abs;
    jac_current_ = false;

    D_.row(order + 2) = d.transpose() - D_.row(order + 1);
    D_.row(order + 1) = d.transpose();
    for (int i = order; i >= 0; --i) D_.row(i) += D_.row(i + 1);

    dense_t_ = t_;
    dense_h_ = h_abs;
    dense_order_ = order;
    dense_D_ = D_.topRows(order + 1);

    if (n_equal_steps_ < order + 1) return StepStatus::ok;

    const double inf = std::numeric_limits<double>::infinity();
    const double err_m = order > 1 ? error_const_[order - 1] * scaled_rms(D_.row(order).transpose(), scale) : inf;
    const double err_p = order < max_order
                             ? error_const_[order + 1] * scaled_rms(D_.row(order + 2).transpose(), scale)
                             : inf;
    const std::array<double, 3> norms = {err_m, error_norm, err_p};
    std::array<double, 3> factors{};
    for (int i = 0; i < 3; ++i)
      factors[i] = norms[i] == 0.0 ? inf : std::pow(norms[i], -1.0 / (order + i));
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (factors[i] > factors[best]) best = i;
    order_ = order + best - 1;
    const double factor = std::min(max_factor, last_safety_ * factors[best]);
    h_abs_ *= factor;
    change_D(order_, factor);
    n_equal_steps_ = 0;
    factored_ = false;
    return StepStatus::ok;
  }

  long steps = 0;
  long rhs_evals = 0;

 private:
  static constexpr int newton_maxiter = 4;
  static constexpr double min_factor = 0.2;
  static constexpr double max_factor = 10.0;

  void eval(double t, const VectorXd& y, VectorXd& f) {
    sys_.rhs(t, y, f);
    ++rhs_evals;
  }

  bool newton(double t_new, const VectorXd& y_predict, double c, const VectorXd& psi, const VectorXd& scale,
              VectorXd& y, VectorXd& d, int& n_iter) {
    const Index n = y_predict.size();
    y = y_predict;
    d.setZero(n);
    VectorXd f(n), dy(n);
    std::optional<double> dy_norm_old;
    bool converged = false;
    int k = 0;
    for (; k < newton_maxiter; ++k) {
      if constexpr (HasAdmissibility<System>) {
        if (!sys_.admissible(y)) break;
      }
      eval(t_new, y, f);
      if (!f.allFinite()) break;
      if (!lin_.solve(c * f - psi - d, scale, 0.05 * newton_tol_, dy)) break;
      const double dy_norm = scaled_rms(dy, scale);
      std::optional<double> rate;
      if (dy_norm_old) rate = dy_norm / *dy_norm_old;
      if (rate && (*rate >= 1.0 || std::pow(*rate, newton_maxiter - k) / (1.0 - *rate) * dy_norm > newton_tol_))
        break;
      y += dy;
      d += dy;
      if (dy_norm == 0.0 || (rate && *rate / (1.0 - *rate) * dy_norm < newton_tol_)) {
        converged = true;
        break;
      }
      dy_norm_old = dy_norm;
    }
    n_iter = k + 1;
    if (converged) {
      if constexpr (HasAdmissibility<System>) converged = sys_.admissible(y);
    }
    return converged;
  }

  /// Rescale the difference array for a step-size change by factor.
  void change_D(int order, double factor) {
    const MatrixXd R = compute_R(order, factor);
    const MatrixXd U = compute_R(order, 1.0);
    const MatrixXd RU = R * U;
    D_.topRows(order + 1) = RU.transpose() * D_.topRows(order + 1);
  }

  static MatrixXd compute_R(int order, double factor) {
    MatrixXd M = MatrixXd::Zero(order + 1, order + 1);
    for (int i = 1; i <= order; ++i)
      for (int j = 1; j <= order; ++j) M(i, j) = (i - 1 - factor * j) / double(i);
    M.row(0).setOnes();
    // cumulative product down the columns
    for (int i = 1; i <= order; ++i) M.row(i) = M.row(i).cwiseProduct(M.row(i - 1));
    return M;
  }

  double initial_step(const VectorXd& f0) {
    const VectorXd scale = opts_.atol + opts_.rtol * y_.array().abs();
    const double d0 = scaled_rms(y_, scale);
    const double d1 = scaled_rms(f0, scale);
    const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    VectorXd y1 = y_ + h0 * f0, f1(y_.size());
    eval(t_ + h0, y1, f1);
    const double d2 = scaled_rms(f1 - f0, scale) / h0;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                   : std::pow(0.01 / std::max(d1, d2), 0.5);
    return std::min(100.0 * h0, h1);
  }

  System& sys_;
  Linear& lin_;
  BdfOptions opts_;

  std::array<double, max_order + 1> gamma_{}, alpha_{}, error_const_{};
  double newton_tol_ = 0.0;

  double t_ = 0.0, t_old_ = 0.0, t_bound_ = 0.0;
  VectorXd y_;
  MatrixXd D_;
  double h_abs_ = 0.0;
  int order_ = 1;
  int n_equal_steps_ = 0;
  bool jac_current_ = false;
  bool factored_ = false;
  double factored_c_ = 0.0;
  double last_safety_ = 0.9;

  double dense_t_ = 0.0, dense_h_ = 0.0;
  int dense_order_ = 0;
  MatrixXd dense_D_;
};

}  // namespace tearfilm
