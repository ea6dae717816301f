#include "tearfilm/optimize.hpp"

#include <gtest/gtest.h>

using namespace tearfilm;

namespace {

double rosenbrock(const VectorXd& x) { return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2); }

OptimizerOptions with(Algorithm a) {
  OptimizerOptions o;
  o.algorithm = a;
  return o;
}

class BothAlgorithms : public ::testing::TestWithParam<Algorithm> {};

}  // namespace

TEST(Rosenbrock, GridSearchLocatesMinimumAtOne) {
  double best = 1e300;
  VectorXd at(2), x(2);
  for (int i = -200; i <= 200; ++i)
    for (int j = -200; j <= 300; ++j) {
      x << 0.01 * i, 0.01 * j;
      if (const double v = rosenbrock(x); v < best) best = v, at = x;
    }
  EXPECT_NEAR(at[0], 1.0, 1e-12);
  EXPECT_NEAR(at[1], 1.0, 1e-12);
}

TEST_P(BothAlgorithms, RosenbrockFromStandardStart) {
  const auto r = minimize(rosenbrock, (VectorXd(2) << -1.2, 1.0).finished(), with(GetParam()));
  EXPECT_LT(r.f, 1e-8);
  EXPECT_LE(r.iterations, 500);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
  EXPECT_EQ(r.algorithm, GetParam());
}

TEST_P(BothAlgorithms, DiagonalQuadraticBowl) {
  const VectorXd target = (VectorXd(4) << 0.3, -1.0, 2.0, 0.05).finished();
  const VectorXd D = (VectorXd(4) << 1.0, 4.0, 0.5, 10.0).finished();
  auto f = [&](const VectorXd& p) { return (p - target).cwiseProduct(D).dot(p - target); };
  OptimizerOptions o = with(GetParam());
  o.max_iterations = 5000;
  const auto r = minimize(f, VectorXd::Zero(4), o);
  EXPECT_TRUE(r.converged());
  EXPECT_LT((r.x - target).cwiseAbs().maxCoeff(), 1e-5);
}

TEST_P(BothAlgorithms, BestSeenHistoryIsNonIncreasing) {
  const auto r = minimize(rosenbrock, (VectorXd(2) << -1.2, 1.0).finished(), with(GetParam()));
  ASSERT_FALSE(r.history.empty());
  for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1]);
  EXPECT_EQ(r.history.back(), r.f);
}

TEST_P(BothAlgorithms, EscapesPenaltyRegion) {
  // Non-finite values and the penalty plateau both count as infeasible.
  OptimizerOptions o = with(GetParam());
  o.penalty = 1e6;
  auto f = [](const VectorXd& x) {
    if (x[0] < 0.0) return std::numeric_limits<double>::quiet_NaN();
    if (x[1] > 3.0) return 1e6;
    return std::pow(x[0] - 1.0, 2) + std::pow(x[1] - 2.0, 2);
  };
  const auto r = minimize(f, (VectorXd(2) << 0.2, 2.5).finished(), o);
  EXPECT_LT(r.f, 1e-10);
}

TEST_P(BothAlgorithms, IterationCapReportsNonConvergence) {
  OptimizerOptions o = with(GetParam());
  o.max_iterations = 3;
  const auto r = minimize(rosenbrock, (VectorXd(2) << -1.2, 1.0).finished(), o);
  EXPECT_EQ(r.status, OptimizeStatus::max_iterations);
  EXPECT_LE(r.iterations, 3);
  EXPECT_LT(r.f, rosenbrock((VectorXd(2) << -1.2, 1.0).finished()));
}

TEST_P(BothAlgorithms, HookCanSwapTheObjective) {
  // After iteration 5 the target moves; the optimizer must follow.
  VectorXd target = VectorXd::Zero(3);
  auto f = [&](const VectorXd& x) { return (x - target).squaredNorm(); };
  IterationHook hook = [&](int it, const VectorXd&, double) {
    if (it != 5) return false;
    target = VectorXd::Constant(3, 0.5);
    return true;
  };
  OptimizerOptions o = with(GetParam());
  o.max_iterations = 2000;
  const auto r = minimize(f, VectorXd::Constant(3, 1.0), o, hook);
  EXPECT_LT((r.x - target).cwiseAbs().maxCoeff(), 1e-5);
}

TEST_P(BothAlgorithms, OneDimensional) {
  auto f = [](const VectorXd& x) { return std::pow(x[0] - 3.0, 2) + 1.0; };
  const auto r = minimize(f, VectorXd::Zero(1), with(GetParam()));
  EXPECT_NEAR(r.x[0], 3.0, 1e-6);
  EXPECT_NEAR(r.f, 1.0, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Optimizers, BothAlgorithms,
                         ::testing::Values(Algorithm::nelder_mead, Algorithm::principal_axis),
                         [](const auto& info) {
                           return std::string(info.param == Algorithm::nelder_mead ? "NelderMead" : "PrincipalAxis");
                         });

TEST(Options, ValidationAndParsing) {
  OptimizerOptions o;
  o.x_tol = 0.0;
  EXPECT_THROW(o.validate(), ConfigError);
  EXPECT_EQ(parse_algorithm("praxis"), Algorithm::principal_axis);
  EXPECT_EQ(parse_algorithm("nelder-mead"), Algorithm::nelder_mead);
  EXPECT_THROW(parse_algorithm("bfgs"), ConfigError);
  EXPECT_THROW(minimize(rosenbrock, VectorXd(0)), ConfigError);
}
