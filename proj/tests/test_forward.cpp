#include "checks.hpp"

#include "tearfilm/forward.hpp"
#include "tearfilm/spectral.hpp"
#include "tearfilm/uniform_oracle.hpp"

#include <gtest/gtest.h>

using namespace tearfilm;

namespace {

const NondimParams nd = derive_nondim(PhysicalParams{});

SolverOptions grid(int m, int n = -1) {
  SolverOptions o;
  o.m = m;
  o.n = n < 0 ? m : n;
  return o;
}

EvaporationSpec flat(double J) { return {J, {CircularPeak{0.0, 0.0, 1.0, 1.0, J}}}; }

EvaporationSpec synthetic_ellipse() { return {0.07, {EllipticPeak{0.0, 0.0, 0.5, 0.5, 0.9, 0.8, 0.5}}}; }

/// Index of the node at -x on the periodic (-pi, pi] grid.
int mirror(int j, int m) { return ((m - 2 - j) % m + m) % m; }

double interp(const Array2& row, const RadialGrid& g, double r) {
  const double u = std::clamp(r / g.dr() - 0.5, 0.0, double(g.cells() - 1));
  const int k = std::min(int(u), g.cells() - 2);
  const double w = u - k;
  return (1.0 - w) * row(0, k) + w * row(0, k + 1);
}

}  // namespace

TEST(Spectral, DerivativesOfTrigProduct) {
  const int m = 40;
  const Grid2D g(m, m);
  SpectralOperators2D ops(m, m);
  Array2 u(m, m), ux(m, m), uy(m, m), lap(m, m), want_x(m, m), want_y(m, m), want_lap(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double x = g.x(j), y = g.y(i);
      u(i, j) = std::sin(3 * x) * std::cos(2 * y);
      want_x(i, j) = 3 * std::cos(3 * x) * std::cos(2 * y);
      want_y(i, j) = -2 * std::sin(3 * x) * std::sin(2 * y);
      want_lap(i, j) = -13 * u(i, j);
    }
  ops.dx(u.data(), ux.data());
  ops.dy(u.data(), uy.data());
  ops.laplacian(u.data(), lap.data());
  EXPECT_LT((ux - want_x).abs().maxCoeff(), 1e-10);
  EXPECT_LT((uy - want_y).abs().maxCoeff(), 1e-10);
  EXPECT_LT((lap - want_lap).abs().maxCoeff(), 1e-10);
}

TEST(Spectral, OneDimSineDerivatives) {
  const int n = 32;
  const auto x = periodic_nodes(n);
  SpectralOperators1D ops(n);
  for (int k = 1; k < n / 2; ++k) {
    VectorXd u(n), du(n);
    for (int j = 0; j < n; ++j) u[j] = std::sin(k * x[j]);
    ops.dx(u.data(), du.data());
    for (int j = 0; j < n; ++j) EXPECT_NEAR(du[j], k * std::cos(k * x[j]), 1e-10 * k);
  }
}

TEST(Oracle, ClosedFormsWithoutOsmosis) {
  const std::vector<double> t = {0.25, 0.5, 1.0};
  const auto still = uniform_ode_oracle(0.0, 0.0, InitialConditions{1.0}, t);
  for (const auto& s : still.samples) EXPECT_EQ(s.h, 1.0);
  const auto thin = uniform_ode_oracle(0.1, 0.0, InitialConditions{0.8}, t);
  for (const auto& s : thin.samples) {
    EXPECT_NEAR(s.h, 1.0 - 0.1 * s.t, 1e-10);
    EXPECT_NEAR(s.h * s.c, 1.0, 1e-9);
    EXPECT_NEAR(s.h * s.f, 0.8, 1e-9);
  }
}

TEST(Oracle, OsmosisThinningConservesSolute) {
  const std::vector<double> t = {0.1, 0.2, 0.5, 1.0};
  const auto r = uniform_ode_oracle(0.5, nd.Pc, InitialConditions{1.0}, t);
  double h_prev = 1.0, c_prev = 1.0;
  for (const auto& s : r.samples) {
    EXPECT_LT(s.h, h_prev);
    EXPECT_GT(s.c, c_prev);
    EXPECT_NEAR(s.h * s.c, 1.0, 1e-8);
    h_prev = s.h;
    c_prev = s.c;
  }
}

TEST(Oracle, ReportsTouchdown) {
  const std::vector<double> t = {0.5, 1.0, 2.0};
  const auto r = uniform_ode_oracle(1.5, 0.0, InitialConditions{1.0}, t);
  ASSERT_TRUE(r.touchdown.has_value());
  EXPECT_NEAR(*r.touchdown, 1.0 / 1.5, 1e-3);
}

TEST(Solve2D, EquilibriumStaysConstant) {
  NondimParams still = nd;
  still.Pc = 0.0;
  const auto r = solve_2d(flat(0.0), still, InitialConditions{1.0}, 1.0, grid(8));
  ASSERT_TRUE(r.ok()) << r.message;
  for (const auto& s : r.states) {
    EXPECT_LT((s.h - 1.0).abs().maxCoeff(), 1e-8);
    EXPECT_LT((s.c - 1.0).abs().maxCoeff(), 1e-8);
    EXPECT_LT((s.f - 1.0).abs().maxCoeff(), 1e-8);
  }
}

TEST(Solve2D, UniformEvaporationWithoutOsmosis) {
  NondimParams p = nd;
  p.Pc = 0.0;
  const auto r = solve_2d(flat(0.1), p, InitialConditions{1.0}, 1.0, grid(8));
  ASSERT_TRUE(r.ok()) << r.message;
  const auto& s = r.states.back();
  EXPECT_LT((s.h - 0.9).abs().maxCoeff(), 1e-6);
  EXPECT_LT((s.h * s.c - 1.0).abs().maxCoeff(), 1e-6);
}

TEST(Solve2D, UniformEvaporationMatchesOracle) {
  const auto a = checks::uniform_agreement(0.3, nd, InitialConditions{1.0}, grid(8));
  ASSERT_TRUE(a.solved);
  EXPECT_LT(a.h, 1e-6);
  EXPECT_LT(a.c, 1e-6);
  EXPECT_LT(a.f, 1e-6);
}

TEST(Solve2D, SyntheticPeakThinsAndConservesFluorescein) {
  const auto r = solve_2d(synthetic_ellipse(), nd, InitialConditions{1.0}, 1.0, grid(40));
  ASSERT_TRUE(r.ok()) << r.message;
  for (std::size_t k = 1; k < r.states.size(); ++k)
    EXPECT_LT(r.states[k].h.minCoeff(), r.states[k - 1].h.minCoeff()) << "t=" << r.times[k];
  const double f0 = (r.states.front().h * r.states.front().f).sum();
  EXPECT_LT(std::abs((r.states.back().h * r.states.back().f).sum() - f0) / f0, 1e-6);
}

TEST(Solve2D, SoluteConservationAndWaterBalance) {
  const auto rep = checks::balance_check(synthetic_ellipse(), nd, InitialConditions{1.0}, grid(24));
  ASSERT_TRUE(rep.solved) << rep.message;
  EXPECT_LT(rep.hc_drift, 1e-6);
  EXPECT_LT(rep.hf_drift, 1e-6);
  EXPECT_LT(rep.water_residual, 1e-4);
}

TEST(Solve2D, EvenEvaporationGivesEvenFields) {
  const EvaporationSpec s{0.07, {EllipticPeak{0.0, 0.0, 0.5, 0.0, 0.8, 0.8, 0.5}}};
  const int m = 20;
  const auto r = solve_2d(s, nd, InitialConditions{1.0}, 1.0, grid(m));
  ASSERT_TRUE(r.ok()) << r.message;
  double worst = 0.0;
  for (const auto& st : r.states)
    for (const Array2* F : {&st.h, &st.c, &st.f})
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          worst = std::max(worst, std::abs((*F)(i, j) - (*F)(i, mirror(j, m))));
          worst = std::max(worst, std::abs((*F)(i, j) - (*F)(mirror(i, m), j)));
        }
  EXPECT_LT(worst, 1e-8);
}

TEST(Solve2D, SpectralConvergenceUnderRefinement) {
  const auto coarse = solve_2d(synthetic_ellipse(), nd, InitialConditions{1.0}, 1.0, grid(32), 2);
  const auto fine = solve_2d(synthetic_ellipse(), nd, InitialConditions{1.0}, 1.0, grid(64), 2);
  ASSERT_TRUE(coarse.ok() && fine.ok());
  double worst = 0.0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      worst = std::max(worst, std::abs(coarse.states.back().h(i, j) - fine.states.back().h(2 * i + 1, 2 * j + 1)));
  EXPECT_LE(worst, 1e-4);
}

TEST(Solve2D, TouchdownIsReportedAsFailure) {
  // Without osmosis nothing arrests thinning; with it h settles near Pc / (J + Pc).
  NondimParams dry = nd;
  dry.Pc = 0.0;
  const EvaporationSpec s{0.07, {CircularPeak{0.0, 0.0, 1.0, 1.0, 2.0}}};
  const auto r = solve_2d(s, dry, InitialConditions{1.0}, 1.0, grid(16));
  EXPECT_FALSE(r.ok());
  EXPECT_FALSE(r.message.empty());
}

TEST(Solve2D, RejectsBadTimesAndOptions) {
  const std::vector<double> bad = {0.5, 0.2};
  EXPECT_THROW(solve_2d(flat(0.1), nd, {}, std::span<const double>(bad), grid(8)), ConfigError);
  SolverOptions o = grid(8);
  o.rel_tol = 0.5;
  EXPECT_THROW(solve_2d(flat(0.1), nd, {}, 1.0, o), ConfigError);
}

TEST(Streak, FlatEvaporationMatchesOracle) {
  const auto r = solve_streak(StreakEvaporation{0.2, 1.0, 0.2, 1.0}, nd, InitialConditions{1.0}, 1.0, grid(16));
  ASSERT_TRUE(r.ok()) << r.message;
  const std::vector<double> t(r.times.begin(), r.times.end());
  const auto ref = uniform_ode_oracle(0.2, nd.Pc, InitialConditions{1.0}, t);
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_LT((r.states[k].h - ref.samples[k].h).abs().maxCoeff(), 1e-6);
    EXPECT_LT((r.states[k].c - ref.samples[k].c).abs().maxCoeff(), 1e-6);
    EXPECT_LT((r.states[k].f - ref.samples[k].f).abs().maxCoeff(), 1e-6);
  }
}

TEST(Streak, MatchesYUniformTwoDimensionalSolve) {
  const int m = 32;
  const double v_b = 0.07, xw = 0.5, a = 0.8;
  const auto s1 = solve_streak(StreakEvaporation{v_b, xw, a, 1.0}, nd, InitialConditions{1.0}, 1.0, grid(m));
  const auto s2 = solve_2d(EvaporationSpec{v_b, {CircularPeak{0.0, 0.0, xw, 1e3, a}}}, nd, InitialConditions{1.0}, 1.0,
                           grid(m, 8));
  ASSERT_TRUE(s1.ok() && s2.ok());
  const Array2 slice = s2.states.back().h.row(3);
  EXPECT_LE(((slice - s1.states.back().h) / s1.states.back().h).abs().maxCoeff(), 0.01);
}

TEST(Streak, NarrowPeakGivesSymmetricSolution) {
  const int m = 32;
  const StreakEvaporation s{0.07, 0.4, 0.8, 0.5};
  ASSERT_LT(periodicity_defect(s), 1e-10);
  const auto r = solve_streak(s, nd, InitialConditions{1.0}, 1.0, grid(m));
  ASSERT_TRUE(r.ok()) << r.message;
  double worst = 0.0;
  for (const auto& st : r.states)
    for (int j = 0; j < m; ++j) worst = std::max(worst, std::abs(st.h(0, j) - st.h(0, mirror(j, m))));
  EXPECT_LT(worst, 1e-8);
}

TEST(Radial, FlatEvaporationMatchesOracle) {
  const auto r = solve_radial(RadialEvaporation{0.2, 1.0, 0.2, 1.0}, nd, InitialConditions{1.0}, 1.0, grid(8));
  ASSERT_TRUE(r.ok()) << r.message;
  const std::vector<double> t(r.times.begin(), r.times.end());
  const auto ref = uniform_ode_oracle(0.2, nd.Pc, InitialConditions{1.0}, t);
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_LT((r.states[k].h - ref.samples[k].h).abs().maxCoeff(), 1e-6);
    EXPECT_LT((r.states[k].c - ref.samples[k].c).abs().maxCoeff(), 1e-6);
    EXPECT_LT((r.states[k].f - ref.samples[k].f).abs().maxCoeff(), 1e-6);
  }
}

TEST(Radial, MinimumStaysAtCentre) {
  const auto r = solve_radial(RadialEvaporation{0.07, 0.6, 0.8, 1.0}, nd, InitialConditions{1.0}, 1.0, grid(8));
  ASSERT_TRUE(r.ok()) << r.message;
  for (std::size_t k = 1; k < r.states.size(); ++k) {
    Index at;
    r.states[k].h.row(0).minCoeff(&at);
    EXPECT_EQ(at, 0) << "t=" << r.times[k];
  }
}

TEST(Radial, MatchesCircularTwoDimensionalSolve) {
  const double v_b = 0.07, w = 0.5, a = 0.8;
  SolverOptions o = grid(40);
  const auto rad = solve_radial(RadialEvaporation{v_b, w, a, 1.0}, nd, InitialConditions{1.0}, 1.0, o);
  const auto two = solve_2d(EvaporationSpec{v_b, {CircularPeak{0.0, 0.0, w, w, a}}}, nd, InitialConditions{1.0}, 1.0, o);
  ASSERT_TRUE(rad.ok() && two.ok());
  const RadialGrid g(o.radial_cells, o.radial_R0);
  const Grid2D G(40, 40);
  const int row = 19;  // y = 0
  ASSERT_NEAR(G.y(row), 0.0, 1e-14);
  double worst = 0.0;
  for (int j = 0; j < 40; ++j) {
    const double r = std::abs(G.x(j));
    const double h2 = two.states.back().h(row, j);
    worst = std::max(worst, std::abs(interp(rad.states.back().h, g, r) - h2) / h2);
  }
  EXPECT_LE(worst, 0.01);
}

TEST(Times, UniformTimesIncludeEnds) {
  const auto t = uniform_times(2.0, 5);
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_EQ(t.back(), 2.0);
  EXPECT_DOUBLE_EQ(t[1], 0.5);
}
