#include "tearfilm/model.hpp"

#include <gtest/gtest.h>

using namespace tearfilm;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Nondim, ReproducesTabulatedGroups) {
  const auto nd = derive_nondim(PhysicalParams{});
  EXPECT_LT(rel(nd.eps, 8.3e-3), 0.01);
  EXPECT_LT(rel(nd.Pc, 0.392), 0.01);
  EXPECT_LT(rel(nd.Pe_f, 27.7), 0.01);
  EXPECT_LT(rel(nd.Pe_c, 6.76), 0.01);
  EXPECT_LT(rel(nd.phi, 0.417), 0.01);
}

TEST(Nondim, LengthScaleAndAspectRatio) {
  PhysicalParams p;
  const auto nd = derive_nondim(p);
  EXPECT_NEAR(nd.ell, std::pow(p.sigma0 / p.mu / p.v_max, 0.25) * p.d, 1e-18);
  EXPECT_NEAR(nd.eps, std::pow(p.mu * p.v_max / p.sigma0, 0.25), 1e-15);
  EXPECT_NEAR(nd.t_scale, 27.0, 1e-9);
  EXPECT_NEAR(nd.v_b, 0.07, 1e-15);
}

TEST(Nondim, PcHalvesWhenPeakRateDoubles) {
  PhysicalParams p;
  const double pc = derive_nondim(p).Pc;
  p.v_max *= 2.0;
  p.v_min *= 2.0;
  EXPECT_DOUBLE_EQ(derive_nondim(p).Pc, 0.5 * pc);
}

TEST(Nondim, RejectsNonPositiveInput) {
  PhysicalParams p;
  p.mu = 0.0;
  EXPECT_THROW(derive_nondim(p), ParameterError);
  p = {};
  p.v_min = 2.0 * p.v_max;
  EXPECT_THROW(derive_nondim(p), ParameterError);
}

TEST(Nondim, TimeConversion) {
  const auto nd = derive_nondim(PhysicalParams{});
  EXPECT_EQ(nondim_time(0.0, nd), 0.0);
  EXPECT_NEAR(nondim_time(27.0, nd), 1.0, 1e-12);
  EXPECT_NEAR(nondim_time(13.5, nd), 0.5, 1e-12);
  EXPECT_THROW(nondim_time(-1.0, nd), ParameterError);
}

TEST(Intensity, PointValues) {
  EXPECT_EQ(intensity(1.0, 0.0, 3.0, 0.417), 0.0);
  EXPECT_EQ(intensity(0.0, 1.0, 3.0, 0.417), 0.0);
  EXPECT_NEAR(intensity(1.0, 1.0, 1.0, 0.417), 0.1704895400, 1e-9);
}

TEST(Intensity, NormalizationGivesUnitInitialIntensity) {
  const double phi = 0.417;
  EXPECT_NEAR(normalization_coefficient(1.0, phi), 2.0 / (1.0 - std::exp(-phi)), 1e-12);
  EXPECT_NEAR(normalization_coefficient(1.0, phi), 5.8654624784, 1e-9);
  for (double f0 = 0.05; f0 <= 4.0; f0 += 0.05)
    EXPECT_NEAR(intensity(1.0, f0, normalization_coefficient(f0, phi), phi), 1.0, 1e-14) << "f0=" << f0;
  EXPECT_THROW(normalization_coefficient(0.0, phi), ParameterError);
  EXPECT_THROW(normalization_coefficient(1.0, 1e-13), ParameterError);
}

TEST(Intensity, MonotoneInThicknessAndSelfQuenching) {
  const double phi = 0.417;
  for (double h = 0.01; h < 2.0; h += 0.01) EXPECT_LT(intensity(h, 1.0, 1.0, phi), intensity(h + 0.01, 1.0, 1.0, phi));
  // interior maximum in f: rises, then falls
  int argmax = 0;
  double best = -1.0;
  for (int k = 1; k <= 1000; ++k) {
    const double v = intensity(1.0, 0.01 * k, 1.0, phi);
    if (v > best) best = v, argmax = k;
  }
  EXPECT_GT(argmax, 1);
  EXPECT_LT(argmax, 1000);
}

TEST(Intensity, ArrayFormMatchesScalar) {
  Array2 h(2, 3), f(2, 3);
  h << 1.0, 0.5, 0.1, 2.0, 0.0, 1.3;
  f << 1.0, 2.0, 0.3, 0.0, 1.0, 4.0;
  const auto I = intensity(h, f, 2.5, 0.417);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(I(i, j), intensity(h(i, j), f(i, j), 2.5, 0.417));
}

TEST(Grid, NodesExcludeMinusPiIncludePi) {
  const Grid2D g(40, 40);
  EXPECT_NEAR(g.x(0), -pi + 2.0 * pi / 40, 1e-15);
  EXPECT_NEAR(g.x(39), pi, 1e-14);
  EXPECT_NEAR(g.dx(), 2.0 * pi / 40, 1e-15);
  const auto n = periodic_nodes(8);
  EXPECT_NEAR(n.back(), pi, 1e-15);
  EXPECT_GT(n.front(), -pi);
}

TEST(Grid, OddCountsRejected) {
  EXPECT_THROW(Grid2D(39, 40), ConfigError);
  EXPECT_THROW(Grid2D(40, 0), ConfigError);
}

TEST(State, UniformInitialState) {
  const auto s = uniform_state(4, 6, InitialConditions{0.7});
  EXPECT_EQ(s.h.rows(), 4);
  EXPECT_EQ(s.h.cols(), 6);
  EXPECT_EQ(s.c.minCoeff(), 1.0);
  EXPECT_EQ(s.f.maxCoeff(), 0.7);
  EXPECT_THROW(InitialConditions{0.0}.validate(), ParameterError);
}
