#include "tearfilm/inverse.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tearfilm;

namespace {

const NondimParams nd = derive_nondim(PhysicalParams{});

EvaporationSpec truth_spec() { return {0.07, {EllipticPeak{0.0, 0.0, 0.5, 0.5, 0.9, 0.8, 0.5}}}; }

SolverOptions grid(int m) {
  SolverOptions o;
  o.m = o.n = m;
  return o;
}

IntensityData synthetic_data(const EvaporationSpec& s, int m, int frames = 6) {
  IntensityData d;
  d.times = uniform_times(1.0, frames);
  const auto r = solve_2d(s, nd, {}, std::span<const double>(d.times), grid(m));
  if (!r.ok()) throw std::runtime_error(r.message);
  d.frames = render_intensity(r, normalization_coefficient(1.0, nd.phi), nd.phi);
  return d;
}

ObjectiveOptions full_objective() {
  ObjectiveOptions o;
  o.mode = ForwardMode::full;
  return o;
}

}  // namespace

TEST(Layout, NamesTagsAndSizes) {
  const ParameterLayout one{ModelKind::ellipse, 1};
  EXPECT_EQ(one.size(), 8);
  EXPECT_EQ(one.names(), (std::vector<std::string>{"v_b", "a1", "fx1", "fy1", "x1", "y1", "e1", "beta1"}));
  const ParameterLayout two{ModelKind::ellipse, 2};
  EXPECT_EQ(two.size(), 15);
  EXPECT_EQ(two.names()[3], "fx1");
  EXPECT_EQ(two.names()[7], "x1");
  for (const auto& tag : {"ellipse", "ellipse-3", "radial", "streak"}) EXPECT_EQ(ParameterLayout::from_tag(tag).tag(), tag);
  EXPECT_THROW(ParameterLayout::from_tag("blob"), ConfigError);
}

TEST(Codec, RoundTripsThroughSpec) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  for (int K : {1, 2, 3}) {
    VectorXd p(7 * K + 1);
    for (Index i = 0; i < p.size(); ++i) p[i] = U(rng);
    EXPECT_EQ(encode(decode_spec(p, K)), p);
  }
  const auto p = encode(truth_spec());
  EXPECT_EQ(p, (VectorXd(8) << 0.07, 0.8, 0.5, 0.5, 0.0, 0.0, 0.9, 0.5).finished());
  EXPECT_THROW(decode_spec(p, 2), ParameterError);
  EXPECT_EQ(encode(decode_radial(encode(RadialEvaporation{0.07, 0.5, 0.8, 0.6}))),
            (VectorXd(4) << 0.07, 0.5, 0.8, 0.6).finished());
  EXPECT_THROW(encode(EvaporationSpec{0.07, {CircularPeak{}}}), ParameterError);
}

TEST(Admissibility, Bounds) {
  auto s = truth_spec();
  EXPECT_TRUE(admissible(s));
  std::get<EllipticPeak>(s.peaks[0]).e = 1.0;
  std::string why;
  EXPECT_FALSE(admissible(s, &why));
  EXPECT_FALSE(why.empty());
  s = truth_spec();
  std::get<EllipticPeak>(s.peaks[0]).beta = -0.1;
  EXPECT_FALSE(admissible(s));
  s = truth_spec();
  s.v_b = -0.01;
  EXPECT_FALSE(admissible(s));
}

TEST(NormRect, CountsGridPointsInside) {
  // nodes -pi + (j+1) 2pi/40 fall inside [-2.6, 2.6] for j = 3..35
  const auto m = NormRect{}.mask(40, 40);
  EXPECT_EQ(m.count(), 33 * 33);
  EXPECT_FALSE(m(2, 20));
  EXPECT_TRUE(m(3, 35));
  EXPECT_THROW((NormRect{0.01, 0.02, 0.01, 0.02}.mask(8, 8)), ConfigError);
}

TEST(RelErr, ZeroDoubledAndHomogeneous) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  std::vector<Array2> ex, th;
  for (int k = 0; k < 3; ++k) {
    Array2 a(16, 16), b(16, 16);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = U(rng), b.data()[i] = U(rng);
    ex.push_back(a);
    th.push_back(b);
  }
  const auto m = NormRect{}.mask(16, 16);
  for (double e : relative_error_trace(ex, ex, m)) EXPECT_EQ(e, 0.0);
  std::vector<Array2> twice;
  for (const auto& a : ex) twice.push_back(2.0 * a);
  for (double e : relative_error_trace(twice, ex, m)) EXPECT_NEAR(e, 1.0, 1e-15);
  std::vector<Array2> th3, ex3;
  for (int k = 0; k < 3; ++k) th3.push_back(3.0 * th[k]), ex3.push_back(3.0 * ex[k]);
  const auto a = relative_error_trace(th, ex, m), b = relative_error_trace(th3, ex3, m);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-14);
  EXPECT_TRUE(std::isnan(relative_error_trace({ex[0]}, {Array2::Zero(16, 16)}, m)[0]));
}

TEST(RelErr, MatchesBruteForceOnSmallGrid) {
  Array2 th(5, 5), ex(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) ex(i, j) = 1.0 + 0.1 * i + 0.01 * j, th(i, j) = ex(i, j) + 0.02 * std::sin(i + 2.0 * j);
  const NormRect rect{-1.5, 2.0, -2.0, 1.5};
  const auto xs = periodic_nodes(5);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (xs[j] >= -1.5 && xs[j] <= 2.0 && xs[i] >= -2.0 && xs[i] <= 1.5) {
        num += std::pow(th(i, j) - ex(i, j), 2);
        den += ex(i, j) * ex(i, j);
      }
  EXPECT_NEAR(relative_error_trace({th}, {ex}, rect.mask(5, 5))[0], std::sqrt(num / den), 1e-12);
}

TEST(Objective, VanishesAtTruthAndIsDeterministic) {
  const auto data = synthetic_data(truth_spec(), 16);
  Objective obj(data, nd, {}, 1, full_objective());
  const VectorXd p = encode(truth_spec());
  const double f0 = obj(p);
  EXPECT_LE(f0, 1e-10);
  EXPECT_EQ(obj(p), f0);
  VectorXd q = p;
  q[1] = 0.9;
  const double f1 = obj(q);
  EXPECT_GT(f1, 1e-6);
  EXPECT_EQ(obj(q), f1);
  EXPECT_EQ(obj.evaluations, 4);
  EXPECT_EQ(obj.penalties, 0);
}

TEST(Objective, ReducedModeIsCloseAtTruth) {
  const auto data = synthetic_data(truth_spec(), 16);
  Objective obj(data, nd, {}, 1, ObjectiveOptions{});
  double scale = 0.0;
  for (const auto& f : data.frames) scale += masked_sq_norm(f, obj.mask());
  EXPECT_LE(obj(encode(truth_spec())), 1e-4 * scale);
  EXPECT_EQ(obj.rebuilds, 1);
}

TEST(Objective, WidePeakAndBadVectorsArePenalized) {
  const auto data = synthetic_data(truth_spec(), 16);
  ObjectiveOptions o = full_objective();
  Objective obj(data, nd, {}, 1, o);
  // focal length 3 e with e = 0.5 makes a Gaussian too wide for the box
  const VectorXd wide = (VectorXd(8) << 0.07, 0.8, 1.5, 0.0, 0.0, 0.0, 0.5, 0.5).finished();
  EXPECT_EQ(obj(wide), o.penalty);
  VectorXd nan = encode(truth_spec());
  nan[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(obj(nan), o.penalty);
  VectorXd e1 = encode(truth_spec());
  e1[6] = 1.0;
  EXPECT_EQ(obj(e1), o.penalty);
  EXPECT_EQ(obj.penalties, 3);
}

TEST(Objective, PenaltyMustExceedComparedPoints) {
  const auto data = synthetic_data(truth_spec(), 8, 3);
  ObjectiveOptions o = full_objective();
  const auto points = double(o.rect.mask(8, 8).count()) * 3.0;
  o.penalty = points;
  EXPECT_THROW(Objective(data, nd, {}, 1, o), ConfigError);
  o.penalty = points + 1.0;
  EXPECT_NO_THROW(Objective(data, nd, {}, 1, o));
}

TEST(Objective, PeakOrderDoesNotMatter) {
  const EvaporationSpec two{0.07,
                            {EllipticPeak{-1.0, 0.0, 0.3, 0.1, 0.6, 0.9, 0.5}, EllipticPeak{1.0, 0.5, 0.2, 0.2, 0.5, 0.6, 0.7}}};
  const EvaporationSpec swapped{0.07, {two.peaks[1], two.peaks[0]}};
  const auto data = synthetic_data(two, 16, 3);
  Objective obj(data, nd, {}, 2, full_objective());
  EXPECT_LE(obj(encode(two)), 1e-10);
  EXPECT_LE(obj(encode(swapped)), 1e-10);
}

TEST(Fit2D, RecoversPerturbedSpotAtCoarseGrid) {
  const auto data = synthetic_data(truth_spec(), 16);
  VectorXd p0 = encode(truth_spec());
  p0[1] = 0.85;  // a
  p0[2] = 0.45;  // fx
  p0[6] = 0.85;  // e
  FitOptions fo;
  fo.objective = full_objective();
  fo.optimizer.max_iterations = 300;
  const auto fr = fit_2d(data, nd, {}, p0, 1, fo);
  EXPECT_LT(fr.objective, 1e-3 * Objective(data, nd, {}, 1, full_objective())(p0));
  ASSERT_EQ(fr.rel_err.size(), data.frames.size());
  EXPECT_LE(fr.rel_err.back(), 1e-3);
  EXPECT_EQ(fr.layout.tag(), "ellipse");
  EXPECT_EQ(fr.model.size(), data.frames.size());
  for (std::size_t k = 1; k < fr.history.size(); ++k) EXPECT_LE(fr.history[k], fr.history[k - 1]);
}

TEST(Fit2D, ReducedSearchHonoursIterationBudget) {
  const auto data = synthetic_data(truth_spec(), 16, 4);
  VectorXd p0 = encode(truth_spec());
  p0[1] = 0.9;
  FitOptions fo;
  fo.optimizer.max_iterations = 6;
  fo.objective.rebuild_every = 2;
  const auto fr = fit_2d(data, nd, {}, p0, 1, fo);
  EXPECT_LE(fr.iterations, 6);
  EXPECT_GE(fr.rom_rebuilds, 1);
  EXPECT_FALSE(fr.converged());
}

TEST(MultiSpot, ArgumentChecks) {
  const auto data = synthetic_data(truth_spec(), 8, 3);
  EXPECT_THROW(fit_multi_spot(data, nd, {}, encode(truth_spec()), 1, {}), ConfigError);
  EXPECT_THROW(fit_multi_spot(data, nd, {}, VectorXd::Zero(8), 2, {}), ConfigError);
}

TEST(RadialFit, CircularSpotGivesSmallLiftedError) {
  const EvaporationSpec spot{0.07, {CircularPeak{0.0, 0.0, 0.5, 0.5, 0.8}}};
  const auto data = synthetic_data(spot, 24);
  OneDimFitOptions o;
  o.solver.radial_cells = 48;
  o.optimizer.max_iterations = 200;
  const VectorXd p0 = (VectorXd(4) << 0.1, 0.6, 0.7, 1.0).finished();
  const auto fr = fit_radial_to_2d(data, nd, {}, p0, 0.0, 0.0, o);
  ASSERT_EQ(fr.rel_err.size(), data.frames.size());
  EXPECT_LE(fr.rel_err.back(), 0.01);
  EXPECT_NEAR(fr.p[1], 0.5, 0.05);
  EXPECT_NEAR(fr.p[2], 0.8, 0.05);
  EXPECT_EQ(fr.layout.tag(), "radial");
  EXPECT_THROW(fit_radial_to_2d(data, nd, {}, p0, 2.9, 0.0, o), ConfigError);
}

TEST(RadialFit, LiftingAConstantProfile) {
  const RadialGrid g(16, pi);
  const Array2 A = lift_radial(VectorXd::Constant(16, 0.4), 0.3, -0.2, g, 12, 12);
  EXPECT_LT((A - 0.4).abs().maxCoeff(), 1e-15);
  EXPECT_LT((radial_average(A, 0.3, -0.2, g).array() - 0.4).abs().maxCoeff(), 1e-12);
}

TEST(StreakFit, RecoversStreakFromTiledLines) {
  const StreakEvaporation truth{0.07, 0.4, 0.8, 0.5};
  IntensityData data;
  data.times = uniform_times(1.0, 6);
  SolverOptions so = grid(32);
  const auto r = solve_streak(truth, nd, {}, std::span<const double>(data.times), so);
  ASSERT_TRUE(r.ok()) << r.message;
  const double I0 = normalization_coefficient(1.0, nd.phi);
  for (const auto& st : r.states) {
    const Array2 line = intensity(st.h, st.f, I0, nd.phi);
    Array2 F(16, 32);
    for (int i = 0; i < 16; ++i) F.row(i) = line.row(0);
    data.frames.push_back(F);
  }
  OneDimFitOptions o;
  o.solver = so;
  o.optimizer.max_iterations = 300;
  const VectorXd p0 = (VectorXd(4) << 0.1, 0.5, 0.7, 0.6).finished();
  const auto fr = fit_streak_to_2d(data, nd, {}, p0, StreakAxis::horizontal, o);
  ASSERT_EQ(fr.rel_err.size(), data.frames.size());
  EXPECT_LE(fr.rel_err.back(), 1e-4);
  EXPECT_NEAR(fr.p[1], 0.4, 1e-3);
  EXPECT_NEAR(fr.p[2], 0.8, 1e-3);
  EXPECT_NEAR(fr.p[0] * fr.p[3], 0.035, 1e-4);
}
