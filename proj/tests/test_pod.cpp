#include "tearfilm/pod.hpp"
#include "tearfilm/uniform_oracle.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace tearfilm;

namespace {

const NondimParams nd = derive_nondim(PhysicalParams{});

SolverOptions grid(int m) {
  SolverOptions o;
  o.m = o.n = m;
  return o;
}

EvaporationSpec synthetic_ellipse() { return {0.07, {EllipticPeak{0.0, 0.0, 0.5, 0.5, 0.9, 0.8, 0.5}}}; }

/// Snapshot columns: mean + three zero-mean patterns with random weights.
MatrixXd rank_three_snapshots(int N, int cols) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> Z;
  MatrixXd P(N, 3);
  for (int i = 0; i < N; ++i) {
    const double x = 2.0 * pi * i / N;
    P(i, 0) = std::sin(x);
    P(i, 1) = std::cos(2 * x);
    P(i, 2) = std::sin(3 * x) + 0.5 * std::cos(x);
  }
  MatrixXd C(3, cols);
  for (Index k = 0; k < C.size(); ++k) C.data()[k] = Z(rng);
  return (P * C).colwise() + VectorXd::Constant(N, 2.0);
}

double projection_residual(const FieldBasis& b, const MatrixXd& X) {
  const MatrixXd B = b.trial();
  const MatrixXd D = X.colwise() - b.mean;
  return (D - B * (B.transpose() * D)).squaredNorm();
}

}  // namespace

TEST(PodBasis, IdenticalSnapshotsGiveNoModes) {
  const MatrixXd X = MatrixXd::Constant(50, 6, 1.3);
  const auto b = build_field_basis(X, 1.0 - 1e-6, 60);
  EXPECT_EQ(b.fluctuation_modes(), 0);
  EXPECT_NEAR((b.mean.array() - 1.3).abs().maxCoeff(), 0.0, 1e-15);
}

TEST(PodBasis, KnownRankIsRecovered) {
  const auto b = build_field_basis(rank_three_snapshots(64, 12), 1.0 - 1e-12, 60);
  EXPECT_EQ(b.fluctuation_modes(), 3);
}

TEST(PodBasis, OrthonormalAndSortedModes) {
  const auto b = build_field_basis(rank_three_snapshots(64, 12), 1.0 - 1e-12, 60);
  const MatrixXd B = b.trial();
  EXPECT_LT((B.transpose() * B - MatrixXd::Identity(B.cols(), B.cols())).cwiseAbs().maxCoeff(), 1e-10);
  for (Index i = 1; i < b.singular_values.size(); ++i) EXPECT_LE(b.singular_values[i], b.singular_values[i - 1]);
}

TEST(PodBasis, TruncationErrorBoundAndMonotoneFidelity) {
  const auto snaps = solve_2d(synthetic_ellipse(), nd, {}, std::span<const double>(uniform_times(0.1, 30)), grid(16));
  ASSERT_TRUE(snaps.ok());
  MatrixXd H(256, snaps.states.size());
  for (std::size_t k = 0; k < snaps.states.size(); ++k) H.col(k) = Eigen::Map<const VectorXd>(snaps.states[k].h.data(), 256);
  double prev = std::numeric_limits<double>::infinity();
  for (double energy : {0.95, 0.999, 1.0 - 1e-6, 1.0 - 1e-10}) {
    const auto b = build_field_basis(H, energy, 60);
    EXPECT_GE(b.retained_energy, energy);
    const MatrixXd D = H.colwise() - b.mean;
    const VectorXd e = VectorXd::Constant(256, 1.0 / 16.0);
    const double fluct = (D - e * (e.transpose() * D)).squaredNorm();
    const double res = projection_residual(b, H);
    EXPECT_LE(res, (1.0 - energy) * fluct * (1.0 + 1e-9) + 1e-28);
    EXPECT_LE(res, prev + 1e-28);
    prev = res;
  }
}

TEST(PodBasis, ModeCapIsRecordedAsWarning) {
  std::vector<std::string> warn;
  const auto b = build_field_basis(rank_three_snapshots(64, 12), 1.0 - 1e-12, 2, &warn, "h");
  EXPECT_EQ(b.fluctuation_modes(), 2);
  EXPECT_FALSE(warn.empty());
}

TEST(PodBasis, RequiresTwoSnapshots) {
  EXPECT_THROW(build_basis({uniform_state(4, 4, {})}, RomOptions{}), ConfigError);
  RomOptions bad;
  bad.energy = 0.5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ReducedSolve, SelfConsistentWithFullTrajectory) {
  const auto o = grid(16);
  const auto times = uniform_times(1.0, 11);
  const auto full = solve_2d(synthetic_ellipse(), nd, {}, std::span<const double>(times), o);
  RomOptions ro;
  ro.snapshot_window = 1.0;
  ro.snapshot_count = 60;
  const auto basis = build_basis_for(synthetic_ellipse(), nd, {}, 1.0, ro, o);
  const auto red = solve_reduced(synthetic_ellipse(), nd, {}, std::span<const double>(times), basis, o);
  ASSERT_TRUE(full.ok() && red.ok()) << red.message;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto& a = full.states[k].h;
    const auto& b = red.states[k].h;
    EXPECT_LE((a - b).matrix().norm() / a.matrix().norm(), 1e-3) << "t=" << times[k];
  }
}

TEST(ReducedSolve, ShortWindowBasisReproducesIntensity) {
  const auto o = grid(24);
  const auto times = uniform_times(1.0, 11);
  const auto full = solve_2d(synthetic_ellipse(), nd, {}, std::span<const double>(times), o);
  const auto basis = build_basis_for(synthetic_ellipse(), nd, {}, 1.0, RomOptions{}, o);
  const auto red = solve_reduced(synthetic_ellipse(), nd, {}, std::span<const double>(times), basis, o);
  ASSERT_TRUE(full.ok() && red.ok()) << red.message;
  const double I0 = normalization_coefficient(1.0, nd.phi);
  const auto If = intensity(full.states.back().h, full.states.back().f, I0, nd.phi);
  const auto Ir = intensity(red.states.back().h, red.states.back().f, I0, nd.phi);
  EXPECT_LE((If - Ir).matrix().norm() / If.matrix().norm(), 0.01);
}

TEST(ReducedSolve, MeanOnlyBasisFollowsUniformOracle) {
  const EvaporationSpec flat{0.3, {CircularPeak{0.0, 0.0, 1.0, 1.0, 0.3}}};
  const auto o = grid(8);
  const auto basis = build_basis_for(flat, nd, {}, 1.0, RomOptions{}, o);
  EXPECT_EQ(basis.h.fluctuation_modes() + basis.c.fluctuation_modes() + basis.f.fluctuation_modes(), 0);
  const std::vector<double> times = {0.5, 1.0};
  const auto red = solve_reduced(flat, nd, {}, std::span<const double>(times), basis, o);
  ASSERT_TRUE(red.ok()) << red.message;
  const auto ref = uniform_ode_oracle(0.3, nd.Pc, {}, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_LT((red.states[k].h - ref.samples[k].h).abs().maxCoeff(), 1e-6);
    EXPECT_LT((red.states[k].f - ref.samples[k].f).abs().maxCoeff(), 1e-6);
  }
}

TEST(ReducedSolve, GridMismatchIsRejected) {
  const auto basis = build_basis_for(synthetic_ellipse(), nd, {}, 1.0, RomOptions{}, grid(8));
  const std::vector<double> times = {1.0};
  EXPECT_THROW(solve_reduced(synthetic_ellipse(), nd, {}, std::span<const double>(times), basis, grid(16)), ConfigError);
}

TEST(SpeedupReport, FullOrderModeIsMarked) {
  const auto r = rom_speedup_report(synthetic_ellipse(), nd, {}, 1.0, RomOptions{}, grid(8), false);
  EXPECT_FALSE(r.reduced);
  EXPECT_GT(r.full_seconds, 0.0);
  const auto s = rom_speedup_report(synthetic_ellipse(), nd, {}, 1.0, RomOptions{}, grid(16), true);
  EXPECT_TRUE(s.reduced);
  EXPECT_GT(s.reduced_seconds, 0.0);
  EXPECT_GT(s.modes_h, 0);
}

TEST(BasisFile, RoundTripAndRejection) {
  const auto basis = build_basis_for(synthetic_ellipse(), nd, {}, 1.0, RomOptions{}, grid(8));
  const auto path = (std::filesystem::temp_directory_path() / "tearfilm_basis_test.pod").string();
  save_basis(basis, path);
  const auto back = load_basis(path);
  EXPECT_EQ(back.nx, 8);
  EXPECT_EQ(back.ny, 8);
  EXPECT_EQ(back.snapshot_count, basis.snapshot_count);
  EXPECT_EQ(back.h.modes, basis.h.modes);
  EXPECT_EQ(back.c.mean, basis.c.mean);
  EXPECT_EQ(back.f.singular_values, basis.f.singular_values);
  { std::ofstream(path, std::ios::binary) << "NOTPOD"; }
  EXPECT_THROW(load_basis(path), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_basis(path), IoError);
}
