#pragma once

// Video preprocessing: backward-in-time dark-spot stabilization, Gaussian
// smoothing, tanh periodic windowing with a mean-preserving blend,
// normalization and regridding onto the model grid.

#include "tearfilm/evaporation.hpp"
#include "tearfilm/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <string>
#include <vector>

namespace tearfilm {

struct FrameSequence {
  std::vector<Array2> frames;
  double dt = 0.2;  // s
  double t0 = 0.0;  // s
  double f0_estimate = 1.0;

  void validate() const {
    if (frames.empty()) throw ConfigError("frame sequence is empty");
    if (!(dt > 0.0)) throw ConfigError("frame interval dt must be positive");
    for (const auto& f : frames)
      if (f.rows() != frames.front().rows() || f.cols() != frames.front().cols())
        throw ConfigError("all frames must share dimensions");
  }
  double time(std::size_t k) const { return t0 + dt * double(k); }
};

using Pixel = std::array<int, 2>;  // (row, column)

struct AlignmentTrack {
  std::vector<Pixel> centers;  // per frame
  std::vector<Pixel> shifts;   // accepted displacement per frame; (0, 0) for the last
  int ri = 0, rj = 0;
  int search_radius = 5;
};

/// Pixel block of X centred at (ci, cj) with radii (ri, rj); throws when it
/// leaves the frame.
inline Array2 extract_window(const Array2& X, int ci, int cj, int ri, int rj, int frame = -1) {
  if (ci - ri < 0 || cj - rj < 0 || ci + ri >= X.rows() || cj + rj >= X.cols())
    throw AlignmentError("window centred at (" + std::to_string(ci) + ", " + std::to_string(cj) +
                         ") leaves frame " + std::to_string(frame));
  return X.block(ci - ri, cj - rj, 2 * ri + 1, 2 * rj + 1);
}

/// Chain window centres backwards from the last frame. A displacement is kept
/// only if it lowers the mismatch below 0.95 of the unshifted mismatch.
inline AlignmentTrack align_frames(const FrameSequence& seq, Pixel c_n, int ri, int rj, int s = 5) {
  seq.validate();
  if (seq.frames.size() < 2) throw ConfigError("alignment needs at least two frames");
  if (s < 1) throw ConfigError("search radius must be at least 1");
  if (ri < 0 || rj < 0) throw ConfigError("window radii must be non-negative");
  const int n = int(seq.frames.size());
  AlignmentTrack tr;
  tr.ri = ri;
  tr.rj = rj;
  tr.search_radius = s;
  tr.centers.assign(n, Pixel{0, 0});
  tr.shifts.assign(n, Pixel{0, 0});
  tr.centers[n - 1] = c_n;
  Array2 R = extract_window(seq.frames[n - 1], c_n[0], c_n[1], ri, rj, n - 1);
  for (int k = n - 2; k >= 0; --k) {
    const Pixel c = tr.centers[k + 1];
    const Array2& X = seq.frames[k];
    // Every candidate must fit, so check the extreme shifts first.
    extract_window(X, c[0] - s, c[1] - s, ri, rj, k);
    extract_window(X, c[0] + s, c[1] + s, ri, rj, k);
    const double d_stay = (R - extract_window(X, c[0], c[1], ri, rj, k)).matrix().norm();
    double best = d_stay;
    Pixel delta{0, 0};
    for (int di = -s; di <= s; ++di)
      for (int dj = -s; dj <= s; ++dj) {
        const double d = (R - X.block(c[0] + di - ri, c[1] + dj - rj, 2 * ri + 1, 2 * rj + 1)).matrix().norm();
        if (d < best) {
          best = d;
          delta = {di, dj};
        }
      }
    if (!(best < 0.95 * d_stay)) delta = {0, 0};
    tr.shifts[k] = delta;
    tr.centers[k] = {c[0] + delta[0], c[1] + delta[1]};
    R = extract_window(X, tr.centers[k][0], tr.centers[k][1], ri, rj, k);
  }
  return tr;
}

/// Separable Gaussian blur with half-sample reflection at the borders; the
/// kernel is truncated at 4 sigma and renormalized.
inline Array2 gaussian_smooth(const Array2& in, double sigma = 2.0) {
  if (!(sigma > 0.0)) throw ConfigError("Gaussian sigma must be positive");
  const int radius = int(4.0 * sigma + 0.5);
  std::vector<double> w(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += w[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : w) v /= sum;

  auto reflect = [](int i, int n) {
    // ... c b a | a b c ... , repeated for long kernels
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  const Index rows = in.rows(), cols = in.cols();
  Array2 tmp(rows, cols), out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += w[k + radius] * in(r, reflect(int(c) + k, int(cols)));
      tmp(r, c) = acc;
    }
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += w[k + radius] * tmp(reflect(int(r) + k, int(rows)), c);
      out(r, c) = acc;
    }
  return out;
}

struct WindowParams {
  double a = -2.6;
  double b = 2.6;
  double k = 5.0;
};

/// Product of tanh steps: close to 1 inside [a, b]^2 and to 0 near the edges.
inline double window_weight(double x, double y, const WindowParams& w = {}) {
  const double wx = std::tanh(w.k * (x - w.a)) - std::tanh(w.k * (x - w.b));
  const double wy = std::tanh(w.k * (y - w.a)) - std::tanh(w.k * (y - w.b));
  return 0.25 * wx * wy;
}

/// Blend a frame towards its mean near the boundary. Pixel (i, j) of a
/// rows x cols frame sits at (-pi + (j+1) 2pi/cols, -pi + (i+1) 2pi/rows).
inline Array2 periodic_window(const Array2& F, const WindowParams& w = {}) {
  const double mu = F.mean();
  const auto ys = periodic_nodes(int(F.rows()));
  const auto xs = periodic_nodes(int(F.cols()));
  Array2 out(F.rows(), F.cols());
  for (Index i = 0; i < F.rows(); ++i)
    for (Index j = 0; j < F.cols(); ++j) out(i, j) = mu + window_weight(xs[j], ys[i], w) * (F(i, j) - mu);
  return out;
}

namespace detail {

/// Keys cubic convolution weights (a = -0.5) for fractional offset t.
inline std::array<double, 4> cubic_weights(double t) {
  constexpr double a = -0.5;
  auto near = [](double s) { return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0; };
  auto far = [](double s) { return ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a; };
  return {far(1.0 + t), near(t), near(1.0 - t), far(2.0 - t)};
}

/// Sample with linear extrapolation beyond the edges, so affine data stay affine.
inline double ghost_sample(const Array2& A, Index i, Index j) {
  const Index R = A.rows(), C = A.cols();
  auto along_row = [&](Index r) {
    if (C == 1) return A(r, 0);
    if (j < 0) return A(r, 0) + double(j) * (A(r, 1) - A(r, 0));
    if (j >= C) return A(r, C - 1) + double(j - C + 1) * (A(r, C - 1) - A(r, C - 2));
    return A(r, j);
  };
  if (R == 1) return along_row(0);
  if (i < 0) return along_row(0) + double(i) * (along_row(1) - along_row(0));
  if (i >= R) return along_row(R - 1) + double(i - R + 1) * (along_row(R - 1) - along_row(R - 2));
  return along_row(i);
}

}  // namespace detail

/// Bicubic value at fractional pixel coordinates (row u, column v).
inline double bicubic_at(const Array2& A, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const Index i0 = Index(fu), j0 = Index(fv);
  const auto wu = detail::cubic_weights(u - fu), wv = detail::cubic_weights(v - fv);
  double acc = 0.0;
  for (int a = 0; a < 4; ++a) {
    double row = 0.0;
    for (int b = 0; b < 4; ++b) row += wv[b] * detail::ghost_sample(A, i0 - 1 + a, j0 - 1 + b);
    acc += wu[a] * row;
  }
  return acc;
}

/// Resample a frame covering (-pi, pi]^2 onto an ny x nx grid of the same domain.
inline Array2 bicubic_regrid(const Array2& A, int ny, int nx) {
  Array2 out(ny, nx);
  const double sy = double(A.rows()) / ny, sx = double(A.cols()) / nx;
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < nx; ++j) out(i, j) = bicubic_at(A, (i + 1) * sy - 1.0, (j + 1) * sx - 1.0);
  return out;
}

/// Bicubic value of periodic grid data at a physical point (x, y).
inline double periodic_sample(const Array2& A, double x, double y) {
  const double two_pi = 2.0 * pi;
  auto wrap = [&](double s) { return s - two_pi * std::floor((s + pi) / two_pi); };
  const double u = (wrap(y) + pi) * A.rows() / two_pi - 1.0;
  const double v = (wrap(x) + pi) * A.cols() / two_pi - 1.0;
  const double fu = std::floor(u), fv = std::floor(v);
  const auto wu = detail::cubic_weights(u - fu), wv = detail::cubic_weights(v - fv);
  auto idx = [](Index i, Index n) { return ((i % n) + n) % n; };
  double acc = 0.0;
  for (int a = 0; a < 4; ++a) {
    const Index r = idx(Index(fu) - 1 + a, A.rows());
    double row = 0.0;
    for (int b = 0; b < 4; ++b) row += wv[b] * A(r, idx(Index(fv) - 1 + b, A.cols()));
    acc += wu[a] * row;
  }
  return acc;
}

struct ProcessedSequence {
  std::vector<Array2> frames;  // ny x nx on (-pi, pi]^2
  std::vector<double> times;   // s
  WindowParams window;
  double sigma = 2.0;
  double scale = 1.0;  // divisor applied to the raw intensities
  double f0_estimate = 1.0;
};

/// Regrid every frame, then divide by the largest value of the first one.
inline ProcessedSequence normalize_and_regrid(const std::vector<Array2>& frames, int ny = 40, int nx = 40) {
  if (frames.empty()) throw ConfigError("no frames to normalize");
  Grid2D(nx, ny).validate();
  ProcessedSequence out;
  for (const auto& f : frames) out.frames.push_back(bicubic_regrid(f, ny, nx));
  const double M = out.frames.front().maxCoeff();
  if (!(M > 0.0) || !std::isfinite(M)) throw ParameterError("normalization failed: first frame has no positive maximum");
  for (auto& f : out.frames) f /= M;
  out.scale = M;
  return out;
}

struct PreprocessOptions {
  int search_radius = 5;
  double sigma = 2.0;
  WindowParams window;
  int m = 40, n = 40;
};

struct PreprocessResult {
  AlignmentTrack track;
  std::vector<Array2> aligned;  // raw windows after alignment
  ProcessedSequence processed;
};

/// align -> smooth -> window-blend -> normalize -> regrid.
inline PreprocessResult preprocess(const FrameSequence& seq, Pixel center, int ri, int rj,
                                   const PreprocessOptions& opts = {}) {
  PreprocessResult res;
  res.track = align_frames(seq, center, ri, rj, opts.search_radius);
  std::vector<Array2> blended;
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    const auto& c = res.track.centers[k];
    res.aligned.push_back(extract_window(seq.frames[k], c[0], c[1], ri, rj, int(k)));
    blended.push_back(periodic_window(gaussian_smooth(res.aligned.back(), opts.sigma), opts.window));
  }
  res.processed = normalize_and_regrid(blended, opts.n, opts.m);
  for (std::size_t k = 0; k < seq.frames.size(); ++k) res.processed.times.push_back(seq.time(k));
  res.processed.window = opts.window;
  res.processed.sigma = opts.sigma;
  res.processed.f0_estimate = seq.f0_estimate;
  return res;
}

struct InitialGuess {
  EllipticPeak peak;
  double v_b = 0.07;
  bool fallback = false;
  std::string warning;
};

/// Seed an elliptic peak from the darkest tenth of a frame on (-pi, pi]^2:
/// the centroid gives the centre, the second moments give eccentricity and
/// orientation. Amplitude, v_b and beta come from the defaults.
inline InitialGuess initial_guess_from_final_frame(const Array2& frame, const EllipticPeak& defaults = {},
                                                   double v_b = 0.07) {
  InitialGuess g;
  g.peak = defaults;
  g.v_b = v_b;
  const double lo = frame.minCoeff(), hi = frame.maxCoeff();
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) {
    g.fallback = true;
    g.warning = "no dark region found in the final frame; using configured defaults";
    return g;
  }
  std::vector<double> values(frame.data(), frame.data() + frame.size());
  const std::size_t q = std::size_t(0.1 * double(values.size() - 1));
  std::nth_element(values.begin(), values.begin() + q, values.end());
  const double thresh = values[q];

  const auto ys = periodic_nodes(int(frame.rows()));
  const auto xs = periodic_nodes(int(frame.cols()));
  double n = 0.0, mx = 0.0, my = 0.0;
  for (Index i = 0; i < frame.rows(); ++i)
    for (Index j = 0; j < frame.cols(); ++j)
      if (frame(i, j) <= thresh) n += 1.0, mx += xs[j], my += ys[i];
  mx /= n;
  my /= n;
  Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
  for (Index i = 0; i < frame.rows(); ++i)
    for (Index j = 0; j < frame.cols(); ++j)
      if (frame(i, j) <= thresh) {
        const Eigen::Vector2d d(xs[j] - mx, ys[i] - my);
        C += d * d.transpose();
      }
  C /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(C);
  const double l_minor = std::max(es.eigenvalues()[0], 0.0), l_major = std::max(es.eigenvalues()[1], 1e-12);
  Eigen::Vector2d axis = es.eigenvectors().col(1);
  if (axis.x() < 0.0 || (axis.x() == 0.0 && axis.y() < 0.0)) axis = -axis;
  const double e = std::clamp(std::sqrt(std::max(0.0, 1.0 - l_minor / l_major)), 0.05, 0.95);
  const double semi_major = 2.0 * std::sqrt(l_major);
  g.peak.x0 = mx;
  g.peak.y0 = my;
  g.peak.e = e;
  g.peak.fx = e * semi_major * axis.x();
  g.peak.fy = e * semi_major * axis.y();
  return g;
}

}  // namespace tearfilm
