// Command-line front end: simulate | synth | preprocess | fit | report.
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 optimizer did not converge.

#include "tearfilm/config.hpp"
#include "tearfilm/io.hpp"
#include "tearfilm/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <future>
#include <iostream>
#include <random>

namespace {

using namespace tearfilm;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_solver = 3;
constexpr int exit_nonconvergence = 4;

struct Globals {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

std::string numbered(const std::string& stem, std::size_t k, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%03zu", k);
  return stem + buf + ext;
}

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config.empty() ? [] {
    std::istringstream empty;
    return parse_config(empty);
  }()
                                 : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.threads < 1) throw ConfigError("--threads must be at least 1");
  return c;
}

fs::path prepare_out(const Globals& g, const RunConfig& c) {
  const fs::path out(g.out);
  fs::create_directories(out);
  std::ofstream(out / "resolved.ini") << to_ini(c);
  return out;
}

/// Per-frame work spread over up to `threads` workers.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n < 2) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t T = std::min<std::size_t>(threads, n);
  for (std::size_t t = 0; t < T; ++t)
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t k = t; k < n; k += T) f(k);
    }));
  for (auto& j : jobs) j.get();
}

SolveResult run_forward(const RunConfig& c, const NondimParams& nd) {
  const auto times = uniform_times(c.t_end, c.outputs);
  const std::span<const double> ts(times);
  if (c.evaporation.model == "radial") return solve_radial(c.evaporation.radial, nd, c.initial, ts, c.solver);
  if (c.evaporation.model == "streak") return solve_streak(c.evaporation.streak, nd, c.initial, ts, c.solver);
  return solve_2d(c.evaporation.spec, nd, c.initial, ts, c.solver);
}

void write_frames(const fs::path& dir, const std::vector<Array2>& frames, double scale) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < frames.size(); ++k) write_pgm((dir / numbered("frame", k, ".pgm")).string(), frames[k], scale);
}

int cmd_simulate(const Globals& g) {
  const RunConfig c = resolve(g);
  const auto nd = derive_nondim(c.physical);
  const fs::path out = prepare_out(g, c);
  const auto r = run_forward(c, nd);
  nlohmann::json man;
  man["status"] = to_string(r.status);
  man["message"] = r.message;
  man["times"] = r.times;
  man["model"] = c.evaporation.model;
  man["steps"] = {r.stats.steps_stage1, r.stats.steps_stage2};
  man["seconds"] = r.stats.seconds;
  if (!r.ok()) {
    std::ofstream(out / "manifest.json") << man.dump(2) << '\n';
    std::cerr << "solver failure: " << r.message << '\n';
    return exit_solver;
  }
  const double I0 = normalization_coefficient(c.initial.f0, nd.phi);
  const auto I = render_intensity(r, I0, nd.phi);
  fs::create_directories(out / "fields");
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    const auto& s = r.states[k];
    write_csv((out / "fields" / numbered("h", k, ".csv")).string(), s.h);
    write_csv((out / "fields" / numbered("c", k, ".csv")).string(), s.c);
    write_csv((out / "fields" / numbered("f", k, ".csv")).string(), s.f);
    write_csv((out / "fields" / numbered("intensity", k, ".csv")).string(), I[k]);
  }
  write_frames(out / "frames", I, c.image_scale);
  man["image_scale"] = c.image_scale;
  std::ofstream(out / "manifest.json") << man.dump(2) << '\n';
  std::cout << "simulated " << r.times.size() << " outputs in " << r.stats.seconds << " s -> " << out.string() << '\n';
  return exit_ok;
}

int cmd_synth(const Globals& g) {
  const RunConfig c = resolve(g);
  if (c.evaporation.model != "ellipse") throw ConfigError("synth needs an elliptic [evaporation] model");
  const auto nd = derive_nondim(c.physical);
  const fs::path out = prepare_out(g, c);
  const auto times = uniform_times(c.t_end, c.outputs);
  const auto r = solve_2d(c.evaporation.spec, nd, c.initial, std::span<const double>(times), c.solver);
  if (!r.ok()) {
    std::cerr << "solver failure: " << r.message << '\n';
    return exit_solver;
  }
  auto I = render_intensity(r, normalization_coefficient(c.initial.f0, nd.phi), nd.phi);
  if (c.noise_sigma > 0.0) {
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> noise(0.0, c.noise_sigma);
    for (auto& f : I)
      for (Index i = 0; i < f.size(); ++i) f.data()[i] += noise(rng);
  }
  write_frames(out / "frames", I, c.image_scale);

  ProcessedSequence seq;
  seq.frames = I;
  for (double t : times) seq.times.push_back(t * nd.t_scale);
  seq.f0_estimate = c.initial.f0;
  seq.sigma = 0.0;
  save_sequence(seq, out / "sequence");

  std::ofstream meta(out / "frames" / "metadata.ini");
  meta.precision(17);
  const int rows = c.solver.n, cols = c.solver.m, s = c.preprocess.search_radius;
  meta << "[frames]\ndt = " << (times[1] - times[0]) * nd.t_scale << "\nt0 = 0\nf0_estimate = " << c.initial.f0
       << "\ncenter_i = " << rows / 2 << "\ncenter_j = " << cols / 2 << "\nradius_i = " << std::max(1, rows / 2 - s - 1)
       << "\nradius_j = " << std::max(1, cols / 2 - s - 1) << "\n";
  std::cout << "synthesized " << I.size() << " frames -> " << out.string() << '\n';
  return exit_ok;
}

struct FrameMetadata {
  double dt = 0.0, t0 = 0.0, f0 = 1.0;
  int ci = 0, cj = 0, ri = 0, rj = 0;
};

FrameMetadata read_metadata(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("cannot read frame metadata " + path + ": " + e.message());
  }
  const std::vector<std::string> required = {"dt", "center_i", "center_j", "radius_i", "radius_j"};
  std::string missing;
  for (const auto& k : required)
    if (!tree.get_optional<std::string>("frames." + k)) missing += (missing.empty() ? "" : ", ") + k;
  if (!missing.empty()) throw ConfigError("frame metadata " + path + " is missing [frames] keys: " + missing);
  FrameMetadata m;
  m.dt = tree.get<double>("frames.dt");
  m.t0 = tree.get<double>("frames.t0", 0.0);
  m.f0 = tree.get<double>("frames.f0_estimate", 1.0);
  m.ci = tree.get<int>("frames.center_i");
  m.cj = tree.get<int>("frames.center_j");
  m.ri = tree.get<int>("frames.radius_i");
  m.rj = tree.get<int>("frames.radius_j");
  return m;
}

int cmd_preprocess(const Globals& g) {
  const RunConfig c = resolve(g);
  if (c.frames_dir.empty()) throw ConfigError("[preprocess] frames = <directory> is required");
  const std::string meta_path =
      c.metadata.empty() ? (fs::path(c.frames_dir) / "metadata.ini").string() : c.metadata;
  if (!fs::exists(meta_path))
    throw ConfigError("frame metadata not found at " + meta_path +
                      " (required [frames] keys: dt, center_i, center_j, radius_i, radius_j)");
  const auto meta = read_metadata(meta_path);
  const fs::path out = prepare_out(g, c);

  FrameSequence seq;
  seq.dt = meta.dt;
  seq.t0 = meta.t0;
  seq.f0_estimate = meta.f0;
  for (const auto& p : list_frames(c.frames_dir)) seq.frames.push_back(read_pnm(p.string()));
  if (seq.frames.size() < 2) throw ConfigError("preprocessing needs at least two frames");
  seq.validate();

  const auto& po = c.preprocess;
  const auto track = align_frames(seq, {meta.ci, meta.cj}, meta.ri, meta.rj, po.search_radius);
  std::vector<Array2> aligned(seq.frames.size()), blended(seq.frames.size());
  parallel_for(seq.frames.size(), g.threads, [&](std::size_t k) {
    const auto& ck = track.centers[k];
    aligned[k] = extract_window(seq.frames[k], ck[0], ck[1], meta.ri, meta.rj, int(k));
    blended[k] = periodic_window(gaussian_smooth(aligned[k], po.sigma), po.window);
  });
  ProcessedSequence ps = normalize_and_regrid(blended, po.n, po.m);
  for (std::size_t k = 0; k < seq.frames.size(); ++k) ps.times.push_back(seq.time(k));
  ps.window = po.window;
  ps.sigma = po.sigma;
  ps.f0_estimate = seq.f0_estimate;

  save_sequence(ps, out / "sequence");
  write_alignment_csv((out / "alignment.csv").string(), track);
  fs::create_directories(out / "preview");
  for (std::size_t k = 0; k < aligned.size(); ++k) {
    write_pgm((out / "preview" / numbered("before", k, ".pgm")).string(), aligned[k]);
    write_pgm((out / "preview" / numbered("after", k, ".pgm")).string(), ps.frames[k], c.image_scale);
  }
  std::cout << "preprocessed " << seq.frames.size() << " frames -> " << out.string() << '\n';
  return exit_ok;
}

int cmd_fit(const Globals& g) {
  RunConfig c = resolve(g);
  if (c.fit_data.empty()) throw ConfigError("[fit] data = <sequence manifest> is required");
  const auto nd = derive_nondim(c.physical);
  const ProcessedSequence seq = load_sequence(c.fit_data);
  const IntensityData data = to_intensity_data(seq, nd);
  InitialConditions ic = c.initial;
  c.solver.m = data.nx();
  c.solver.n = data.ny();

  std::vector<std::string> warnings;
  if (c.guess_from_final_frame) {
    if (c.fit_mode != FitMode::ellipse) throw ConfigError("from_final_frame seeds only the 2d fit");
    const auto& d = std::get<EllipticPeak>(c.guess.spec.peaks.front());
    const auto guess = initial_guess_from_final_frame(data.frames.back(), d, c.guess.spec.v_b);
    if (guess.fallback) warnings.push_back(guess.warning);
    c.guess.spec = {guess.v_b, {guess.peak}};
    c.guess_from_final_frame = false;  // the echo records the seeded values
  }
  const fs::path out = prepare_out(g, c);

  FitResult fr;
  if (c.fit_mode == FitMode::ellipse || c.fit_mode == FitMode::multi) {
    if (c.guess.model != "ellipse") throw ConfigError("2d and multi fits need [guess] model = ellipse");
    const int K = int(c.guess.spec.peaks.size());
    if (c.fit_mode == FitMode::ellipse && K != 1) throw ConfigError("2d mode fits a single peak; use mode = multi");
    FitOptions fo;
    fo.optimizer = c.optimizer;
    fo.objective = c.objective;
    fo.objective.solver = c.solver;
    fo.full_order_polish = c.full_order_polish;
    const VectorXd p0 = encode(c.guess.spec);
    fr = c.fit_mode == FitMode::multi ? fit_multi_spot(data, nd, ic, p0, K, fo, true)
                                      : fit_2d(data, nd, ic, p0, 1, fo);
  } else {
    OneDimFitOptions o;
    o.optimizer = c.optimizer;
    o.solver = c.solver;
    o.rect = c.objective.rect;
    o.penalty = c.optimizer.penalty;
    if (c.fit_mode == FitMode::radial) {
      if (c.guess.model != "radial") throw ConfigError("radial fits need [guess] model = radial");
      double xc = c.center_x, yc = c.center_y;
      if (c.center_from_data) {
        const auto guess = initial_guess_from_final_frame(data.frames.back());
        xc = guess.peak.x0;
        yc = guess.peak.y0;
      }
      fr = fit_radial_to_2d(data, nd, ic, encode(c.guess.radial), xc, yc, o);
    } else {
      if (c.guess.model != "streak") throw ConfigError("streak fits need [guess] model = streak");
      fr = fit_streak_to_2d(data, nd, ic, encode(c.guess.streak), c.streak_axis, o);
    }
  }

  auto j = to_json(fr, c.fit_case);
  j["warnings"] = warnings;
  std::ofstream(out / "fit.json") << j.dump(2) << '\n';
  write_rel_err_csv((out / "relerr.csv").string(), fr);
  if (!fr.model.empty()) {
    fs::create_directories(out / "compare");
    const std::size_t n = fr.model.size();
    for (std::size_t k : {std::size_t(0), n / 2, n - 1}) {
      write_pgm((out / "compare" / numbered("model", k, ".pgm")).string(), fr.model[k], c.image_scale);
      write_pgm((out / "compare" / numbered("data", k, ".pgm")).string(), data.frames[k], c.image_scale);
    }
  }
  std::cout << "fit " << fr.status << " after " << fr.iterations << " iterations, objective " << fr.objective;
  if (!fr.rel_err.empty()) std::cout << ", final RelErr " << fr.rel_err.back();
  std::cout << " -> " << out.string() << '\n';
  if (fr.model.empty()) {
    std::cerr << "the optimized parameters could not be solved to the final time\n";
    return exit_solver;
  }
  return fr.converged() ? exit_ok : exit_nonconvergence;
}

int cmd_report(const Globals& g, const std::vector<std::string>& inputs) {
  const fs::path out(g.out);
  fs::create_directories(out);
  const auto table = build_report(inputs);
  std::ofstream(out / "report.csv") << report_csv(table);
  std::cout << report_text(table);
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tear-film thinning simulation and evaporation fitting"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides [run] seed)");
  app.add_option("--threads", g.threads, "worker threads for per-frame work")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "forward solve; writes field CSVs and intensity frames");
  auto* synth = app.add_subcommand("synth", "synthetic frame sequence from a known evaporation spec");
  auto* pre = app.add_subcommand("preprocess", "align, smooth, window, normalize and regrid a frame directory");
  auto* fit = app.add_subcommand("fit", "fit evaporation parameters to a processed sequence");
  auto* report = app.add_subcommand("report", "summarize fit reports");
  std::vector<std::string> inputs;
  report->add_option("reports", inputs, "fit.json files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*simulate) return cmd_simulate(g);
    if (*synth) return cmd_synth(g);
    if (*pre) return cmd_preprocess(g);
    if (*fit) return cmd_fit(g);
    if (*report) return cmd_report(g, inputs);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const AlignmentError& e) {
    std::cerr << "alignment error: " << e.what() << '\n';
    return exit_config;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return exit_config;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_solver;
  }
  return exit_ok;
}
