// Command-line front end: phantom generation, registration (groupwise llr /
// glr / variance and sequential pairwise), strain curves, evaluation against
// ground truth, and contour tracking.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cinestrain/cinestrain.hpp"

namespace fs = std::filesystem;
using namespace cinestrain;

namespace {

struct PhantomArgs {
  std::string out_dir;
  std::string mode = "incompressible";
  int size = 64;
  int frames = 24;
  double amplitude = 0.2;
  double r_inner = 10.0;
  double r_outer = 18.0;
  double noise = 0.01;
  double spacing = 1.5;
  std::uint64_t seed = 42;
};

int run_phantom(const PhantomArgs& a) {
  PhantomSpec spec;
  spec.size = a.size;
  spec.frames = a.frames;
  spec.amplitude = a.amplitude;
  spec.r_inner = a.r_inner;
  spec.r_outer = a.r_outer;
  spec.noise_sigma = a.noise;
  spec.pixel_spacing = a.spacing;
  spec.seed = a.seed;
  if (a.mode == "scale")
    spec.mode = PhantomMode::scale;
  else if (a.mode == "incompressible")
    spec.mode = PhantomMode::incompressible;
  else
    throw DataError("phantom: unknown mode '" + a.mode + "' (scale|incompressible)");

  auto [seq, motion] = generate_phantom(spec);
  fs::create_directories(a.out_dir);
  io::write_cseq(fs::path(a.out_dir) / "cine.cseq", seq);
  io::write_dsp1(fs::path(a.out_dir) / "truth.dsp1", motion.trajectory);
  io::write_msk1(fs::path(a.out_dir) / "myo.msk1", motion.mask);

  io::StrainCurves truth;
  for (int t = 1; t <= spec.frames; ++t) {
    truth.grs.push_back(100.0 * analytic_global_strain(motion, motion.mask, t,
                                                       StrainDirection::radial));
    truth.gcs.push_back(100.0 * analytic_global_strain(motion, motion.mask, t,
                                                       StrainDirection::circumferential));
  }
  io::write_strain_csv(fs::path(a.out_dir) / "truth_strain.csv", truth);
  std::cerr << "phantom: wrote " << a.out_dir << " (" << spec.size << "x" << spec.size << "x"
            << spec.frames << ", mode " << a.mode << ")\n";
  return 0;
}

struct RegisterArgs {
  std::string input;
  std::string out_dir;
  std::string metric = "llr";
  int levels = 3;
  int patch_lowest = 5;
  int spacing_lowest = 3;
  double delta = 6.0;
  double lambda = 6e-4;
  double mu = 0.06;
  double tol = 1e-5;
  int max_iters = 500;
  double step = 1.0;
  std::uint64_t seed = 42;
  bool deterministic = false;
};

SolverConfig to_config(const RegisterArgs& a) {
  SolverConfig cfg;
  cfg.levels = a.levels;
  cfg.patch_finest = a.patch_lowest << (a.levels - 1);
  cfg.spacing_finest = a.spacing_lowest << (a.levels - 1);
  cfg.delta = a.delta;
  cfg.lambda = a.lambda;
  cfg.mu = a.mu;
  cfg.tolerance = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.step_init = a.step;
  cfg.seed = a.seed;
  cfg.deterministic = a.deterministic;
  return cfg;
}

int run_register(const RegisterArgs& a) {
  const CineSequence seq = io::read_cseq(a.input);
  fs::create_directories(a.out_dir);
  SolverConfig cfg = to_config(a);

  if (a.metric == "pairwise") {
    const PairwiseResult res = register_pairwise(seq, cfg);
    io::write_dsp1(fs::path(a.out_dir) / "traj.dsp1", res.trajectory);
    for (std::size_t k = 0; k < res.steps.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_t%03zu.dsp1", k + 2);
      io::write_dsp1(fs::path(a.out_dir) / name, res.steps[k]);
    }
    io::write_trace_csv(fs::path(a.out_dir) / "trace.csv", res.trace);
    std::cerr << "register: pairwise chain over " << seq.nt << " frames in " << res.trace.wall_seconds
              << " s\n";
    return 0;
  }

  cfg.metric = parse_metric(a.metric);
  const GroupwiseResult res = register_groupwise(seq, cfg);
  auto [traj, rep] = compose_to_first_frame(res.displacement);
  if (!rep.converged)
    std::cerr << "register: warning: frame-1 inversion residual " << rep.max_residual << " px\n";
  io::write_dsp1(fs::path(a.out_dir) / "traj.dsp1", traj);
  io::write_dsp1(fs::path(a.out_dir) / "disp.dsp1", res.displacement);
  io::write_trace_csv(fs::path(a.out_dir) / "trace.csv", res.trace);

  // per-level summary from the trace
  int level = -1;
  double first = 0.0, last = 0.0;
  int iters = 0;
  std::size_t term = 0;
  auto flush_level = [&] {
    if (level < 0) return;
    std::cerr << "register: level " << level << ": " << iters << " iterations, cost " << first
              << " -> " << last;
    if (term < res.trace.termination.size())
      std::cerr << " (" << res.trace.termination[term++] << ")";
    std::cerr << "\n";
  };
  for (const TraceRecord& r : res.trace.records) {
    if (r.level != level) {
      flush_level();
      level = r.level;
      first = r.cost;
    }
    last = r.cost;
    iters = r.iter;
  }
  flush_level();
  std::cerr << "register: metric " << a.metric << ", " << res.trace.wall_seconds << " s\n";
  return 0;
}

struct StrainArgs {
  std::string cine;
  std::string disp;
  std::string mask;
  std::string out;
  std::string maps;
  int segments = 0;
  double ref_angle = 0.0;
  int erode = 2;
};

int run_strain(const StrainArgs& a) {
  const CineSequence seq = io::read_cseq(a.cine);
  const TrajectoryField traj = io::read_dsp1_trajectory(a.disp);
  if (!traj.same_grid(seq.nx, seq.ny, seq.nt))
    throw DataError("strain: trajectory grid does not match the cine sequence");
  const MyoMask mask = io::read_msk1(a.mask);
  if (mask.nx != seq.nx || mask.ny != seq.ny)
    throw DataError("strain: mask grid does not match the cine sequence");

  const StrainTensorField e = green_lagrange(traj);
  const DirectionField dirs = direction_field(mask);
  const std::vector<double> rr = directional_strain(e, dirs, StrainDirection::radial);
  const std::vector<double> cc = directional_strain(e, dirs, StrainDirection::circumferential);
  const MyoMask stats_mask = mask.eroded(a.erode);
  if (stats_mask.count() == 0)
    throw DataError("strain: eroded mask is empty; lower --erode");

  io::StrainCurves curves;
  const auto grs = global_strain(rr, seq.nx, seq.ny, seq.nt, stats_mask);
  const auto gcs = global_strain(cc, seq.nx, seq.ny, seq.nt, stats_mask);
  for (double v : grs) curves.grs.push_back(100.0 * v);
  for (double v : gcs) curves.gcs.push_back(100.0 * v);
  if (a.segments > 0) {
    auto to_percent = [](std::vector<std::vector<double>> seg) {
      for (auto& s : seg)
        for (double& v : s) v *= 100.0;
      return seg;
    };
    curves.seg_radial = to_percent(
        segmental_strain(rr, seq.nx, seq.ny, seq.nt, stats_mask, a.segments, a.ref_angle));
    curves.seg_circ = to_percent(
        segmental_strain(cc, seq.nx, seq.ny, seq.nt, stats_mask, a.segments, a.ref_angle));
  }
  io::write_strain_csv(a.out, curves);
  if (!a.maps.empty()) {
    // raster of (E_rr, E_cc) pairs per voxel per frame, NaN-free (off-mask
    // direction-undefined pixels become zero)
    DisplacementField raster(seq.nx, seq.ny, seq.nt);
    for (std::size_t i = 0; i < raster.v.size(); ++i) {
      const double r = rr[i], c = cc[i];
      raster.v[i] = Vec2{std::isfinite(r) ? r : 0.0, std::isfinite(c) ? c : 0.0};
    }
    io::write_dsp1(a.maps, raster);
  }
  std::cerr << "strain: wrote " << a.out << " (" << seq.nt << " frames, erode " << a.erode
            << ")\n";
  return 0;
}

struct EvaluateArgs {
  std::string est;
  std::string truth;
  std::string mask;
  std::string est_strain;
  std::string truth_strain;
  std::string out;
  std::string cine;
  double spacing = 0.0;
  int erode = 2;
};

int run_evaluate(const EvaluateArgs& a) {
  const TrajectoryField est = io::read_dsp1_trajectory(a.est);
  const TrajectoryField truth = io::read_dsp1_trajectory(a.truth);
  if (!est.same_grid(truth.nx, truth.ny, truth.nt))
    throw DataError("evaluate: estimated and truth grids do not match");
  const MyoMask mask = io::read_msk1(a.mask);
  if (mask.nx != est.nx || mask.ny != est.ny) throw DataError("evaluate: mask grid mismatch");

  double spacing = a.spacing;
  if (!a.cine.empty()) spacing = io::read_cseq(a.cine).pixel_spacing;
  if (spacing <= 0.0) spacing = 1.0;

  io::StrainCurves est_curves, truth_curves;
  const bool have_curves = !a.est_strain.empty() && !a.truth_strain.empty();
  if (have_curves) {
    est_curves = io::read_strain_csv(a.est_strain);
    truth_curves = io::read_strain_csv(a.truth_strain);
    if (est_curves.grs.size() != static_cast<std::size_t>(est.nt) ||
        truth_curves.grs.size() != static_cast<std::size_t>(est.nt))
      throw DataError("evaluate: strain curve length does not match the frame count");
  }

  // End-systolic frame: peak |GCS| of the truth curve when available, else
  // the frame of maximal mask-mean trajectory magnitude.
  int es = 1;
  if (have_curves) {
    double best = -1.0;
    for (std::size_t t = 0; t < truth_curves.gcs.size(); ++t)
      if (std::abs(truth_curves.gcs[t]) > best) {
        best = std::abs(truth_curves.gcs[t]);
        es = static_cast<int>(t) + 1;
      }
  } else {
    double best = -1.0;
    for (int t = 1; t <= truth.nt; ++t) {
      double sum = 0.0;
      std::size_t n = 0;
      for (int y = 1; y <= truth.ny; ++y)
        for (int x = 1; x <= truth.nx; ++x)
          if (mask.at(x, y)) {
            sum += norm(truth.at(x, y, t));
            ++n;
          }
      const double mean = n ? sum / n : 0.0;
      if (mean > best) {
        best = mean;
        es = t;
      }
    }
  }

  MetricReport m;
  m.es_frame = es;
  const EpeResult e_es = epe(est, truth, mask, EpeFrames::end_systole, es, spacing);
  const EpeResult e_all = epe(est, truth, mask, EpeFrames::all, es, spacing);
  m.epe_es_px = e_es.px;
  m.epe_es_mm = e_es.mm;
  m.epe_all_px = e_all.px;
  m.epe_all_mm = e_all.mm;

  // Voxelwise strain errors from the two trajectories through the same
  // strain pipeline; statistics on the eroded mask.
  const DirectionField dirs = direction_field(mask);
  const StrainTensorField e_est = green_lagrange(est);
  const StrainTensorField e_tru = green_lagrange(truth);
  const auto rr_est = directional_strain(e_est, dirs, StrainDirection::radial);
  const auto rr_tru = directional_strain(e_tru, dirs, StrainDirection::radial);
  const auto cc_est = directional_strain(e_est, dirs, StrainDirection::circumferential);
  const auto cc_tru = directional_strain(e_tru, dirs, StrainDirection::circumferential);
  const MyoMask stats_mask = mask.eroded(a.erode);
  m.vse_es_radial = vse(rr_est, rr_tru, est.nx, est.ny, est.nt, stats_mask, es);
  m.vse_es_circ = vse(cc_est, cc_tru, est.nx, est.ny, est.nt, stats_mask, es);

  if (have_curves) {
    m.gse_es_radial = gse(est_curves.grs[es - 1], truth_curves.grs[es - 1]);
    m.gse_es_circ = gse(est_curves.gcs[es - 1], truth_curves.gcs[es - 1]);
    m.drift_radial = drift(est_curves.grs);
    m.drift_circ = drift(est_curves.gcs);
  } else {
    const auto g_rr_est = global_strain(rr_est, est.nx, est.ny, est.nt, stats_mask);
    const auto g_rr_tru = global_strain(rr_tru, est.nx, est.ny, est.nt, stats_mask);
    const auto g_cc_est = global_strain(cc_est, est.nx, est.ny, est.nt, stats_mask);
    const auto g_cc_tru = global_strain(cc_tru, est.nx, est.ny, est.nt, stats_mask);
    m.gse_es_radial = gse(100.0 * g_rr_est[es - 1], 100.0 * g_rr_tru[es - 1]);
    m.gse_es_circ = gse(100.0 * g_cc_est[es - 1], 100.0 * g_cc_tru[es - 1]);
    std::vector<double> pr, pc;
    for (double v : g_rr_est) pr.push_back(100.0 * v);
    for (double v : g_cc_est) pc.push_back(100.0 * v);
    m.drift_radial = drift(pr);
    m.drift_circ = drift(pc);
  }

  if (!a.out.empty()) io::write_report_csv(a.out, m);

  std::printf("metric                      value\n");
  std::printf("--------------------------  ---------\n");
  std::printf("ES frame                    %d\n", m.es_frame);
  std::printf("EPE_ES  (px / mm)           %.4f / %.4f\n", m.epe_es_px, m.epe_es_mm);
  std::printf("EPE_all (px / mm)           %.4f / %.4f\n", m.epe_all_px, m.epe_all_mm);
  std::printf("VSE_ES radial (%%)           %.4f\n", m.vse_es_radial);
  std::printf("VSE_ES circumferential (%%)  %.4f\n", m.vse_es_circ);
  std::printf("GSE_ES radial (%%)           %.4f\n", m.gse_es_radial);
  std::printf("GSE_ES circumferential (%%)  %.4f\n", m.gse_es_circ);
  std::printf("drift radial (%%)            %.4f\n", m.drift_radial);
  std::printf("drift circumferential (%%)   %.4f\n", m.drift_circ);
  return 0;
}

struct TrackArgs {
  std::string contour;
  std::string disp;
  std::string out;
  int frame = 0;
};

int run_track(const TrackArgs& a) {
  const Contour c = io::read_contour_csv(a.contour);
  const TrajectoryField traj = io::read_dsp1_trajectory(a.disp);
  const Contour tracked = track_contour(c, traj, a.frame);
  io::write_contour_csv(a.out, tracked);
  std::cerr << "track: mapped " << c.points.size() << " points to frame " << a.frame << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Groupwise cine motion estimation and myocardial strain"};
  app.require_subcommand(1);

  PhantomArgs pa;
  auto* cmd_phantom = app.add_subcommand("phantom", "Generate the analytic cine phantom");
  cmd_phantom->add_option("--out", pa.out_dir, "Output directory")->required();
  cmd_phantom->add_option("--mode", pa.mode, "scale|incompressible");
  cmd_phantom->add_option("--size", pa.size, "Grid size (square)");
  cmd_phantom->add_option("--frames", pa.frames, "Frame count");
  cmd_phantom->add_option("--amplitude", pa.amplitude, "Peak contraction A in [0,1)");
  cmd_phantom->add_option("--r-inner", pa.r_inner, "End-diastolic inner radius, px");
  cmd_phantom->add_option("--r-outer", pa.r_outer, "End-diastolic outer radius, px");
  cmd_phantom->add_option("--noise", pa.noise, "Gaussian noise sigma, fraction of range");
  cmd_phantom->add_option("--spacing", pa.spacing, "Pixel spacing, mm");
  cmd_phantom->add_option("--seed", pa.seed, "Noise seed");

  app.set_config("--config", "",
                 "Config file (key=value, [register] section for solver options); "
                 "flags take precedence");

  RegisterArgs ra;
  auto* cmd_register = app.add_subcommand("register", "Estimate motion of a cine sequence");
  cmd_register->add_option("--in", ra.input, "Input CSEQ")->required();
  cmd_register->add_option("--metric", ra.metric, "llr|glr|variance|pairwise");
  cmd_register->add_option("--out", ra.out_dir, "Output directory")->required();
  cmd_register->add_option("--levels", ra.levels, "Resolution levels");
  cmd_register->add_option("--patch-lowest", ra.patch_lowest, "Patch size at the lowest level");
  cmd_register->add_option("--spacing-lowest", ra.spacing_lowest,
                           "Patch spacing at the lowest level");
  cmd_register->add_option("--delta", ra.delta, "Control point spacing, px");
  cmd_register->add_option("--lambda", ra.lambda, "Spatial regularization weight");
  cmd_register->add_option("--mu", ra.mu, "Temporal regularization weight");
  cmd_register->add_option("--tol", ra.tol, "Relative cost-change tolerance");
  cmd_register->add_option("--max-iters", ra.max_iters, "Max iterations per level");
  cmd_register->add_option("--step", ra.step, "Initial step, px per control point");
  cmd_register->add_option("--seed", ra.seed, "Seed");
  cmd_register->add_flag("--deterministic", ra.deterministic,
                         "Fixed-order deterministic execution");

  StrainArgs sa;
  auto* cmd_strain = app.add_subcommand("strain", "Strain curves from a trajectory field");
  cmd_strain->add_option("--in", sa.cine, "Input CSEQ")->required();
  cmd_strain->add_option("--disp", sa.disp, "Trajectory DSP1 (from register)")->required();
  cmd_strain->add_option("--mask", sa.mask, "Myocardial MSK1")->required();
  cmd_strain->add_option("--out", sa.out, "Output strain CSV")->required();
  cmd_strain->add_option("--segments", sa.segments, "Segment count (4 or 6; 0 = none)");
  cmd_strain->add_option("--ref-angle", sa.ref_angle, "Segment reference angle, rad");
  cmd_strain->add_option("--erode", sa.erode, "Mask erosion for statistics, px");

  EvaluateArgs ea;
  auto* cmd_eval = app.add_subcommand("evaluate", "Compare a trajectory against ground truth");
  cmd_eval->add_option("--est", ea.est, "Estimated trajectory DSP1")->required();
  cmd_eval->add_option("--truth", ea.truth, "Ground-truth trajectory DSP1")->required();
  cmd_eval->add_option("--mask", ea.mask, "Myocardial MSK1")->required();
  cmd_eval->add_option("--est-strain", ea.est_strain, "Estimated strain CSV");
  cmd_eval->add_option("--truth-strain", ea.truth_strain, "Ground-truth strain CSV");
  cmd_eval->add_option("--out", ea.out, "Output report CSV");
  cmd_eval->add_option("--cine", ea.cine, "CSEQ to take the pixel spacing from");
  cmd_eval->add_option("--spacing", ea.spacing, "Pixel spacing, mm (fallback 1.0)");
  cmd_eval->add_option("--erode", ea.erode, "Mask erosion for strain statistics, px");

  TrackArgs ta;
  auto* cmd_track = app.add_subcommand("track", "Map a contour through a trajectory field");
  cmd_track->add_option("--contour", ta.contour, "Contour CSV (frame,x,y)")->required();
  cmd_track->add_option("--disp", ta.disp, "Trajectory DSP1")->required();
  cmd_track->add_option("--frame", ta.frame, "Target frame")->required();
  cmd_track->add_option("--out", ta.out, "Output contour CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(cmd_phantom)) return run_phantom(pa);
    if (app.got_subcommand(cmd_register)) return run_register(ra);
    if (app.got_subcommand(cmd_strain)) return run_strain(sa);
    if (app.got_subcommand(cmd_eval)) return run_evaluate(ea);
    if (app.got_subcommand(cmd_track)) return run_track(ta);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
