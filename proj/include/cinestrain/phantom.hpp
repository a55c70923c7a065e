#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "cinestrain/common.hpp"
#include "cinestrain/fields.hpp"
#include "cinestrain/image.hpp"
#include "cinestrain/strain.hpp"

namespace cinestrain {

enum class PhantomMode { scale, incompressible };

struct TextureComponent {
  double kx = 0.0;  // wave vector, rad/px
  double ky = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Analytic contracting-annulus cine phantom with exact ground-truth motion.
/// The annulus [r_inner, r_outer] is the myocardium; inside is the blood
/// pool; displacement tapers to zero over a cosine ramp of width `taper`
/// beyond r_outer.
struct PhantomSpec {
  int size = 64;  // square grid
  int frames = 24;
  double r_inner = 10.0;  // end-diastolic radii, px
  double r_outer = 18.0;
  double amplitude = 0.2;  // peak contraction A: inner radius shrinks to r_inner*(1-A)
  PhantomMode mode = PhantomMode::incompressible;
  double taper = 6.0;  // px
  double pixel_spacing = 1.5;

  // Texture: per-tissue bases blended over edge_width, plus global sinusoids
  // in material coordinates (non-axis-aligned so local rank structure feeds
  // the LLR metric).
  double base_background = 0.25;
  double base_myo = 0.55;
  double base_blood = 0.85;
  double edge_width = 1.2;
  std::vector<TextureComponent> texture = {
      {2.0 * std::numbers::pi / 15.0 * 0.80, 2.0 * std::numbers::pi / 15.0 * 0.60, 0.10, 0.7},
      {-2.0 * std::numbers::pi / 11.0 * 0.50, 2.0 * std::numbers::pi / 11.0 * 0.87, 0.08, 2.1},
      {2.0 * std::numbers::pi / 8.0 * 0.32, -2.0 * std::numbers::pi / 8.0 * 0.95, 0.06, 4.4}};

  double noise_sigma = 0.01;  // fraction of the clean dynamic range
  std::uint64_t seed = 42;

  Vec2 center() const { return Vec2{(size + 1) / 2.0, (size + 1) / 2.0}; }

  void validate() const {
    if (size < 16) throw DataError("PhantomSpec: grid too small");
    if (frames < 2) throw DataError("PhantomSpec: needs at least 2 frames");
    if (!(0.0 < r_inner && r_inner < r_outer))
      throw DataError("PhantomSpec: radii must satisfy 0 < r_inner < r_outer");
    if (r_outer >= size / 2.0 - taper)
      throw DataError("PhantomSpec: r_outer must be < size/2 - taper");
    if (!(amplitude >= 0.0 && amplitude < 1.0))
      throw DataError("PhantomSpec: amplitude must be in [0,1)");
  }
};

/// Closed-form motion of the phantom plus its rasterized trajectory, mask,
/// and analytic strain.
struct GroundTruthMotion {
  PhantomSpec spec;
  TrajectoryField trajectory;  // frame-1 grid, offsets Phi_t(X) - X
  MyoMask mask;

  /// Contraction profile: s(1) = 1, minimum 1-A at mid cycle, cyclic
  /// (s at the virtual frame N_t+1 equals 1 again).
  double profile(double t) const {
    const double ph = std::sin(std::numbers::pi * (t - 1.0) / spec.frames);
    return 1.0 - spec.amplitude * ph * ph;
  }

  double inner_radius(double t) const { return spec.r_inner * profile(t); }

  /// Deformed radius rho(R, t) of the material radius R.
  double deformed_radius(double R, double t) const {
    const double s = profile(t);
    const double ri = spec.r_inner, ro = spec.r_outer, m = spec.taper;
    if (R <= 0.0) return 0.0;
    if (R >= ro + m) return R;
    double rho_ro;
    if (spec.mode == PhantomMode::scale) {
      if (R <= ro) return R * s;
      rho_ro = ro * s;
    } else {
      const double rit = ri * s;
      if (R <= ri) return R * s;
      if (R <= ro) return std::sqrt(rit * rit + R * R - ri * ri);
      rho_ro = std::sqrt(rit * rit + ro * ro - ri * ri);
    }
    const double ramp = 0.5 * (1.0 + std::cos(std::numbers::pi * (R - ro) / m));
    return R + (rho_ro - ro) * ramp;
  }

  /// Inverse of deformed_radius (monotone by construction for A < 1 and the
  /// default taper; the taper band is solved by bisection).
  double material_radius(double rho, double t) const {
    const double s = profile(t);
    if (s == 1.0) return rho;  // identity frames stay exact
    const double ri = spec.r_inner, ro = spec.r_outer, m = spec.taper;
    if (rho <= 0.0) return 0.0;
    if (rho >= ro + m) return rho;
    const double rit = ri * s;
    if (spec.mode == PhantomMode::scale) {
      if (rho <= ro * s) return rho / s;
    } else {
      if (rho <= rit) return rho / s;
      const double rho_ro = std::sqrt(rit * rit + ro * ro - ri * ri);
      if (rho <= rho_ro) return std::sqrt(rho * rho - rit * rit + ri * ri);
    }
    double lo = ro, hi = ro + m;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (deformed_radius(mid, t) < rho)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Phi_t: frame-1 (material) coordinates to frame-t coordinates.
  Vec2 map(Vec2 X, double t) const {
    const Vec2 c = spec.center();
    const Vec2 d = X - c;
    const double R = norm(d);
    if (R < 1e-12) return c;
    return c + (deformed_radius(R, t) / R) * d;
  }

  Vec2 inverse_map(Vec2 x, double t) const {
    const Vec2 c = spec.center();
    const Vec2 d = x - c;
    const double rho = norm(d);
    if (rho < 1e-12) return c;
    return c + (material_radius(rho, t) / rho) * d;
  }

  /// Analytic radial strain on the annulus: E_rr = (lambda_r^2 - 1)/2 with
  /// lambda_r = d rho / d R.
  double radial_strain(double R, double t) const {
    const double s = profile(t);
    if (spec.mode == PhantomMode::scale) return 0.5 * (s * s - 1.0);
    const double lam = R / deformed_radius(R, t);
    return 0.5 * (lam * lam - 1.0);
  }

  /// Analytic circumferential strain: E_cc = (lambda_c^2 - 1)/2 with
  /// lambda_c = rho / R.
  double circumferential_strain(double R, double t) const {
    const double s = profile(t);
    if (spec.mode == PhantomMode::scale) return 0.5 * (s * s - 1.0);
    const double lam = deformed_radius(R, t) / R;
    return 0.5 * (lam * lam - 1.0);
  }
};

namespace detail {

inline double smoothstep(double e0, double e1, double x) {
  const double u = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Texture in material coordinates: tissue bases blended over edge_width plus
// sinusoidal components. Continuous everywhere.
inline double texture_at(const PhantomSpec& spec, Vec2 X) {
  const double R = norm(X - spec.center());
  const double w = spec.edge_width;
  const double blood_to_myo = smoothstep(spec.r_inner - w / 2, spec.r_inner + w / 2, R);
  const double myo_to_bg = smoothstep(spec.r_outer - w / 2, spec.r_outer + w / 2, R);
  double v = spec.base_blood + (spec.base_myo - spec.base_blood) * blood_to_myo;
  v += (spec.base_background - spec.base_myo) * myo_to_bg;
  for (const TextureComponent& tc : spec.texture)
    v += tc.amplitude * std::sin(tc.kx * X.x + tc.ky * X.y + tc.phase);
  return v;
}

}  // namespace detail

/// Analytic strain maps for one frame: values on mask (annulus) pixels, NaN
/// elsewhere. Layout matches a single frame of the grid.
struct AnalyticStrainMaps {
  int nx = 0;
  int ny = 0;
  std::vector<double> e_rr;
  std::vector<double> e_cc;
};

inline AnalyticStrainMaps ground_truth_strain(const GroundTruthMotion& motion, int t) {
  const PhantomSpec& spec = motion.spec;
  AnalyticStrainMaps maps;
  maps.nx = spec.size;
  maps.ny = spec.size;
  const std::size_t n = static_cast<std::size_t>(spec.size) * spec.size;
  maps.e_rr.assign(n, std::numeric_limits<double>::quiet_NaN());
  maps.e_cc.assign(n, std::numeric_limits<double>::quiet_NaN());
  const Vec2 c = spec.center();
  for (int y = 1; y <= spec.size; ++y)
    for (int x = 1; x <= spec.size; ++x) {
      const double R = norm(Vec2{x - c.x, y - c.y});
      if (R < spec.r_inner || R > spec.r_outer) continue;
      const std::size_t i = static_cast<std::size_t>(y - 1) * spec.size + (x - 1);
      maps.e_rr[i] = motion.radial_strain(R, t);
      maps.e_cc[i] = motion.circumferential_strain(R, t);
    }
  return maps;
}

/// Mask-averaged analytic strain, dimensionless.
inline double analytic_global_strain(const GroundTruthMotion& motion, const MyoMask& mask, int t,
                                     StrainDirection dir) {
  const Vec2 c = motion.spec.center();
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 1; y <= mask.ny; ++y)
    for (int x = 1; x <= mask.nx; ++x) {
      if (!mask.at(x, y)) continue;
      const double R = norm(Vec2{x - c.x, y - c.y});
      if (R <= 0.0) continue;
      sum += (dir == StrainDirection::radial) ? motion.radial_strain(R, t)
                                              : motion.circumferential_strain(R, t);
      ++n;
    }
  if (n == 0) throw DataError("analytic_global_strain: empty mask");
  return sum / n;
}

/// Generate the cine sequence (texture advected by the inverse map, plus
/// seeded Gaussian noise) and the exact ground-truth motion. Frame 1 equals
/// the textured reference exactly before noise.
inline std::pair<CineSequence, GroundTruthMotion> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  GroundTruthMotion motion;
  motion.spec = spec;

  const int n = spec.size, nt = spec.frames;
  CineSequence seq(n, n, nt, spec.pixel_spacing);
  for (int t = 1; t <= nt; ++t)
    for (int y = 1; y <= n; ++y)
      for (int x = 1; x <= n; ++x)
        seq.at(x, y, t) = detail::texture_at(spec, motion.inverse_map(Vec2{double(x), double(y)}, t));

  double lo = seq.data[0], hi = seq.data[0];
  for (double v : seq.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, spec.noise_sigma * (hi - lo));
    for (double& v : seq.data) v += gauss(rng);
  }

  motion.trajectory = TrajectoryField(n, n, nt);
  for (int t = 2; t <= nt; ++t)
    for (int y = 1; y <= n; ++y)
      for (int x = 1; x <= n; ++x) {
        const Vec2 X{double(x), double(y)};
        motion.trajectory.at(x, y, t) = motion.map(X, t) - X;
      }

  motion.mask = MyoMask(n, n);
  const Vec2 c = spec.center();
  for (int y = 1; y <= n; ++y)
    for (int x = 1; x <= n; ++x) {
      const double R = norm(Vec2{x - c.x, y - c.y});
      motion.mask.set(x, y, R >= spec.r_inner && R <= spec.r_outer);
    }

  return {std::move(seq), std::move(motion)};
}

}  // namespace cinestrain
