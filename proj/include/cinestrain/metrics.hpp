#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cinestrain/common.hpp"
#include "cinestrain/fields.hpp"
#include "cinestrain/image.hpp"
#include "cinestrain/strain.hpp"

namespace cinestrain {

/// Ordered 2D point list in pixel coordinates.
struct Contour {
  std::vector<Vec2> points;
  bool closed = true;
  int frame = 1;

  void validate() const {
    if (points.empty()) throw DataError("Contour: empty");
    if (closed && points.size() < 3) throw DataError("Contour: closed contour needs >= 3 points");
  }
};

enum class EpeFrames { end_systole, all };

struct EpeResult {
  double px = 0.0;
  double mm = 0.0;
};

/// Mean over mask pixels (and frames, for `all`) of ||T_est - T_truth||_2.
inline EpeResult epe(const TrajectoryField& est, const TrajectoryField& truth, const MyoMask& mask,
                     EpeFrames frames, int es_frame, double pixel_spacing) {
  if (!est.same_grid(truth.nx, truth.ny, truth.nt))
    throw DataError("epe: trajectory grids do not match");
  if (mask.nx != est.nx || mask.ny != est.ny) throw DataError("epe: mask grid mismatch");
  const int t0 = (frames == EpeFrames::all) ? 1 : es_frame;
  const int t1 = (frames == EpeFrames::all) ? est.nt : es_frame;
  if (t0 < 1 || t1 > est.nt) throw DataError("epe: frame out of range");
  double sum = 0.0;
  std::size_t n = 0;
  for (int t = t0; t <= t1; ++t)
    for (int y = 1; y <= est.ny; ++y)
      for (int x = 1; x <= est.nx; ++x) {
        if (!mask.at(x, y)) continue;
        sum += norm(est.at(x, y, t) - truth.at(x, y, t));
        ++n;
      }
  if (n == 0) throw DataError("epe: empty mask");
  EpeResult r;
  r.px = sum / n;
  r.mm = r.px * pixel_spacing;
  return r;
}

/// Voxelwise strain error at one frame: mean over mask of |e_est - e_truth|,
/// in strain points (%). Inputs are dimensionless strain maps (frame stacks).
inline double vse(const std::vector<double>& est_map, const std::vector<double>& truth_map, int nx,
                  int ny, int nt, const MyoMask& mask, int frame) {
  if (frame < 1 || frame > nt) throw DataError("vse: frame out of range");
  if (mask.count() == 0) throw DataError("vse: empty mask");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 1; y <= ny; ++y)
    for (int x = 1; x <= nx; ++x) {
      if (!mask.at(x, y)) continue;
      const std::size_t i = (static_cast<std::size_t>(frame - 1) * ny + (y - 1)) * nx + (x - 1);
      const double a = est_map[i], b = truth_map[i];
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      sum += std::abs(a - b);
      ++n;
    }
  if (n == 0) throw DataError("vse: no finite mask values at the requested frame");
  return 100.0 * sum / n;
}

/// Global strain error at one frame: |GS_est - GS_truth| in strain points.
/// Inputs are percent values.
inline double gse(double est_percent, double truth_percent) {
  return std::abs(est_percent - truth_percent);
}

/// Map contour points through the bilinearly sampled trajectory of frame t.
inline Contour track_contour(const Contour& contour, const TrajectoryField& traj, int t) {
  contour.validate();
  if (t < 1 || t > traj.nt) throw DataError("track_contour: frame out of range");
  const std::size_t npix = static_cast<std::size_t>(traj.nx) * traj.ny;
  std::vector<double> cx(npix), cy(npix);
  for (int y = 1; y <= traj.ny; ++y)
    for (int x = 1; x <= traj.nx; ++x) {
      const std::size_t i = static_cast<std::size_t>(y - 1) * traj.nx + (x - 1);
      const Vec2& v = traj.at(x, y, t);
      cx[i] = v.x;
      cy[i] = v.y;
    }
  const FrameView fx{cx.data(), traj.nx, traj.ny};
  const FrameView fy{cy.data(), traj.nx, traj.ny};
  Contour out;
  out.closed = contour.closed;
  out.frame = t;
  out.points.reserve(contour.points.size());
  for (const Vec2& p : contour.points)
    out.points.push_back(
        Vec2{p.x + bilinear_sample(fx, p.x, p.y), p.y + bilinear_sample(fy, p.x, p.y)});
  return out;
}

namespace detail {

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = norm_sq(ab);
  if (len2 == 0.0) return norm(p - a);
  const double u = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + u * ab));
}

inline double point_polyline_distance(const Vec2& p, const Contour& c) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = c.points.size();
  if (n == 1) return norm(p - c.points[0]);
  const std::size_t nseg = c.closed ? n : n - 1;
  for (std::size_t i = 0; i < nseg; ++i)
    best = std::min(best, point_segment_distance(p, c.points[i], c.points[(i + 1) % n]));
  return best;
}

}  // namespace detail

/// Symmetric mean contour distance: average of (mean over a's points of the
/// distance to b's polyline) and the reverse, scaled by the pixel spacing.
inline double contour_distance(const Contour& a, const Contour& b, double pixel_spacing) {
  a.validate();
  b.validate();
  double sab = 0.0, sba = 0.0;
  for (const Vec2& p : a.points) sab += detail::point_polyline_distance(p, b);
  for (const Vec2& p : b.points) sba += detail::point_polyline_distance(p, a);
  return 0.5 * (sab / a.points.size() + sba / b.points.size()) * pixel_spacing;
}

/// Late-diastolic drift: |global strain at the last frame|, strain points.
/// Input curve is in percent.
inline double drift(const std::vector<double>& global_strain_percent) {
  if (global_strain_percent.empty()) throw DataError("drift: empty strain curve");
  return std::abs(global_strain_percent.back());
}

/// Flat summary of the simulation/tracking metrics.
struct MetricReport {
  int es_frame = 0;
  double epe_es_px = 0.0, epe_es_mm = 0.0;
  double epe_all_px = 0.0, epe_all_mm = 0.0;
  double vse_es_radial = 0.0, vse_es_circ = 0.0;       // strain points
  double gse_es_radial = 0.0, gse_es_circ = 0.0;       // strain points
  double drift_radial = 0.0, drift_circ = 0.0;         // strain points
  double contour_dist_endo_mm = std::numeric_limits<double>::quiet_NaN();
  double contour_dist_epi_mm = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace cinestrain
