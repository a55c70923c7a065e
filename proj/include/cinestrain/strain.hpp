#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "cinestrain/common.hpp"
#include "cinestrain/fields.hpp"

namespace cinestrain {

/// Per-pixel myocardium membership on the frame-1 grid.
struct MyoMask {
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> inside;

  MyoMask() = default;
  MyoMask(int nx_, int ny_) : nx(nx_), ny(ny_), inside(static_cast<std::size_t>(nx_) * ny_, 0) {}

  bool at(int x, int y) const { return inside[static_cast<std::size_t>(y - 1) * nx + (x - 1)] != 0; }
  void set(int x, int y, bool v) {
    inside[static_cast<std::size_t>(y - 1) * nx + (x - 1)] = v ? 1 : 0;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : inside) n += (v != 0);
    return n;
  }

  Vec2 centroid() const {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x)
        if (at(x, y)) {
          sx += x;
          sy += y;
          ++n;
        }
    if (n == 0) throw DataError("MyoMask: empty mask");
    return Vec2{sx / n, sy / n};
  }

  /// Euclidean erosion by radius r px (pixels within distance r of a
  /// non-mask pixel or the grid border are removed).
  MyoMask eroded(int r) const {
    if (r <= 0) return *this;
    MyoMask out(nx, ny);
    const int r2 = r * r;
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x) {
        if (!at(x, y)) continue;
        bool keep = true;
        for (int dy = -r; dy <= r && keep; ++dy)
          for (int dx = -r; dx <= r && keep; ++dx) {
            if (dx * dx + dy * dy > r2) continue;
            const int xx = x + dx, yy = y + dy;
            if (xx < 1 || xx > nx || yy < 1 || yy > ny || !at(xx, yy)) keep = false;
          }
        out.set(x, y, keep);
      }
    return out;
  }
};

/// Pointwise orthonormal (radial, circumferential) unit directions about the
/// mask centroid. Pixels coincident with the centroid are flagged invalid.
struct DirectionField {
  int nx = 0;
  int ny = 0;
  Vec2 center;
  std::vector<Vec2> radial;
  std::vector<Vec2> circumferential;
  std::vector<std::uint8_t> valid;

  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y - 1) * nx + (x - 1); }
};

inline DirectionField direction_field(const MyoMask& mask) {
  DirectionField f;
  f.nx = mask.nx;
  f.ny = mask.ny;
  f.center = mask.centroid();
  const std::size_t n = static_cast<std::size_t>(mask.nx) * mask.ny;
  f.radial.assign(n, Vec2{});
  f.circumferential.assign(n, Vec2{});
  f.valid.assign(n, 0);
  for (int y = 1; y <= mask.ny; ++y)
    for (int x = 1; x <= mask.nx; ++x) {
      const Vec2 d{x - f.center.x, y - f.center.y};
      const double r = norm(d);
      if (r < 1e-9) continue;  // undefined at the centroid pixel
      const std::size_t i = f.idx(x, y);
      f.radial[i] = Vec2{d.x / r, d.y / r};
      f.circumferential[i] = Vec2{-d.y / r, d.x / r};  // +90 deg rotation
      f.valid[i] = 1;
    }
  return f;
}

/// Constant direction field (e.g. a user-supplied long-axis direction).
inline DirectionField constant_direction_field(int nx, int ny, Vec2 u) {
  const double r = norm(u);
  if (r <= 0.0 || !is_finite(u)) throw DataError("constant_direction_field: invalid direction");
  DirectionField f;
  f.nx = nx;
  f.ny = ny;
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  f.radial.assign(n, Vec2{u.x / r, u.y / r});
  f.circumferential.assign(n, Vec2{-u.y / r, u.x / r});
  f.valid.assign(n, 1);
  return f;
}

/// Symmetric 2x2 Green-Lagrange tensors per pixel per frame (exx, exy, eyy).
struct StrainTensorField {
  int nx = 0;
  int ny = 0;
  int nt = 0;
  struct Tensor {
    double xx = 0.0, xy = 0.0, yy = 0.0;
  };
  std::vector<Tensor> e;

  StrainTensorField() = default;
  StrainTensorField(int nx_, int ny_, int nt_)
      : nx(nx_), ny(ny_), nt(nt_), e(static_cast<std::size_t>(nx_) * ny_ * nt_) {}

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t - 1) * ny + (y - 1)) * nx + (x - 1);
  }
  Tensor& at(int x, int y, int t) { return e[index(x, y, t)]; }
  const Tensor& at(int x, int y, int t) const { return e[index(x, y, t)]; }
};

/// E = 1/2 [ (grad T)^T grad T - I ] with the Jacobian of T_{1->t} taken by
/// central differences (one-sided at borders) in pixel units.
inline StrainTensorField green_lagrange(const TrajectoryField& traj) {
  if (traj.nx < 3 || traj.ny < 3) throw DataError("green_lagrange: grid must be >= 3 per axis");
  StrainTensorField out(traj.nx, traj.ny, traj.nt);
  for (int t = 1; t <= traj.nt; ++t)
    for (int y = 1; y <= traj.ny; ++y)
      for (int x = 1; x <= traj.nx; ++x) {
        Vec2 ddx, ddy;  // derivatives of the offset field
        if (x == 1)
          ddx = traj.at(2, y, t) - traj.at(1, y, t);
        else if (x == traj.nx)
          ddx = traj.at(traj.nx, y, t) - traj.at(traj.nx - 1, y, t);
        else
          ddx = 0.5 * (traj.at(x + 1, y, t) - traj.at(x - 1, y, t));
        if (y == 1)
          ddy = traj.at(x, 2, t) - traj.at(x, 1, t);
        else if (y == traj.ny)
          ddy = traj.at(x, traj.ny, t) - traj.at(x, traj.ny - 1, t);
        else
          ddy = 0.5 * (traj.at(x, y + 1, t) - traj.at(x, y - 1, t));
        // F = I + grad(offset); columns are d/dx and d/dy of (T_x, T_y)
        const double f11 = 1.0 + ddx.x, f12 = ddy.x;
        const double f21 = ddx.y, f22 = 1.0 + ddy.y;
        auto& e = out.at(x, y, t);
        e.xx = 0.5 * (f11 * f11 + f21 * f21 - 1.0);
        e.yy = 0.5 * (f12 * f12 + f22 * f22 - 1.0);
        e.xy = 0.5 * (f11 * f12 + f21 * f22);
      }
  return out;
}

enum class StrainDirection { radial, circumferential };

/// e_u(x,t) = u(x)^T E(x,t) u(x); dimensionless (percent only at interfaces).
/// Invalid direction pixels get NaN.
inline std::vector<double> directional_strain(const StrainTensorField& e,
                                              const DirectionField& dirs, StrainDirection which) {
  if (e.nx != dirs.nx || e.ny != dirs.ny)
    throw DataError("directional_strain: grids do not match");
  std::vector<double> out(e.e.size());
  const auto& u = (which == StrainDirection::radial) ? dirs.radial : dirs.circumferential;
  for (int t = 1; t <= e.nt; ++t)
    for (int y = 1; y <= e.ny; ++y)
      for (int x = 1; x <= e.nx; ++x) {
        const std::size_t di = dirs.idx(x, y);
        const std::size_t i = e.index(x, y, t);
        if (!dirs.valid[di]) {
          out[i] = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        const auto& ten = e.e[i];
        const Vec2& v = u[di];
        out[i] = v.x * (ten.xx * v.x + ten.xy * v.y) + v.y * (ten.xy * v.x + ten.yy * v.y);
      }
  return out;
}

/// Unweighted mean over mask pixels, one value per frame.
inline std::vector<double> global_strain(const std::vector<double>& map, int nx, int ny, int nt,
                                         const MyoMask& mask) {
  if (mask.nx != nx || mask.ny != ny) throw DataError("global_strain: mask grid mismatch");
  if (mask.count() == 0) throw DataError("global_strain: empty mask");
  std::vector<double> out(static_cast<std::size_t>(nt), 0.0);
  for (int t = 1; t <= nt; ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x) {
        if (!mask.at(x, y)) continue;
        const double v = map[(static_cast<std::size_t>(t - 1) * ny + (y - 1)) * nx + (x - 1)];
        if (!std::isfinite(v)) continue;
        sum += v;
        ++n;
      }
    out[static_cast<std::size_t>(t - 1)] = (n > 0) ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

/// Equal angular sectors about the mask centroid, counterclockwise from the
/// reference angle. Returns [segment][frame]; empty segments are NaN.
inline std::vector<std::vector<double>> segmental_strain(const std::vector<double>& map, int nx,
                                                         int ny, int nt, const MyoMask& mask,
                                                         int n_segments, double reference_angle) {
  if (n_segments != 4 && n_segments != 6)
    throw DataError("segmental_strain: segment count must be 4 or 6");
  if (mask.count() == 0) throw DataError("segmental_strain: empty mask");
  const Vec2 c = mask.centroid();
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(n_segments),
                                        std::vector<double>(static_cast<std::size_t>(nt), 0.0));
  std::vector<std::vector<std::size_t>> counts(
      static_cast<std::size_t>(n_segments), std::vector<std::size_t>(static_cast<std::size_t>(nt), 0));
  for (int y = 1; y <= ny; ++y)
    for (int x = 1; x <= nx; ++x) {
      if (!mask.at(x, y)) continue;
      const double ang = std::atan2(y - c.y, x - c.x);
      double rel = std::fmod(ang - reference_angle, two_pi);
      if (rel < 0.0) rel += two_pi;
      int seg = static_cast<int>(rel / (two_pi / n_segments));
      seg = std::min(seg, n_segments - 1);
      for (int t = 1; t <= nt; ++t) {
        const double v = map[(static_cast<std::size_t>(t - 1) * ny + (y - 1)) * nx + (x - 1)];
        if (!std::isfinite(v)) continue;
        sums[seg][static_cast<std::size_t>(t - 1)] += v;
        counts[seg][static_cast<std::size_t>(t - 1)] += 1;
      }
    }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n_segments),
                                       std::vector<double>(static_cast<std::size_t>(nt)));
  for (int s = 0; s < n_segments; ++s)
    for (int t = 0; t < nt; ++t)
      out[s][t] = counts[s][t] ? sums[s][t] / counts[s][t]
                               : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace cinestrain
