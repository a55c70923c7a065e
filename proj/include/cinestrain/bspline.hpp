#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cinestrain/common.hpp"
#include "cinestrain/fields.hpp"
#include "cinestrain/image.hpp"

namespace cinestrain {

/// Free-form deformation control lattice phi(i,j,t): 2-vectors in pixel
/// units, uniform spacing delta (pixels at the current resolution level).
/// Index ranges are 0 <= i < ni with ni = floor((nx-1)/delta)+4 so that every
/// pixel's 4x4 support exists.
struct ControlMesh {
  double delta = 6.0;
  int ni = 0;
  int nj = 0;
  int nt = 0;
  std::vector<Vec2> phi;

  ControlMesh() = default;
  ControlMesh(int ni_, int nj_, int nt_, double delta_)
      : delta(delta_), ni(ni_), nj(nj_), nt(nt_),
        phi(static_cast<std::size_t>(ni_) * nj_ * nt_) {}

  static int points_for(int n, double delta) {
    return static_cast<int>(std::floor((n - 1) / delta)) + 4;
  }

  /// Zero mesh sized for an nx x ny grid with nt frames.
  static ControlMesh for_grid(int nx, int ny, int nt, double delta) {
    if (delta <= 0.0) throw DataError("ControlMesh: spacing must be positive");
    return ControlMesh(points_for(nx, delta), points_for(ny, delta), nt, delta);
  }

  std::size_t index(int i, int j, int t) const {
    return (static_cast<std::size_t>(t - 1) * nj + j) * ni + i;
  }
  Vec2& at(int i, int j, int t) { return phi[index(i, j, t)]; }
  const Vec2& at(int i, int j, int t) const { return phi[index(i, j, t)]; }

  bool compatible_with(int nx, int ny) const {
    return ni == points_for(nx, delta) && nj == points_for(ny, delta);
  }

  double max_abs() const {
    double m = 0.0;
    for (const Vec2& p : phi) m = std::max({m, std::abs(p.x), std::abs(p.y)});
    return m;
  }
};

/// Uniform cubic B-spline basis values (B_0..B_3) at fraction u in [0,1).
inline std::array<double, 4> bspline_weights(double u) {
  if (!(u >= 0.0 && u < 1.0)) throw DataError("bspline_weights: u must satisfy 0 <= u < 1");
  const double u2 = u * u, u3 = u2 * u;
  return {(1.0 - 3.0 * u + 3.0 * u2 - u3) / 6.0,
          (4.0 - 6.0 * u2 + 3.0 * u3) / 6.0,
          (1.0 + 3.0 * u + 3.0 * u2 - 3.0 * u3) / 6.0,
          u3 / 6.0};
}

namespace detail {

struct SplineSupport {
  int base = 0;  // first control index of the 4-point support
  std::array<double, 4> w{};
};

inline SplineSupport spline_support(double coord, double delta) {
  const double s = (coord - 1.0) / delta;
  SplineSupport sp;
  sp.base = static_cast<int>(std::floor(s));
  sp.w = bspline_weights(s - sp.base);
  return sp;
}

// Per-pixel support tables for one axis; reused across frames and pixels.
inline std::vector<SplineSupport> axis_supports(int n, double delta) {
  std::vector<SplineSupport> v(static_cast<std::size_t>(n));
  for (int x = 1; x <= n; ++x) v[x - 1] = spline_support(static_cast<double>(x), delta);
  return v;
}

// Evaluation without the grid-bounds precondition; control indices outside
// the lattice are clamped (used by prolongation when sampling past borders).
inline Vec2 evaluate_clamped(const ControlMesh& mesh, double x, double y, int t) {
  const double sx = (x - 1.0) / mesh.delta;
  const double sy = (y - 1.0) / mesh.delta;
  int i = static_cast<int>(std::floor(sx));
  int j = static_cast<int>(std::floor(sy));
  const auto wx = bspline_weights(sx - i);
  const auto wy = bspline_weights(sy - j);
  Vec2 d;
  for (int l = 0; l < 4; ++l) {
    const int jj = std::clamp(j + l, 0, mesh.nj - 1);
    for (int k = 0; k < 4; ++k) {
      const int ii = std::clamp(i + k, 0, mesh.ni - 1);
      d += (wx[k] * wy[l]) * mesh.at(ii, jj, t);
    }
  }
  return d;
}

}  // namespace detail

/// d(x,t) = sum_{k,l} B_k(u) B_l(v) phi(i+k, j+l, t) with i = floor((x-1)/delta).
inline Vec2 evaluate_displacement(const ControlMesh& mesh, double x, double y, int t) {
  if (t < 1 || t > mesh.nt) throw DataError("evaluate_displacement: frame out of range");
  const auto sx = detail::spline_support(x, mesh.delta);
  const auto sy = detail::spline_support(y, mesh.delta);
  if (sx.base < 0 || sy.base < 0 || sx.base + 3 >= mesh.ni || sy.base + 3 >= mesh.nj)
    throw DataError("evaluate_displacement: coordinate outside the mesh grid");
  Vec2 d;
  for (int l = 0; l < 4; ++l)
    for (int k = 0; k < 4; ++k)
      d += (sx.w[k] * sy.w[l]) * mesh.at(sx.base + k, sy.base + l, t);
  return d;
}

/// Dense evaluation of the mesh on an nx x ny grid for all frames.
inline DisplacementField dense_displacement(const ControlMesh& mesh, int nx, int ny) {
  if (!mesh.compatible_with(nx, ny))
    throw DataError("dense_displacement: mesh incompatible with grid dimensions");
  DisplacementField d(nx, ny, mesh.nt);
  const auto xs = detail::axis_supports(nx, mesh.delta);
  const auto ys = detail::axis_supports(ny, mesh.delta);
  for (int t = 1; t <= mesh.nt; ++t)
    for (int y = 1; y <= ny; ++y) {
      const auto& sy = ys[y - 1];
      for (int x = 1; x <= nx; ++x) {
        const auto& sx = xs[x - 1];
        Vec2 acc;
        for (int l = 0; l < 4; ++l) {
          const std::size_t row = mesh.index(sx.base, sy.base + l, t);
          acc += sy.w[l] * (sx.w[0] * mesh.phi[row] + sx.w[1] * mesh.phi[row + 1] +
                            sx.w[2] * mesh.phi[row + 2] + sx.w[3] * mesh.phi[row + 3]);
        }
        d.at(x, y, t) = acc;
      }
    }
  return d;
}

/// Euclidean projection onto the zero-temporal-mean constraint set (Eq-level:
/// subtract the per-site temporal mean).
inline ControlMesh project_zero_mean(const ControlMesh& mesh) {
  ControlMesh out = mesh;
  const std::size_t per_frame = static_cast<std::size_t>(mesh.ni) * mesh.nj;
  for (std::size_t s = 0; s < per_frame; ++s) {
    Vec2 mean;
    for (int t = 0; t < mesh.nt; ++t) mean += out.phi[static_cast<std::size_t>(t) * per_frame + s];
    mean *= 1.0 / mesh.nt;
    for (int t = 0; t < mesh.nt; ++t) out.phi[static_cast<std::size_t>(t) * per_frame + s] -= mean;
  }
  return out;
}

namespace detail {

// Solve the 1D cubic B-spline interpolation system along one axis: knot
// equations (phi_m + 4 phi_{m+1} + phi_{m+2})/6 = g_m for m = 0..n-3 plus
// natural end conditions phi_0 - 2 phi_1 + phi_2 = 0 (and mirrored). Returns
// the factored dense matrix; n is small (grid/delta + 4).
inline Eigen::PartialPivLU<Eigen::MatrixXd> spline_fit_lu(int n) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  A(0, 0) = 1.0;
  A(0, 1) = -2.0;
  A(0, 2) = 1.0;
  for (int m = 0; m + 2 < n; ++m) {
    A(m + 1, m) = 1.0 / 6.0;
    A(m + 1, m + 1) = 4.0 / 6.0;
    A(m + 1, m + 2) = 1.0 / 6.0;
  }
  A(n - 1, n - 3) = 1.0;
  A(n - 1, n - 2) = -2.0;
  A(n - 1, n - 1) = 1.0;
  return Eigen::PartialPivLU<Eigen::MatrixXd>(A);
}

}  // namespace detail

/// Transfer a coarse-level mesh to the next (2x) finer level: the coarse
/// field is evaluated continuously, vectors and coordinates are scaled by 2
/// (fine coordinate x_f maps to coarse coordinate (x_f+1)/2), and the fine
/// mesh is fitted by the separable cubic B-spline interpolation prefilter on
/// knot samples, then re-projected onto the zero-mean constraint.
inline ControlMesh prolong_mesh(const ControlMesh& coarse, int fine_nx, int fine_ny,
                                double fine_delta) {
  ControlMesh fine = ControlMesh::for_grid(fine_nx, fine_ny, coarse.nt, fine_delta);

  // Knot sample locations: control point i is associated with x = 1 + (i-1)*delta.
  auto knot_coord = [fine_delta](int i) { return 1.0 + (i - 1) * fine_delta; };
  auto target = [&](double xf, double yf, int t) {
    const double xc = (xf + 1.0) / 2.0;
    const double yc = (yf + 1.0) / 2.0;
    return 2.0 * detail::evaluate_clamped(coarse, xc, yc, t);
  };

  const int ni = fine.ni, nj = fine.nj;
  auto lu_i = detail::spline_fit_lu(ni);
  auto lu_j = detail::spline_fit_lu(nj);

  // Sample the scaled coarse field at the 2D knot lattice.
  std::vector<Vec2> samples(static_cast<std::size_t>(ni) * nj);
  for (int t = 1; t <= coarse.nt; ++t) {
    for (int j = 0; j < nj; ++j)
      for (int i = 0; i < ni; ++i)
        samples[static_cast<std::size_t>(j) * ni + i] = target(knot_coord(i), knot_coord(j), t);

    // Rows: for each j solve along i. The system right-hand side pairs the
    // natural end rows with zeros and interior rows with the knot samples,
    // matching the matrix layout of spline_fit_lu.
    Eigen::MatrixXd rhs(ni, 2);
    std::vector<Vec2> coef_rows(samples.size());
    for (int j = 0; j < nj; ++j) {
      rhs.setZero();
      for (int m = 0; m + 2 < ni; ++m) {
        const Vec2& g = samples[static_cast<std::size_t>(j) * ni + (m + 1)];
        rhs(m + 1, 0) = g.x;
        rhs(m + 1, 1) = g.y;
      }
      Eigen::MatrixXd sol = lu_i.solve(rhs);
      for (int i = 0; i < ni; ++i)
        coef_rows[static_cast<std::size_t>(j) * ni + i] = Vec2{sol(i, 0), sol(i, 1)};
    }
    // Columns: for each i solve along j.
    Eigen::MatrixXd rhs_j(nj, 2);
    for (int i = 0; i < ni; ++i) {
      rhs_j.setZero();
      for (int m = 0; m + 2 < nj; ++m) {
        const Vec2& g = coef_rows[static_cast<std::size_t>(m + 1) * ni + i];
        rhs_j(m + 1, 0) = g.x;
        rhs_j(m + 1, 1) = g.y;
      }
      Eigen::MatrixXd sol = lu_j.solve(rhs_j);
      for (int j = 0; j < nj; ++j) fine.at(i, j, t) = Vec2{sol(j, 0), sol(j, 1)};
    }
  }

  return project_zero_mean(fine);
}

struct InversionReport {
  double max_residual = 0.0;  // max_x || d_inv(x) + d1(x + d_inv(x)) || in px
  int iterations = 0;
  bool converged = true;  // residual <= 0.1 px
};

/// Fixed-point inversion d_inv(x) <- -d1(x + d_inv(x)) with bilinear sampling
/// of d1, run until the max update drops below 1e-3 px or 50 iterations.
inline std::pair<Field2D, InversionReport> invert_displacement(const Field2D& d1) {
  constexpr double kTol = 1e-3;
  constexpr int kMaxIter = 50;
  for (const Vec2& d : d1.v)
    if (!is_finite(d)) throw NumericalError("invert_displacement: non-finite displacement");

  const int nx = d1.nx, ny = d1.ny;
  std::vector<double> cx(d1.v.size()), cy(d1.v.size());
  for (std::size_t i = 0; i < d1.v.size(); ++i) {
    cx[i] = d1.v[i].x;
    cy[i] = d1.v[i].y;
  }
  const FrameView fx{cx.data(), nx, ny};
  const FrameView fy{cy.data(), nx, ny};

  Field2D inv(nx, ny);
  InversionReport rep;
  for (int it = 1; it <= kMaxIter; ++it) {
    double max_update = 0.0;
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x) {
        Vec2& cur = inv.at(x, y);
        const Vec2 next{-bilinear_sample(fx, x + cur.x, y + cur.y),
                        -bilinear_sample(fy, x + cur.x, y + cur.y)};
        max_update = std::max(max_update, norm(next - cur));
        cur = next;
      }
    rep.iterations = it;
    if (max_update < kTol) break;
  }
  double max_res = 0.0;
  for (int y = 1; y <= ny; ++y)
    for (int x = 1; x <= nx; ++x) {
      const Vec2& cur = inv.at(x, y);
      const Vec2 fwd{bilinear_sample(fx, x + cur.x, y + cur.y),
                     bilinear_sample(fy, x + cur.x, y + cur.y)};
      max_res = std::max(max_res, norm(cur + fwd));
    }
  rep.max_residual = max_res;
  rep.converged = max_res <= 0.1;
  return {inv, rep};
}

/// T_{1->t}(x) = T(T^{-1}(x,1), t): map each frame-1 pixel to the common
/// reference frame, then forward into frame t. The frame-1 component of the
/// result is forced to exactly zero.
inline std::pair<TrajectoryField, InversionReport> compose_to_first_frame(
    const DisplacementField& disp) {
  const int nx = disp.nx, ny = disp.ny, nt = disp.nt;
  auto [inv1, rep] = invert_displacement(disp.frame(1));

  // Component views of d(.,t) for bilinear sampling.
  std::vector<double> cx(static_cast<std::size_t>(nx) * ny), cy(cx.size());
  TrajectoryField traj(nx, ny, nt);
  for (int t = 1; t <= nt; ++t) {
    if (t == 1) continue;  // forced zero
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x) {
        const std::size_t i = static_cast<std::size_t>(y - 1) * nx + (x - 1);
        const Vec2& d = disp.at(x, y, t);
        cx[i] = d.x;
        cy[i] = d.y;
      }
    const FrameView fx{cx.data(), nx, ny};
    const FrameView fy{cy.data(), nx, ny};
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x) {
        const Vec2& di = inv1.at(x, y);
        const double rx = x + di.x, ry = y + di.y;  // common reference coords
        traj.at(x, y, t) = Vec2{rx + bilinear_sample(fx, rx, ry) - x,
                                ry + bilinear_sample(fy, rx, ry) - y};
      }
  }
  return {traj, rep};
}

/// Chain frame-to-frame step fields: T_{1->t}(x) = T_{t-1->t}(T_{1->t-1}(x)).
inline TrajectoryField compose_pairwise_chain(const std::vector<Field2D>& steps) {
  if (steps.empty()) throw DataError("compose_pairwise_chain: no step fields");
  const int nx = steps.front().nx, ny = steps.front().ny;
  for (const Field2D& s : steps)
    if (s.nx != nx || s.ny != ny) throw DataError("compose_pairwise_chain: grid mismatch");

  const int nt = static_cast<int>(steps.size()) + 1;
  TrajectoryField traj(nx, ny, nt);
  std::vector<double> cx(static_cast<std::size_t>(nx) * ny), cy(cx.size());
  for (int t = 2; t <= nt; ++t) {
    const Field2D& step = steps[static_cast<std::size_t>(t - 2)];
    for (std::size_t i = 0; i < step.v.size(); ++i) {
      cx[i] = step.v[i].x;
      cy[i] = step.v[i].y;
    }
    const FrameView fx{cx.data(), nx, ny};
    const FrameView fy{cy.data(), nx, ny};
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x) {
        const Vec2 prev = traj.at(x, y, t - 1);
        const double px = x + prev.x, py = y + prev.y;
        traj.at(x, y, t) =
            Vec2{px + bilinear_sample(fx, px, py) - x, py + bilinear_sample(fy, px, py) - y};
      }
  }
  return traj;
}

}  // namespace cinestrain
