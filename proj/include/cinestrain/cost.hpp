#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cinestrain/bspline.hpp"
#include "cinestrain/common.hpp"
#include "cinestrain/fields.hpp"
#include "cinestrain/image.hpp"

namespace cinestrain {

/// Overlapped square patch decomposition of an nx x ny grid. Origins along
/// each axis are {1 + k*s : 1 + k*s <= N - p + 1} plus the anchor N - p + 1,
/// deduplicated, so every pixel is covered by at least one patch.
struct PatchLayout {
  int nx = 0;
  int ny = 0;
  int patch = 0;    // p, square side in pixels
  int spacing = 0;  // s
  std::vector<int> origins_x;
  std::vector<int> origins_y;

  int count() const {
    return static_cast<int>(origins_x.size()) * static_cast<int>(origins_y.size());
  }
};

inline std::vector<int> patch_axis_origins(int n, int p, int s) {
  std::vector<int> o;
  const int last = n - p + 1;
  for (int v = 1; v <= last; v += s) o.push_back(v);
  if (o.empty() || o.back() != last) o.push_back(last);
  return o;
}

inline PatchLayout build_patch_layout(int nx, int ny, int p, int s) {
  if (p < 2) throw DataError("build_patch_layout: patch size must be >= 2");
  if (s < 1 || s > p) throw DataError("build_patch_layout: spacing must satisfy 1 <= s <= p");
  if (p > nx || p > ny) throw DataError("build_patch_layout: patch size exceeds grid");
  PatchLayout l;
  l.nx = nx;
  l.ny = ny;
  l.patch = p;
  l.spacing = s;
  l.origins_x = patch_axis_origins(nx, p, s);
  l.origins_y = patch_axis_origins(ny, p, s);
  return l;
}

using CasoratiMatrix = Eigen::MatrixXd;

/// Rows are region voxels in raster order (y outer, x inner), columns frames.
inline CasoratiMatrix build_casorati(const CineSequence& seq,
                                     const std::vector<std::pair<int, int>>& region) {
  if (region.empty()) throw DataError("build_casorati: empty region");
  CasoratiMatrix c(static_cast<Eigen::Index>(region.size()), seq.nt);
  for (std::size_t r = 0; r < region.size(); ++r) {
    const auto [x, y] = region[r];
    if (x < 1 || x > seq.nx || y < 1 || y > seq.ny)
      throw DataError("build_casorati: region voxel outside grid");
    for (int t = 1; t <= seq.nt; ++t) c(static_cast<Eigen::Index>(r), t - 1) = seq.at(x, y, t);
  }
  return c;
}

struct NuclearNorm {
  double value = 0.0;
  Eigen::MatrixXd subgradient;  // U V^T over singular triplets with sigma > 1e-12 * sigma_max
};

inline NuclearNorm nuclear_norm(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw NumericalError("nuclear_norm: non-finite matrix entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw NumericalError("nuclear_norm: SVD failed on a " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " matrix");
  const Eigen::VectorXd& sv = svd.singularValues();
  NuclearNorm out;
  out.value = sv.sum();
  const double cutoff = 1e-12 * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index kept = 0;
  while (kept < sv.size() && sv(kept) > cutoff) ++kept;
  out.subgradient = svd.matrixU().leftCols(kept) * svd.matrixV().leftCols(kept).transpose();
  return out;
}

/// Singular values only (for value-only cost evaluation in the line search).
inline double nuclear_norm_value(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw NumericalError("nuclear_norm: non-finite matrix entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  if (svd.info() != Eigen::Success)
    throw NumericalError("nuclear_norm: SVD failed on a " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " matrix");
  return svd.singularValues().sum();
}

enum class MetricKind { llr, glr, variance };

inline const char* metric_name(MetricKind k) {
  switch (k) {
    case MetricKind::llr: return "llr";
    case MetricKind::glr: return "glr";
    case MetricKind::variance: return "variance";
  }
  return "?";
}

inline MetricKind parse_metric(const std::string& s) {
  if (s == "llr") return MetricKind::llr;
  if (s == "glr") return MetricKind::glr;
  if (s == "variance") return MetricKind::variance;
  throw DataError("unknown dissimilarity metric: " + s);
}

struct CostParams {
  MetricKind kind = MetricKind::llr;
  double lambda = 6e-4;  // spatial regularization weight
  double mu = 0.06;      // temporal regularization weight
  int patch = 20;
  int spacing = 12;

  void validate() const {
    if (lambda < 0.0 || mu < 0.0) throw DataError("CostParams: weights must be nonnegative");
    if (patch < 2) throw DataError("CostParams: patch size must be >= 2");
    if (spacing < 1 || spacing > patch) throw DataError("CostParams: 1 <= spacing <= patch");
  }
};

struct Dissimilarity {
  double value = 0.0;
  std::vector<double> grad;  // dD/d f~ per voxel per frame, sequence layout
};

namespace detail {

inline void patch_region(const PatchLayout& layout, int ox, int oy,
                         std::vector<std::pair<int, int>>& region) {
  region.clear();
  for (int py = 0; py < layout.patch; ++py)
    for (int px = 0; px < layout.patch; ++px) region.emplace_back(ox + px, oy + py);
}

inline std::vector<std::pair<int, int>> full_grid_region(int nx, int ny) {
  std::vector<std::pair<int, int>> region;
  region.reserve(static_cast<std::size_t>(nx) * ny);
  for (int y = 1; y <= ny; ++y)
    for (int x = 1; x <= nx; ++x) region.emplace_back(x, y);
  return region;
}

}  // namespace detail

/// Dissimilarity of a (deformed) sequence:
///   llr      — sum over patches of the nuclear norm of the local Casorati
///   glr      — nuclear norm of the single full-grid Casorati
///   variance — sum over voxels of the population variance across frames
/// The gradient is taken with respect to the warped intensities; overlapped
/// patch contributions are summed unweighted (the exact gradient of the sum).
inline Dissimilarity dissimilarity(const CineSequence& warped, const PatchLayout& layout,
                                   MetricKind kind, bool with_grad = true) {
  Dissimilarity out;
  if (with_grad) out.grad.assign(warped.data.size(), 0.0);

  if (kind == MetricKind::variance) {
    const double inv_nt = 1.0 / warped.nt;
    for (int y = 1; y <= warped.ny; ++y)
      for (int x = 1; x <= warped.nx; ++x) {
        double mean = 0.0;
        for (int t = 1; t <= warped.nt; ++t) mean += warped.at(x, y, t);
        mean *= inv_nt;
        for (int t = 1; t <= warped.nt; ++t) {
          const double dev = warped.at(x, y, t) - mean;
          out.value += dev * dev * inv_nt;
          if (with_grad) out.grad[warped.index(x, y, t)] = 2.0 * dev * inv_nt;
        }
      }
    return out;
  }

  if (kind == MetricKind::glr) {
    const auto region = detail::full_grid_region(warped.nx, warped.ny);
    const CasoratiMatrix c = build_casorati(warped, region);
    if (with_grad) {
      const NuclearNorm nn = nuclear_norm(c);
      out.value = nn.value;
      for (std::size_t r = 0; r < region.size(); ++r) {
        const auto [x, y] = region[r];
        for (int t = 1; t <= warped.nt; ++t)
          out.grad[warped.index(x, y, t)] += nn.subgradient(static_cast<Eigen::Index>(r), t - 1);
      }
    } else {
      out.value = nuclear_norm_value(c);
    }
    return out;
  }

  // llr
  if (layout.nx != warped.nx || layout.ny != warped.ny)
    throw DataError("dissimilarity: patch layout does not match grid");
  std::vector<std::pair<int, int>> region;
  region.reserve(static_cast<std::size_t>(layout.patch) * layout.patch);
  for (int oy : layout.origins_y)
    for (int ox : layout.origins_x) {
      detail::patch_region(layout, ox, oy, region);
      const CasoratiMatrix c = build_casorati(warped, region);
      if (with_grad) {
        const NuclearNorm nn = nuclear_norm(c);
        out.value += nn.value;
        for (std::size_t r = 0; r < region.size(); ++r) {
          const auto [x, y] = region[r];
          for (int t = 1; t <= warped.nt; ++t)
            out.grad[warped.index(x, y, t)] += nn.subgradient(static_cast<Eigen::Index>(r), t - 1);
        }
      } else {
        out.value += nuclear_norm_value(c);
      }
    }
  return out;
}

struct RegularizerTerm {
  double value = 0.0;
  std::vector<Vec2> grad;  // d/d d(x,t), field layout
};

namespace detail {

// Second difference along x of one component at pixel (x,y); one-sided at
// the border rows/columns (which is exact for affine fields).
template <class Get>
inline double second_diff_x(const Get& g, int x, int y, int nx) {
  if (nx < 3) return 0.0;
  if (x == 1) return g(1, y) - 2.0 * g(2, y) + g(3, y);
  if (x == nx) return g(nx - 2, y) - 2.0 * g(nx - 1, y) + g(nx, y);
  return g(x - 1, y) - 2.0 * g(x, y) + g(x + 1, y);
}

template <class Get>
inline double second_diff_y(const Get& g, int x, int y, int ny) {
  if (ny < 3) return 0.0;
  if (y == 1) return g(x, 1) - 2.0 * g(x, 2) + g(x, 3);
  if (y == ny) return g(x, ny - 2) - 2.0 * g(x, ny - 1) + g(x, ny);
  return g(x, y - 1) - 2.0 * g(x, y) + g(x, y + 1);
}

// Scatter the stencil adjoint: for each output location the same coefficients
// feed back into the inputs.
inline void scatter_second_x(std::vector<double>& acc, int nx, int x, int y, double w) {
  auto add = [&](int xx, int yy, double c) {
    acc[static_cast<std::size_t>(yy - 1) * nx + (xx - 1)] += c * w;
  };
  if (x == 1) {
    add(1, y, 1.0);
    add(2, y, -2.0);
    add(3, y, 1.0);
  } else if (x == nx) {
    add(nx - 2, y, 1.0);
    add(nx - 1, y, -2.0);
    add(nx, y, 1.0);
  } else {
    add(x - 1, y, 1.0);
    add(x, y, -2.0);
    add(x + 1, y, 1.0);
  }
}

inline void scatter_second_y(std::vector<double>& acc, int nx, int ny, int x, int y, double w) {
  auto add = [&](int xx, int yy, double c) {
    acc[static_cast<std::size_t>(yy - 1) * nx + (xx - 1)] += c * w;
  };
  if (y == 1) {
    add(x, 1, 1.0);
    add(x, 2, -2.0);
    add(x, 3, 1.0);
  } else if (y == ny) {
    add(x, ny - 2, 1.0);
    add(x, ny - 1, -2.0);
    add(x, ny, 1.0);
  } else {
    add(x, y - 1, 1.0);
    add(x, y, -2.0);
    add(x, y + 1, 1.0);
  }
}

// First difference along x: central in the interior, one-sided at borders.
template <class Get>
inline double first_diff_x(const Get& g, int x, int y, int nx) {
  if (x == 1) return g(2, y) - g(1, y);
  if (x == nx) return g(nx, y) - g(nx - 1, y);
  return 0.5 * (g(x + 1, y) - g(x - 1, y));
}

inline void scatter_first_x(std::vector<double>& acc, int nx, int x, int y, double w) {
  auto add = [&](int xx, double c) {
    acc[static_cast<std::size_t>(y - 1) * nx + (xx - 1)] += c * w;
  };
  if (x == 1) {
    add(2, 1.0);
    add(1, -1.0);
  } else if (x == nx) {
    add(nx, 1.0);
    add(nx - 1, -1.0);
  } else {
    add(x + 1, 0.5);
    add(x - 1, -0.5);
  }
}

}  // namespace detail

/// Bending energy, Eq-style raw sum over voxels and frames:
///   sum ||T_xx||^2 + 2 ||T_xy||^2 + ||T_yy||^2,
/// with T's second derivatives equal to d's. The gradient is the exact
/// adjoint of the finite-difference stencils.
inline RegularizerTerm spatial_regularizer(const DisplacementField& d, bool with_grad = true) {
  if (d.nx < 3 || d.ny < 3) throw DataError("spatial_regularizer: grid must be >= 3 per axis");
  const int nx = d.nx, ny = d.ny, nt = d.nt;
  RegularizerTerm out;
  if (with_grad) out.grad.assign(d.v.size(), Vec2{});

  const std::size_t npix = static_cast<std::size_t>(nx) * ny;
  std::vector<double> comp(npix), dxx(npix), dyy(npix), dx(npix), dxy(npix), acc, acc_dx;
  for (int t = 1; t <= nt; ++t) {
    for (int c = 0; c < 2; ++c) {
      for (int y = 1; y <= ny; ++y)
        for (int x = 1; x <= nx; ++x) {
          const Vec2& v = d.at(x, y, t);
          comp[static_cast<std::size_t>(y - 1) * nx + (x - 1)] = (c == 0) ? v.x : v.y;
        }
      auto g = [&](int x, int y) { return comp[static_cast<std::size_t>(y - 1) * nx + (x - 1)]; };
      for (int y = 1; y <= ny; ++y)
        for (int x = 1; x <= nx; ++x) {
          const std::size_t i = static_cast<std::size_t>(y - 1) * nx + (x - 1);
          dxx[i] = detail::second_diff_x(g, x, y, nx);
          dyy[i] = detail::second_diff_y(g, x, y, ny);
          dx[i] = detail::first_diff_x(g, x, y, nx);
        }
      auto gx = [&](int x, int y) { return dx[static_cast<std::size_t>(y - 1) * nx + (x - 1)]; };
      for (int y = 1; y <= ny; ++y)
        for (int x = 1; x <= nx; ++x) {
          // d/dy of d/dx, same one-sided policy along y
          const std::size_t i = static_cast<std::size_t>(y - 1) * nx + (x - 1);
          if (y == 1)
            dxy[i] = gx(x, 2) - gx(x, 1);
          else if (y == ny)
            dxy[i] = gx(x, ny) - gx(x, ny - 1);
          else
            dxy[i] = 0.5 * (gx(x, y + 1) - gx(x, y - 1));
        }
      for (std::size_t i = 0; i < npix; ++i)
        out.value += dxx[i] * dxx[i] + 2.0 * dxy[i] * dxy[i] + dyy[i] * dyy[i];

      if (!with_grad) continue;
      acc.assign(npix, 0.0);
      acc_dx.assign(npix, 0.0);
      for (int y = 1; y <= ny; ++y)
        for (int x = 1; x <= nx; ++x) {
          const std::size_t i = static_cast<std::size_t>(y - 1) * nx + (x - 1);
          detail::scatter_second_x(acc, nx, x, y, 2.0 * dxx[i]);
          detail::scatter_second_y(acc, nx, ny, x, y, 2.0 * dyy[i]);
          // mixed term: adjoint of Dy applied to dxy lands on dx, then Dx^T
          const double w = 4.0 * dxy[i];  // 2 * 2||T_xy||^2 weight
          if (y == 1) {
            acc_dx[i + nx] += w;
            acc_dx[i] -= w;
          } else if (y == ny) {
            acc_dx[i] += w;
            acc_dx[i - nx] -= w;
          } else {
            acc_dx[i + nx] += 0.5 * w;
            acc_dx[i - nx] -= 0.5 * w;
          }
        }
      for (int y = 1; y <= ny; ++y)
        for (int x = 1; x <= nx; ++x) {
          const std::size_t i = static_cast<std::size_t>(y - 1) * nx + (x - 1);
          if (acc_dx[i] != 0.0) detail::scatter_first_x(acc, nx, x, y, acc_dx[i]);
        }
      for (int y = 1; y <= ny; ++y)
        for (int x = 1; x <= nx; ++x) {
          const std::size_t i = static_cast<std::size_t>(y - 1) * nx + (x - 1);
          Vec2& gv = out.grad[d.index(x, y, t)];
          if (c == 0)
            gv.x += acc[i];
          else
            gv.y += acc[i];
        }
    }
  }
  return out;
}

/// Cyclic temporal second-order term: sum_t sum_x ||d(x,t+1) - 2 d(x,t) +
/// d(x,t-1)||^2 with frame indices wrapped modulo N_t.
inline RegularizerTerm temporal_regularizer(const DisplacementField& d, bool with_grad = true) {
  if (d.nt < 3) throw DataError("temporal_regularizer: needs at least 3 frames");
  const int nt = d.nt;
  RegularizerTerm out;
  if (with_grad) out.grad.assign(d.v.size(), Vec2{});

  const std::size_t npix = static_cast<std::size_t>(d.nx) * d.ny;
  std::vector<Vec2> r(static_cast<std::size_t>(nt) * npix);
  auto wrap = [nt](int t) { return ((t - 1) % nt + nt) % nt + 1; };
  for (int t = 1; t <= nt; ++t) {
    const int tp = wrap(t + 1), tm = wrap(t - 1);
    for (std::size_t i = 0; i < npix; ++i) {
      const Vec2 rv = d.v[(static_cast<std::size_t>(tp - 1)) * npix + i] -
                      2.0 * d.v[(static_cast<std::size_t>(t - 1)) * npix + i] +
                      d.v[(static_cast<std::size_t>(tm - 1)) * npix + i];
      r[(static_cast<std::size_t>(t - 1)) * npix + i] = rv;
      out.value += norm_sq(rv);
    }
  }
  if (with_grad) {
    for (int t = 1; t <= nt; ++t) {
      const int tp = wrap(t + 1), tm = wrap(t - 1);
      for (std::size_t i = 0; i < npix; ++i) {
        const Vec2 g = 2.0 * (r[(static_cast<std::size_t>(tm - 1)) * npix + i] -
                              2.0 * r[(static_cast<std::size_t>(t - 1)) * npix + i] +
                              r[(static_cast<std::size_t>(tp - 1)) * npix + i]);
        out.grad[(static_cast<std::size_t>(t - 1)) * npix + i] = g;
      }
    }
  }
  return out;
}

/// Full objective breakdown at one mesh configuration, with the analytic
/// gradient with respect to the control mesh.
struct CostReport {
  double total = 0.0;
  double dissim = 0.0;
  double r_spatial = 0.0;
  double r_temporal = 0.0;
  ControlMesh gradient;
};

struct CostValue {
  double total = 0.0;
  double dissim = 0.0;
  double r_spatial = 0.0;
  double r_temporal = 0.0;
};

namespace detail {

struct WarpedWithGrad {
  CineSequence warped;
  std::vector<Vec2> dwarp;  // derivative of each warped sample wrt its displacement
};

inline WarpedWithGrad warp_with_grad(const CineSequence& seq, const DisplacementField& disp) {
  WarpedWithGrad out;
  out.warped = CineSequence(seq.nx, seq.ny, seq.nt, seq.pixel_spacing);
  out.dwarp.resize(seq.data.size());
  for (int t = 1; t <= seq.nt; ++t) {
    const FrameView f = frame_view(seq, t);
    for (int y = 1; y <= seq.ny; ++y)
      for (int x = 1; x <= seq.nx; ++x) {
        const Vec2& d = disp.at(x, y, t);
        const SampledValueGrad s = bilinear_sample_grad(f, x + d.x, y + d.y);
        out.warped.at(x, y, t) = s.value;
        out.dwarp[seq.index(x, y, t)] = s.grad;
      }
  }
  return out;
}

// Accumulate a per-voxel 2-vector field into the control mesh through the
// B-spline tensor weights (the adjoint of dense_displacement).
inline void splat_to_mesh(const std::vector<Vec2>& field, int nx, int ny, ControlMesh& mesh) {
  const auto xs = axis_supports(nx, mesh.delta);
  const auto ys = axis_supports(ny, mesh.delta);
  for (int t = 1; t <= mesh.nt; ++t)
    for (int y = 1; y <= ny; ++y) {
      const auto& sy = ys[y - 1];
      for (int x = 1; x <= nx; ++x) {
        const Vec2& g = field[(static_cast<std::size_t>(t - 1) * ny + (y - 1)) * nx + (x - 1)];
        if (g.x == 0.0 && g.y == 0.0) continue;
        const auto& sx = xs[x - 1];
        for (int l = 0; l < 4; ++l) {
          const std::size_t row = mesh.index(sx.base, sy.base + l, t);
          const double wl = sy.w[l];
          mesh.phi[row] += (wl * sx.w[0]) * g;
          mesh.phi[row + 1] += (wl * sx.w[1]) * g;
          mesh.phi[row + 2] += (wl * sx.w[2]) * g;
          mesh.phi[row + 3] += (wl * sx.w[3]) * g;
        }
      }
    }
}

inline PatchLayout layout_for(const CineSequence& seq, const CostParams& params) {
  if (params.kind != MetricKind::llr) return PatchLayout{};
  const int p = std::min({params.patch, seq.nx, seq.ny});
  const int s = std::min(params.spacing, p);
  return build_patch_layout(seq.nx, seq.ny, p, s);
}

}  // namespace detail

/// Objective value only (line-search path: skips U/V factors and the splat).
inline CostValue total_cost_value(const ControlMesh& mesh, const CineSequence& seq,
                                  const CostParams& params) {
  params.validate();
  const DisplacementField dense = dense_displacement(mesh, seq.nx, seq.ny);
  const CineSequence warped = warp_sequence(seq, dense);
  const PatchLayout layout = detail::layout_for(seq, params);
  CostValue cv;
  cv.dissim = dissimilarity(warped, layout, params.kind, false).value;
  cv.r_spatial = params.lambda > 0.0 ? spatial_regularizer(dense, false).value : 0.0;
  cv.r_temporal = params.mu > 0.0 ? temporal_regularizer(dense, false).value : 0.0;
  cv.total = cv.dissim + params.lambda * cv.r_spatial + params.mu * cv.r_temporal;
  return cv;
}

/// Objective and its analytic mesh gradient. The image term chains
/// dD/d f~ through the exact derivative of the clamped bilinear warp, and all
/// per-voxel contributions (image + regularizers) are pushed into the mesh
/// through the B-spline weights in one pass.
inline CostReport total_cost(const ControlMesh& mesh, const CineSequence& seq,
                             const CostParams& params) {
  params.validate();
  if (!mesh.compatible_with(seq.nx, seq.ny) || mesh.nt != seq.nt)
    throw DataError("total_cost: mesh incompatible with sequence grid");

  const DisplacementField dense = dense_displacement(mesh, seq.nx, seq.ny);
  const detail::WarpedWithGrad w = detail::warp_with_grad(seq, dense);
  const PatchLayout layout = detail::layout_for(seq, params);
  const Dissimilarity dis = dissimilarity(w.warped, layout, params.kind, true);

  std::vector<Vec2> voxel_grad(dense.v.size());
  for (std::size_t i = 0; i < voxel_grad.size(); ++i) voxel_grad[i] = dis.grad[i] * w.dwarp[i];

  CostReport rep;
  rep.dissim = dis.value;
  if (params.lambda > 0.0) {
    const RegularizerTerm rs = spatial_regularizer(dense, true);
    rep.r_spatial = rs.value;
    for (std::size_t i = 0; i < voxel_grad.size(); ++i)
      voxel_grad[i] += params.lambda * rs.grad[i];
  }
  if (params.mu > 0.0) {
    const RegularizerTerm rt = temporal_regularizer(dense, true);
    rep.r_temporal = rt.value;
    for (std::size_t i = 0; i < voxel_grad.size(); ++i) voxel_grad[i] += params.mu * rt.grad[i];
  }
  rep.total = rep.dissim + params.lambda * rep.r_spatial + params.mu * rep.r_temporal;

  rep.gradient = ControlMesh(mesh.ni, mesh.nj, mesh.nt, mesh.delta);
  detail::splat_to_mesh(voxel_grad, seq.nx, seq.ny, rep.gradient);
  return rep;
}

/// Sum-of-squared-differences pairwise term: warp frame b by the single-frame
/// mesh and compare against frame a. Returns the SSD value and its mesh
/// gradient; the pairwise driver adds the spatial regularizer on top.
struct SsdResult {
  double value = 0.0;
  ControlMesh gradient;
};

inline SsdResult ssd_pairwise(const FrameView& a, const FrameView& b, const ControlMesh& mesh,
                              bool with_grad = true) {
  if (a.nx != b.nx || a.ny != b.ny) throw DataError("ssd_pairwise: frames share no grid");
  if (mesh.nt != 1) throw DataError("ssd_pairwise: mesh must have a single frame");
  if (!mesh.compatible_with(a.nx, a.ny)) throw DataError("ssd_pairwise: mesh incompatible");

  SsdResult out;
  std::vector<Vec2> voxel_grad;
  if (with_grad) voxel_grad.assign(static_cast<std::size_t>(a.nx) * a.ny, Vec2{});
  const auto xs = detail::axis_supports(a.nx, mesh.delta);
  const auto ys = detail::axis_supports(a.ny, mesh.delta);
  for (int y = 1; y <= a.ny; ++y) {
    const auto& sy = ys[y - 1];
    for (int x = 1; x <= a.nx; ++x) {
      const auto& sx = xs[x - 1];
      Vec2 d;
      for (int l = 0; l < 4; ++l) {
        const std::size_t row = mesh.index(sx.base, sy.base + l, 1);
        d += sy.w[l] * (sx.w[0] * mesh.phi[row] + sx.w[1] * mesh.phi[row + 1] +
                        sx.w[2] * mesh.phi[row + 2] + sx.w[3] * mesh.phi[row + 3]);
      }
      if (with_grad) {
        const SampledValueGrad s = bilinear_sample_grad(b, x + d.x, y + d.y);
        const double resid = s.value - a.at(x, y);
        out.value += resid * resid;
        voxel_grad[static_cast<std::size_t>(y - 1) * a.nx + (x - 1)] = (2.0 * resid) * s.grad;
      } else {
        const double resid = bilinear_sample(b, x + d.x, y + d.y) - a.at(x, y);
        out.value += resid * resid;
      }
    }
  }
  if (with_grad) {
    out.gradient = ControlMesh(mesh.ni, mesh.nj, 1, mesh.delta);
    detail::splat_to_mesh(voxel_grad, a.nx, a.ny, out.gradient);
  }
  return out;
}

}  // namespace cinestrain
