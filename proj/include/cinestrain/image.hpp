#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cinestrain/common.hpp"
#include "cinestrain/fields.hpp"

namespace cinestrain {

/// A spatiotemporal scalar image stack: row-major within a frame, frame-major
/// overall. Coordinates are 1-based (1 <= x <= nx) throughout the library.
struct CineSequence {
  int nx = 0;
  int ny = 0;
  int nt = 0;
  double pixel_spacing = 1.0;  // mm/pixel, isotropic
  std::vector<double> data;

  CineSequence() = default;
  CineSequence(int nx_, int ny_, int nt_, double spacing = 1.0)
      : nx(nx_), ny(ny_), nt(nt_), pixel_spacing(spacing),
        data(static_cast<std::size_t>(nx_) * ny_ * nt_, 0.0) {}

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t - 1) * ny + (y - 1)) * nx + (x - 1);
  }
  double& at(int x, int y, int t) { return data[index(x, y, t)]; }
  double at(int x, int y, int t) const { return data[index(x, y, t)]; }

  void validate() const {
    if (nx < 8 || ny < 8 || nt < 2)
      throw DataError("CineSequence: grid must be at least 8x8 with 2 frames");
    if (pixel_spacing <= 0.0) throw DataError("CineSequence: pixel_spacing must be positive");
    if (data.size() != static_cast<std::size_t>(nx) * ny * nt)
      throw DataError("CineSequence: data size does not match dimensions");
    for (double v : data)
      if (!std::isfinite(v)) throw DataError("CineSequence: non-finite intensity");
  }
};

/// Read-only view of one frame of a CineSequence (or any contiguous image).
struct FrameView {
  const double* data = nullptr;
  int nx = 0;
  int ny = 0;

  double at(int x, int y) const { return data[static_cast<std::size_t>(y - 1) * nx + (x - 1)]; }
};

inline FrameView frame_view(const CineSequence& seq, int t) {
  return FrameView{seq.data.data() + seq.index(1, 1, t), seq.nx, seq.ny};
}

/// Per-voxel intensity gradient (d/dx, d/dy) of one frame, intensity per pixel.
struct GradientImage {
  int nx = 0;
  int ny = 0;
  std::vector<Vec2> g;

  GradientImage() = default;
  GradientImage(int nx_, int ny_) : nx(nx_), ny(ny_), g(static_cast<std::size_t>(nx_) * ny_) {}
  Vec2& at(int x, int y) { return g[static_cast<std::size_t>(y - 1) * nx + (x - 1)]; }
  const Vec2& at(int x, int y) const { return g[static_cast<std::size_t>(y - 1) * nx + (x - 1)]; }
};

namespace detail {

// Clamp a continuous coordinate to [1, n] and split into base index i
// (1 <= i <= n-1 whenever n > 1) plus fraction u in [0, 1].
inline void split_coord(double c, int n, int& i, double& u) {
  c = std::clamp(c, 1.0, static_cast<double>(n));
  i = static_cast<int>(std::floor(c));
  if (i >= n) i = n - 1;
  if (i < 1) i = 1;
  u = c - i;
}

}  // namespace detail

/// Bilinear interpolation with clamp-to-edge extension.
inline double bilinear_sample(const FrameView& f, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y))
    throw NumericalError("bilinear_sample: non-finite coordinate (corrupted displacement field)");
  if (f.nx == 1 && f.ny == 1) return f.at(1, 1);
  int i, j;
  double u, v;
  detail::split_coord(x, f.nx, i, u);
  detail::split_coord(y, f.ny, j, v);
  const double f00 = f.at(i, j), f10 = f.at(i + 1, j);
  const double f01 = f.at(i, j + 1), f11 = f.at(i + 1, j + 1);
  return (1.0 - v) * ((1.0 - u) * f00 + u * f10) + v * ((1.0 - u) * f01 + u * f11);
}

struct SampledValueGrad {
  double value = 0.0;
  Vec2 grad;  // exact derivative of the clamped bilinear interpolant
};

/// Bilinear sample together with the interpolant's own spatial derivative.
/// Outside the field of view the clamped sample is constant, so the
/// derivative in the clamped direction is zero.
inline SampledValueGrad bilinear_sample_grad(const FrameView& f, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y))
    throw NumericalError("bilinear_sample: non-finite coordinate (corrupted displacement field)");
  int i, j;
  double u, v;
  detail::split_coord(x, f.nx, i, u);
  detail::split_coord(y, f.ny, j, v);
  const double f00 = f.at(i, j), f10 = f.at(i + 1, j);
  const double f01 = f.at(i, j + 1), f11 = f.at(i + 1, j + 1);
  SampledValueGrad r;
  r.value = (1.0 - v) * ((1.0 - u) * f00 + u * f10) + v * ((1.0 - u) * f01 + u * f11);
  const bool in_x = x > 1.0 && x < static_cast<double>(f.nx);
  const bool in_y = y > 1.0 && y < static_cast<double>(f.ny);
  r.grad.x = in_x ? (1.0 - v) * (f10 - f00) + v * (f11 - f01) : 0.0;
  r.grad.y = in_y ? (1.0 - u) * (f01 - f00) + u * (f11 - f10) : 0.0;
  return r;
}

/// f~(x,t) = f(x + d(x,t), t), bilinear with clamped borders.
inline CineSequence warp_sequence(const CineSequence& seq, const DisplacementField& disp) {
  if (!disp.same_grid(seq.nx, seq.ny, seq.nt))
    throw DataError("warp_sequence: displacement grid does not match sequence");
  CineSequence out(seq.nx, seq.ny, seq.nt, seq.pixel_spacing);
  for (int t = 1; t <= seq.nt; ++t) {
    const FrameView f = frame_view(seq, t);
    for (int y = 1; y <= seq.ny; ++y)
      for (int x = 1; x <= seq.nx; ++x) {
        const Vec2& d = disp.at(x, y, t);
        out.at(x, y, t) = bilinear_sample(f, x + d.x, y + d.y);
      }
  }
  return out;
}

/// Central differences in the interior, one-sided at the borders.
inline GradientImage image_gradient(const FrameView& f) {
  if (f.nx < 2 || f.ny < 2) throw DataError("image_gradient: frame too small");
  GradientImage g(f.nx, f.ny);
  for (int y = 1; y <= f.ny; ++y)
    for (int x = 1; x <= f.nx; ++x) {
      double gx, gy;
      if (x == 1)
        gx = f.at(2, y) - f.at(1, y);
      else if (x == f.nx)
        gx = f.at(f.nx, y) - f.at(f.nx - 1, y);
      else
        gx = 0.5 * (f.at(x + 1, y) - f.at(x - 1, y));
      if (y == 1)
        gy = f.at(x, 2) - f.at(x, 1);
      else if (y == f.ny)
        gy = f.at(x, f.ny) - f.at(x, f.ny - 1);
      else
        gy = 0.5 * (f.at(x, y + 1) - f.at(x, y - 1));
      g.at(x, y) = Vec2{gx, gy};
    }
  return g;
}

namespace detail {

// 5-tap binomial [1,4,6,4,1]/16 along one axis, replicated borders.
inline void binomial_pass(std::vector<double>& img, int nx, int ny, bool along_x) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  std::vector<double> out(img.size());
  auto idx = [nx](int x, int y) { return static_cast<std::size_t>(y) * nx + x; };  // 0-based here
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (int o = -2; o <= 2; ++o) {
        int xx = x, yy = y;
        if (along_x)
          xx = std::clamp(x + o, 0, nx - 1);
        else
          yy = std::clamp(y + o, 0, ny - 1);
        acc += k[o + 2] * img[idx(xx, yy)];
      }
      out[idx(x, y)] = acc;
    }
  img.swap(out);
}

// Catmull-Rom weights for fraction u in [0,1].
inline void catmull_rom_weights(double u, double w[4]) {
  const double u2 = u * u, u3 = u2 * u;
  w[0] = 0.5 * (-u3 + 2.0 * u2 - u);
  w[1] = 0.5 * (3.0 * u3 - 5.0 * u2 + 2.0);
  w[2] = 0.5 * (-3.0 * u3 + 4.0 * u2 + u);
  w[3] = 0.5 * (u3 - u2);
}

inline double catmull_rom_sample(const std::vector<double>& img, int nx, int ny, double x, double y) {
  // 0-based continuous coordinates, clamped taps.
  const int ix = static_cast<int>(std::floor(x));
  const int iy = static_cast<int>(std::floor(y));
  double wx[4], wy[4];
  catmull_rom_weights(x - ix, wx);
  catmull_rom_weights(y - iy, wy);
  double acc = 0.0;
  for (int b = 0; b < 4; ++b) {
    const int yy = std::clamp(iy - 1 + b, 0, ny - 1);
    double row = 0.0;
    for (int a = 0; a < 4; ++a) {
      const int xx = std::clamp(ix - 1 + a, 0, nx - 1);
      row += wx[a] * img[static_cast<std::size_t>(yy) * nx + xx];
    }
    acc += wy[b] * row;
  }
  return acc;
}

}  // namespace detail

/// Binomial low-pass (one pass per octave) followed by Catmull-Rom resampling
/// onto a ceil(N/factor) grid. The temporal axis is never downsampled.
/// Output sample k sits at input coordinate factor*(k-1)+1 (corner aligned).
inline CineSequence downsample(const CineSequence& seq, int factor) {
  if (factor < 1) throw DataError("downsample: factor must be >= 1");
  if (factor == 1) return seq;
  const int onx = (seq.nx + factor - 1) / factor;
  const int ony = (seq.ny + factor - 1) / factor;
  if (onx < 4 || ony < 4) throw DataError("downsample: result smaller than 4 pixels per axis");
  int octaves = 0;
  for (int f = factor; f > 1; f /= 2) ++octaves;

  CineSequence out(onx, ony, seq.nt, seq.pixel_spacing * factor);
  std::vector<double> frame(static_cast<std::size_t>(seq.nx) * seq.ny);
  for (int t = 1; t <= seq.nt; ++t) {
    std::copy_n(seq.data.begin() + static_cast<std::ptrdiff_t>(seq.index(1, 1, t)), frame.size(),
                frame.begin());
    for (int o = 0; o < octaves; ++o) {
      detail::binomial_pass(frame, seq.nx, seq.ny, true);
      detail::binomial_pass(frame, seq.nx, seq.ny, false);
    }
    for (int y = 1; y <= ony; ++y)
      for (int x = 1; x <= onx; ++x) {
        const double sx = static_cast<double>(factor) * (x - 1);  // 0-based source coord
        const double sy = static_cast<double>(factor) * (y - 1);
        out.at(x, y, t) = detail::catmull_rom_sample(frame, seq.nx, seq.ny, sx, sy);
      }
  }
  return out;
}

/// Coarse-to-fine pyramid: level L-1 is the input, level k is
/// downsample(input, 2^(L-1-k)).
inline std::vector<CineSequence> build_pyramid(const CineSequence& seq, int levels) {
  if (levels < 1) throw DataError("build_pyramid: levels must be >= 1");
  const int top_factor = 1 << (levels - 1);
  if ((seq.nx + top_factor - 1) / top_factor < 4 || (seq.ny + top_factor - 1) / top_factor < 4)
    throw DataError("build_pyramid: too many levels for the image size");
  std::vector<CineSequence> pyr;
  pyr.reserve(levels);
  for (int k = 0; k < levels; ++k) pyr.push_back(downsample(seq, 1 << (levels - 1 - k)));
  return pyr;
}

/// Min-max normalization to [0,1] over the whole sequence. A constant
/// sequence maps to all zeros.
inline CineSequence normalize_intensities(const CineSequence& seq) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : seq.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CineSequence out = seq;
  const double range = hi - lo;
  if (range <= 0.0) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
  }
  for (double& v : out.data) v = (v - lo) / range;
  return out;
}

}  // namespace cinestrain
