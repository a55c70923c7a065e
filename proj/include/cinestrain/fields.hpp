#pragma once

#include <cstddef>
#include <vector>

#include "cinestrain/common.hpp"

namespace cinestrain {

/// Dense per-pixel 2-vector data on an N_x x N_y grid, 1-based accessors.
struct Field2D {
  int nx = 0;
  int ny = 0;
  std::vector<Vec2> v;

  Field2D() = default;
  Field2D(int nx_, int ny_) : nx(nx_), ny(ny_), v(static_cast<std::size_t>(nx_) * ny_) {}

  Vec2& at(int x, int y) { return v[static_cast<std::size_t>(y - 1) * nx + (x - 1)]; }
  const Vec2& at(int x, int y) const { return v[static_cast<std::size_t>(y - 1) * nx + (x - 1)]; }
};

namespace detail {

// Shared storage for per-pixel, per-frame 2-vector stacks. Displacement and
// trajectory fields have identical layout but different semantics; the tag
// keeps them from being mixed up at interfaces.
template <class Tag>
struct VecFieldSeq {
  int nx = 0;
  int ny = 0;
  int nt = 0;
  std::vector<Vec2> v;

  VecFieldSeq() = default;
  VecFieldSeq(int nx_, int ny_, int nt_)
      : nx(nx_), ny(ny_), nt(nt_), v(static_cast<std::size_t>(nx_) * ny_ * nt_) {}

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t - 1) * ny + (y - 1)) * nx + (x - 1);
  }
  Vec2& at(int x, int y, int t) { return v[index(x, y, t)]; }
  const Vec2& at(int x, int y, int t) const { return v[index(x, y, t)]; }

  Field2D frame(int t) const {
    Field2D f(nx, ny);
    const std::size_t base = index(1, 1, t);
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = v[base + i];
    return f;
  }

  bool same_grid(int nx_, int ny_, int nt_) const { return nx == nx_ && ny == ny_ && nt == nt_; }
};

}  // namespace detail

/// d(x,t): per-frame displacements relative to the (implicit) common reference.
using DisplacementField = detail::VecFieldSeq<struct DisplacementTag>;

/// T_{1->t}(x) - x on the frame-1 pixel grid; frame-1 component is zero.
using TrajectoryField = detail::VecFieldSeq<struct TrajectoryTag>;

}  // namespace cinestrain
