#pragma once

// Shared generators for the test suites. Everything is seeded so test runs
// are reproducible.

#include <random>
#include <vector>

#include "cinestrain/cinestrain.hpp"

namespace test_support {

using cinestrain::CineSequence;
using cinestrain::ControlMesh;
using cinestrain::DisplacementField;
using cinestrain::Vec2;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

/// Smooth textured sequence: sum of sinusoids, frame-dependent phase.
inline CineSequence smooth_sequence(int nx, int ny, int nt, std::uint64_t seed,
                                    bool time_varying = true) {
  std::mt19937_64 gen = rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 6.28);
  const double p1 = uni(gen), p2 = uni(gen), p3 = uni(gen);
  CineSequence seq(nx, ny, nt, 1.0);
  for (int t = 1; t <= nt; ++t) {
    const double tp = time_varying ? 0.3 * t : 0.0;
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x)
        seq.at(x, y, t) = 0.5 + 0.2 * std::sin(0.55 * x + 0.31 * y + p1 + tp) +
                          0.15 * std::sin(-0.23 * x + 0.61 * y + p2) +
                          0.1 * std::sin(0.4 * x - 0.17 * y + p3 + 0.5 * tp);
  }
  return seq;
}

inline CineSequence random_sequence(int nx, int ny, int nt, std::uint64_t seed) {
  std::mt19937_64 gen = rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  CineSequence seq(nx, ny, nt, 1.0);
  for (double& v : seq.data) v = uni(gen);
  return seq;
}

/// Smooth random displacement field with amplitude `amp` px.
inline DisplacementField smooth_field(int nx, int ny, int nt, double amp, std::uint64_t seed) {
  std::mt19937_64 gen = rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 6.28);
  DisplacementField d(nx, ny, nt);
  for (int t = 1; t <= nt; ++t) {
    const double p1 = uni(gen), p2 = uni(gen);
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x)
        d.at(x, y, t) = Vec2{amp * std::sin(0.17 * x + 0.23 * y + p1),
                             amp * std::cos(0.21 * x - 0.13 * y + p2)};
  }
  return d;
}

inline ControlMesh random_mesh(int nx, int ny, int nt, double delta, double amp,
                               std::uint64_t seed) {
  ControlMesh mesh = ControlMesh::for_grid(nx, ny, nt, delta);
  std::mt19937_64 gen = rng(seed);
  std::uniform_real_distribution<double> uni(-amp, amp);
  for (Vec2& p : mesh.phi) p = Vec2{uni(gen), uni(gen)};
  return mesh;
}

/// Random mesh with values in [lo, hi]. B-spline weights are a convex
/// combination, so every displacement lands in [lo, hi] too; with
/// 0 < lo < hi < 1 the warp samples stay strictly inside interpolation
/// cells, where the bilinearly warped cost is differentiable.
inline ControlMesh random_mesh_in(int nx, int ny, int nt, double delta, double lo, double hi,
                                  std::uint64_t seed) {
  ControlMesh mesh = ControlMesh::for_grid(nx, ny, nt, delta);
  std::mt19937_64 gen = rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  for (Vec2& p : mesh.phi) p = Vec2{uni(gen), uni(gen)};
  return mesh;
}

}  // namespace test_support
