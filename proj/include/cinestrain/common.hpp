#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace cinestrain {

// Error taxonomy mirrored by the CLI exit codes: DataError -> 2 (bad files,
// dimension mismatches, invalid parameters), NumericalError -> 3 (non-finite
// values, decomposition failures, diverged iterations).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(double s, Vec2 a) { return a *= s; }
inline Vec2 operator*(Vec2 a, double s) { return a *= s; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline double norm_sq(const Vec2& a) { return a.x * a.x + a.y * a.y; }

inline bool is_finite(const Vec2& a) { return std::isfinite(a.x) && std::isfinite(a.y); }

}  // namespace cinestrain
