#include <catch2/catch_amalgamated.hpp>

#include "cinestrain/image.hpp"
#include "test_support.hpp"

using namespace cinestrain;
using test_support::smooth_field;
using test_support::smooth_sequence;

namespace {

CineSequence ramp_sequence(int nx, int ny, int nt, double ax, double ay, double c) {
  CineSequence seq(nx, ny, nt, 1.0);
  for (int t = 1; t <= nt; ++t)
    for (int y = 1; y <= ny; ++y)
      for (int x = 1; x <= nx; ++x) seq.at(x, y, t) = ax * x + ay * y + c;
  return seq;
}

}  // namespace

TEST_CASE("bilinear_sample reproduces grid samples and midpoints") {
  CineSequence seq = smooth_sequence(12, 10, 2, 7);
  const FrameView f = frame_view(seq, 1);
  CHECK(bilinear_sample(f, 3.0, 5.0) == seq.at(3, 5, 1));

  CineSequence two(8, 8, 2, 1.0);
  two.at(4, 4, 1) = 0.0;
  two.at(5, 4, 1) = 2.0;
  CHECK(bilinear_sample(frame_view(two, 1), 4.5, 4.0) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("bilinear_sample clamps to the border pixel") {
  CineSequence seq = smooth_sequence(9, 9, 2, 3);
  const FrameView f = frame_view(seq, 1);
  CHECK(bilinear_sample(f, -4.0, -4.0) == seq.at(1, 1, 1));
  CHECK(bilinear_sample(f, 100.0, 3.0) == Catch::Approx(seq.at(9, 3, 1)).margin(1e-15));
}

TEST_CASE("bilinear_sample rejects non-finite coordinates") {
  CineSequence seq = smooth_sequence(8, 8, 2, 1);
  CHECK_THROWS_AS(bilinear_sample(frame_view(seq, 1), std::nan(""), 2.0), NumericalError);
}

TEST_CASE("bilinear_sample is exact for affine frames in the interior") {
  CineSequence seq = ramp_sequence(10, 10, 1, 0.7, -0.3, 2.0);
  const FrameView f = frame_view(seq, 1);
  for (double x : {1.25, 3.7, 8.99})
    for (double y : {2.2, 5.5, 9.01})
      CHECK(bilinear_sample(f, x, y) == Catch::Approx(0.7 * x - 0.3 * y + 2.0).epsilon(1e-13));
}

TEST_CASE("warp_sequence with the zero field is the identity, bit-exact") {
  CineSequence seq = smooth_sequence(16, 14, 3, 11);
  DisplacementField zero(16, 14, 3);
  CineSequence out = warp_sequence(seq, zero);
  CHECK(out.data == seq.data);
  CHECK(out.pixel_spacing == seq.pixel_spacing);
}

TEST_CASE("warp_sequence translates a linear ramp") {
  CineSequence seq = ramp_sequence(12, 12, 2, 1.0, 0.0, 0.0);  // f = x
  DisplacementField d(12, 12, 2);
  for (Vec2& v : d.v) v = Vec2{1.0, 0.0};
  CineSequence out = warp_sequence(seq, d);
  for (int y = 1; y <= 12; ++y) {
    for (int x = 1; x <= 11; ++x) CHECK(out.at(x, y, 1) == Catch::Approx(x + 1.0));
    CHECK(out.at(12, y, 1) == Catch::Approx(12.0));  // clamped at the right border
  }
}

TEST_CASE("warp_sequence matches a naive per-pixel oracle") {
  CineSequence seq = smooth_sequence(20, 18, 4, 21);
  DisplacementField d = smooth_field(20, 18, 4, 1.3, 22);
  CineSequence out = warp_sequence(seq, d);

  // independent re-implementation of the warp definition
  auto naive_bilinear = [](const CineSequence& s, double x, double y, int t) {
    x = std::min(std::max(x, 1.0), double(s.nx));
    y = std::min(std::max(y, 1.0), double(s.ny));
    int i = std::min(int(std::floor(x)), s.nx - 1);
    int j = std::min(int(std::floor(y)), s.ny - 1);
    double u = x - i, v = y - j;
    return (1 - u) * (1 - v) * s.at(i, j, t) + u * (1 - v) * s.at(i + 1, j, t) +
           (1 - u) * v * s.at(i, j + 1, t) + u * v * s.at(i + 1, j + 1, t);
  };
  for (int t = 1; t <= 4; ++t)
    for (int y = 1; y <= 18; ++y)
      for (int x = 1; x <= 20; ++x) {
        const Vec2& dv = d.at(x, y, t);
        CHECK(out.at(x, y, t) ==
              Catch::Approx(naive_bilinear(seq, x + dv.x, y + dv.y, t)).margin(1e-12));
      }
}

TEST_CASE("warp_sequence validates the grid") {
  CineSequence seq = smooth_sequence(10, 10, 2, 5);
  DisplacementField wrong(10, 9, 2);
  CHECK_THROWS_AS(warp_sequence(seq, wrong), DataError);
}

TEST_CASE("image_gradient of a constant frame is zero") {
  CineSequence seq(8, 8, 1, 1.0);
  for (double& v : seq.data) v = 3.25;
  GradientImage g = image_gradient(frame_view(seq, 1));
  for (const Vec2& v : g.g) {
    CHECK(v.x == 0.0);
    CHECK(v.y == 0.0);
  }
}

TEST_CASE("image_gradient is exact on ramps and squares") {
  CineSequence ramp = ramp_sequence(10, 10, 1, 2.0, 0.0, 0.0);  // f = 2x
  GradientImage g = image_gradient(frame_view(ramp, 1));
  for (int y = 1; y <= 10; ++y)
    for (int x = 2; x <= 9; ++x) CHECK(g.at(x, y).x == Catch::Approx(2.0));

  CineSequence sq(12, 8, 1, 1.0);
  for (int y = 1; y <= 8; ++y)
    for (int x = 1; x <= 12; ++x) sq.at(x, y, 1) = double(x) * x;
  GradientImage gs = image_gradient(frame_view(sq, 1));
  CHECK(gs.at(5, 4).x == Catch::Approx((36.0 - 16.0) / 2.0));  // = 10
}

TEST_CASE("downsample factor 1 returns the input") {
  CineSequence seq = smooth_sequence(16, 16, 3, 2);
  CineSequence out = downsample(seq, 1);
  CHECK(out.data == seq.data);
}

TEST_CASE("downsample keeps constants and sizes") {
  CineSequence seq(64, 64, 2, 1.0);
  for (double& v : seq.data) v = 0.625;
  CineSequence out = downsample(seq, 2);
  CHECK(out.nx == 32);
  CHECK(out.ny == 32);
  CHECK(out.nt == 2);
  CHECK(out.pixel_spacing == Catch::Approx(2.0));
  for (double v : out.data) CHECK(v == Catch::Approx(0.625).margin(1e-12));
}

TEST_CASE("downsample of odd sizes uses ceil") {
  CineSequence seq = smooth_sequence(9, 11, 2, 4);
  CineSequence out = downsample(seq, 2);
  CHECK(out.nx == 5);
  CHECK(out.ny == 6);
}

TEST_CASE("downsample rejects results that are too small") {
  CineSequence seq = smooth_sequence(8, 8, 2, 4);
  CHECK_THROWS_AS(downsample(seq, 4), DataError);
}

TEST_CASE("build_pyramid level structure") {
  CineSequence seq = smooth_sequence(128, 128, 2, 9);
  seq.pixel_spacing = 1.5;
  auto pyr = build_pyramid(seq, 3);
  REQUIRE(pyr.size() == 3);
  CHECK(pyr[0].nx == 32);
  CHECK(pyr[1].nx == 64);
  CHECK(pyr[2].nx == 128);
  CHECK(pyr[0].pixel_spacing == Catch::Approx(6.0));
  CHECK(pyr[2].data == seq.data);

  auto single = build_pyramid(seq, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0].data == seq.data);

  CineSequence small = smooth_sequence(8, 8, 2, 10);
  CHECK_THROWS_AS(build_pyramid(small, 3), DataError);
}

TEST_CASE("normalize_intensities maps to [0,1]") {
  CineSequence seq = smooth_sequence(12, 12, 3, 13);
  for (double& v : seq.data) v = 5.0 + 3.0 * v;
  CineSequence out = normalize_intensities(seq);
  double lo = 1e9, hi = -1e9;
  for (double v : out.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == Catch::Approx(0.0).margin(1e-15));
  CHECK(hi == Catch::Approx(1.0).margin(1e-15));
}
