#include <catch2/catch_amalgamated.hpp>

#include "cinestrain/phantom.hpp"

using namespace cinestrain;

TEST_CASE("zero amplitude gives identical frames before noise") {
  PhantomSpec spec;
  spec.size = 32;
  spec.frames = 6;
  spec.r_inner = 5.0;
  spec.r_outer = 9.0;
  spec.taper = 5.0;
  spec.amplitude = 0.0;
  spec.noise_sigma = 0.0;
  auto [seq, motion] = generate_phantom(spec);
  for (int t = 2; t <= 6; ++t)
    for (int y = 1; y <= 32; ++y)
      for (int x = 1; x <= 32; ++x) CHECK(seq.at(x, y, t) == seq.at(x, y, 1));
  for (const Vec2& v : motion.trajectory.v) CHECK(norm(v) == 0.0);
}

TEST_CASE("incompressible closed-form radius map") {
  PhantomSpec spec;  // r_i = 10, A = 0.2, 24 frames -> s(13) = 0.8
  auto [seq, motion] = generate_phantom(spec);
  const int mid = spec.frames / 2 + 1;
  CHECK(motion.profile(1) == 1.0);
  CHECK(motion.profile(mid) == Catch::Approx(0.8).epsilon(1e-14));
  CHECK(motion.deformed_radius(10.0, mid) == Catch::Approx(8.0).epsilon(1e-12));
  // sqrt(64 + 100 - 100) = 8 at R = r_i; interior point R = 14:
  CHECK(motion.deformed_radius(14.0, mid) ==
        Catch::Approx(std::sqrt(64.0 + 196.0 - 100.0)).epsilon(1e-12));
  // inverse round trip across all branches
  for (double R : {2.0, 7.0, 10.0, 13.0, 18.0, 20.0, 23.9, 30.0})
    CHECK(motion.material_radius(motion.deformed_radius(R, mid), mid) ==
          Catch::Approx(R).margin(1e-9));
}

TEST_CASE("incompressible annulus area is preserved") {
  PhantomSpec spec;
  auto [seq, motion] = generate_phantom(spec);
  for (int t = 1; t <= spec.frames; ++t) {
    const double ri_t = motion.inner_radius(t);
    const double ro_t = motion.deformed_radius(spec.r_outer, t);
    const double area_t = ro_t * ro_t - ri_t * ri_t;
    const double area_0 = spec.r_outer * spec.r_outer - spec.r_inner * spec.r_inner;
    CHECK(area_t == Catch::Approx(area_0).epsilon(1e-9));
  }
}

TEST_CASE("scale mode strain is spatially uniform") {
  PhantomSpec spec;
  spec.mode = PhantomMode::scale;
  auto [seq, motion] = generate_phantom(spec);
  // s = 0.85 happens at no integer frame; evaluate the closed form directly
  const double s = 0.85;
  const double want = 0.5 * (s * s - 1.0);
  CHECK(want == Catch::Approx(-0.139).margin(5e-4));
  // at integer frames the maps agree across radii
  const int t = 7;
  const double e1 = motion.radial_strain(11.0, t);
  const double e2 = motion.radial_strain(16.0, t);
  CHECK(e1 == Catch::Approx(e2).margin(1e-12));
  CHECK(motion.circumferential_strain(12.0, t) == Catch::Approx(e1).margin(1e-12));
}

TEST_CASE("rasterized trajectory matches the closed-form map") {
  PhantomSpec spec;
  auto [seq, motion] = generate_phantom(spec);
  for (int t : {1, 5, 13, 24})
    for (int y = 1; y <= spec.size; y += 3)
      for (int x = 1; x <= spec.size; x += 3) {
        if (!motion.mask.at(x, y)) continue;
        const Vec2 X{double(x), double(y)};
        const Vec2 want = motion.map(X, t) - X;
        const Vec2 got = motion.trajectory.at(x, y, t);
        CHECK(got.x == Catch::Approx(want.x).margin(1e-9));
        CHECK(got.y == Catch::Approx(want.y).margin(1e-9));
      }
  // frame 1 must be identically zero
  for (int y = 1; y <= spec.size; ++y)
    for (int x = 1; x <= spec.size; ++x) CHECK(norm(motion.trajectory.at(x, y, 1)) == 0.0);
}

TEST_CASE("analytic strain agrees with numerically differentiated rho") {
  PhantomSpec spec;
  auto [seq, motion] = generate_phantom(spec);
  for (int t : {3, 13, 20})
    for (double R : {10.5, 12.0, 15.0, 17.5}) {
      const double h = 1e-4 * R;
      const double drho = (motion.deformed_radius(R + h, t) - motion.deformed_radius(R - h, t)) /
                          (2.0 * h);
      const double want_rr = 0.5 * (drho * drho - 1.0);
      CHECK(motion.radial_strain(R, t) == Catch::Approx(want_rr).margin(1e-6));
      const double lam_c = motion.deformed_radius(R, t) / R;
      CHECK(motion.circumferential_strain(R, t) ==
            Catch::Approx(0.5 * (lam_c * lam_c - 1.0)).margin(1e-12));
    }
}

TEST_CASE("motion profile closes the cycle") {
  PhantomSpec spec;
  auto [seq, motion] = generate_phantom(spec);
  CHECK(motion.profile(spec.frames + 1) == Catch::Approx(1.0).margin(1e-15));
  // frames 2 and N_t are symmetric around the cycle
  CHECK(motion.profile(2) == Catch::Approx(motion.profile(spec.frames)).epsilon(1e-12));
}

TEST_CASE("frame 1 equals the clean texture; noise is seeded and additive") {
  PhantomSpec spec;
  spec.size = 32;
  spec.frames = 4;
  spec.r_inner = 5.0;
  spec.r_outer = 9.0;
  spec.taper = 5.0;
  PhantomSpec clean = spec;
  clean.noise_sigma = 0.0;
  auto [noisy, m1] = generate_phantom(spec);
  auto [pure, m2] = generate_phantom(clean);
  auto [noisy2, m3] = generate_phantom(spec);
  CHECK(noisy.data == noisy2.data);  // deterministic under the seed
  double range = 0.0;
  {
    double lo = pure.data[0], hi = pure.data[0];
    for (double v : pure.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    range = hi - lo;
  }
  double max_dev = 0.0;
  for (std::size_t i = 0; i < pure.data.size(); ++i)
    max_dev = std::max(max_dev, std::abs(noisy.data[i] - pure.data[i]));
  CHECK(max_dev > 0.0);
  CHECK(max_dev <= 6.0 * spec.noise_sigma * range);

  PhantomSpec other = spec;
  other.seed = 777;
  auto [different, m4] = generate_phantom(other);
  CHECK(different.data != noisy.data);
}

TEST_CASE("phantom mask is the annulus") {
  PhantomSpec spec;
  auto [seq, motion] = generate_phantom(spec);
  const Vec2 c = spec.center();
  for (int y = 1; y <= spec.size; ++y)
    for (int x = 1; x <= spec.size; ++x) {
      const double R = std::hypot(x - c.x, y - c.y);
      CHECK(motion.mask.at(x, y) == (R >= spec.r_inner && R <= spec.r_outer));
    }
  CHECK(motion.mask.centroid().x == Catch::Approx(c.x).margin(0.5));
}

TEST_CASE("invalid specs are rejected") {
  PhantomSpec bad;
  bad.r_inner = 20.0;
  bad.r_outer = 18.0;
  CHECK_THROWS_AS(generate_phantom(bad), DataError);
  PhantomSpec big;
  big.r_outer = 30.0;  // 30 >= 64/2 - 6
  CHECK_THROWS_AS(generate_phantom(big), DataError);
  PhantomSpec amp;
  amp.amplitude = 1.0;
  CHECK_THROWS_AS(generate_phantom(amp), DataError);
}
