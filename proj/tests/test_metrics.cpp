#include <catch2/catch_amalgamated.hpp>
#include <numbers>
#include <random>

#include "cinestrain/metrics.hpp"
#include "cinestrain/phantom.hpp"
#include "test_support.hpp"

using namespace cinestrain;

namespace {

MyoMask disk_mask(int n, double cx, double cy, double r) {
  MyoMask m(n, n);
  for (int y = 1; y <= n; ++y)
    for (int x = 1; x <= n; ++x) m.set(x, y, std::hypot(x - cx, y - cy) <= r);
  return m;
}

Contour circle(double cx, double cy, double r, int npts, int frame = 1) {
  Contour c;
  c.frame = frame;
  for (int k = 0; k < npts; ++k) {
    const double a = 2.0 * std::numbers::pi * k / npts;
    c.points.push_back(Vec2{cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return c;
}

}  // namespace

TEST_CASE("epe on identical and offset fields") {
  TrajectoryField a(16, 16, 4), b(16, 16, 4);
  MyoMask mask = disk_mask(16, 8.5, 8.5, 5.0);
  CHECK(epe(a, b, mask, EpeFrames::all, 2, 1.5).px == 0.0);

  for (Vec2& v : a.v) v = Vec2{1.0, 0.0};
  EpeResult r = epe(a, b, mask, EpeFrames::all, 2, 1.5);
  CHECK(r.px == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(r.mm == Catch::Approx(1.5).epsilon(1e-12));
  CHECK(r.mm == Catch::Approx(r.px * 1.5).epsilon(1e-15));

  TrajectoryField bad(15, 16, 4);
  CHECK_THROWS_AS(epe(a, bad, mask, EpeFrames::all, 2, 1.5), DataError);
}

TEST_CASE("epe matches a double-loop oracle on random fields") {
  std::mt19937_64 gen(2718);
  std::uniform_real_distribution<double> uni(-2, 2);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 8, nt = 3;
    TrajectoryField a(n, n, nt), b(n, n, nt);
    for (Vec2& v : a.v) v = Vec2{uni(gen), uni(gen)};
    for (Vec2& v : b.v) v = Vec2{uni(gen), uni(gen)};
    MyoMask mask(n, n);
    int cnt = 0;
    for (int y = 1; y <= n; ++y)
      for (int x = 1; x <= n; ++x) {
        const bool in = (uni(gen) > 0.0);
        mask.set(x, y, in);
        cnt += in;
      }
    if (cnt == 0) {
      mask.set(4, 4, true);
      cnt = 1;
    }
    const int es = 2;
    double sum_all = 0.0, sum_es = 0.0;
    for (int t = 1; t <= nt; ++t)
      for (int y = 1; y <= n; ++y)
        for (int x = 1; x <= n; ++x) {
          if (!mask.at(x, y)) continue;
          const double dx = a.at(x, y, t).x - b.at(x, y, t).x;
          const double dy = a.at(x, y, t).y - b.at(x, y, t).y;
          const double d = std::sqrt(dx * dx + dy * dy);
          sum_all += d;
          if (t == es) sum_es += d;
        }
    CHECK(epe(a, b, mask, EpeFrames::all, es, 1.0).px ==
          Catch::Approx(sum_all / (3.0 * cnt)).margin(1e-9));
    CHECK(epe(a, b, mask, EpeFrames::end_systole, es, 1.0).px ==
          Catch::Approx(sum_es / cnt).margin(1e-9));
  }
}

TEST_CASE("vse basics and oracle") {
  const int n = 10, nt = 3;
  MyoMask mask = disk_mask(n, 5.5, 5.5, 3.5);
  std::vector<double> a(n * n * nt, 0.1), b(n * n * nt, 0.1);
  CHECK(vse(a, b, n, n, nt, mask, 2) == 0.0);
  for (double& v : a) v += 0.02;
  CHECK(vse(a, b, n, n, nt, mask, 2) == Catch::Approx(2.0).epsilon(1e-12));

  std::mt19937_64 gen(3141);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (int rep = 0; rep < 100; ++rep) {
    for (double& v : a) v = uni(gen);
    for (double& v : b) v = uni(gen);
    double sum = 0.0;
    std::size_t cnt = 0;
    for (int y = 1; y <= n; ++y)
      for (int x = 1; x <= n; ++x) {
        if (!mask.at(x, y)) continue;
        const std::size_t i = (std::size_t(1) * n + (y - 1)) * n + (x - 1);
        sum += std::abs(a[i] - b[i]);
        ++cnt;
      }
    CHECK(vse(a, b, n, n, nt, mask, 2) == Catch::Approx(100.0 * sum / cnt).margin(1e-9));
  }
}

TEST_CASE("gse absolute difference") {
  CHECK(gse(-15.0, -18.0) == Catch::Approx(3.0));
  CHECK(gse(4.0, 4.0) == 0.0);
}

TEST_CASE("track_contour identity and scaling") {
  TrajectoryField ident(64, 64, 3);
  Contour c = circle(32.0, 32.0, 10.0, 128);
  Contour moved = track_contour(c, ident, 3);
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    CHECK(moved.points[k].x == Catch::Approx(c.points[k].x).margin(1e-12));
    CHECK(moved.points[k].y == Catch::Approx(c.points[k].y).margin(1e-12));
  }

  // uniform scaling about the center maps r=10 circle to r=8
  TrajectoryField scale(64, 64, 2);
  for (int y = 1; y <= 64; ++y)
    for (int x = 1; x <= 64; ++x)
      scale.at(x, y, 2) = Vec2{0.8 * (x - 32.0) + 32.0 - x, 0.8 * (y - 32.0) + 32.0 - y};
  Contour scaled = track_contour(c, scale, 2);
  for (const Vec2& p : scaled.points)
    CHECK(std::hypot(p.x - 32.0, p.y - 32.0) == Catch::Approx(8.0).margin(1e-9));
}

TEST_CASE("tracked phantom endocardium lands on the contracted circle") {
  PhantomSpec spec;
  auto [seq, motion] = generate_phantom(spec);
  const int es = spec.frames / 2 + 1;
  Contour endo = circle(spec.center().x, spec.center().y, spec.r_inner, 256);
  Contour tracked = track_contour(endo, motion.trajectory, es);
  double rms = 0.0;
  for (const Vec2& p : tracked.points) {
    const double r = std::hypot(p.x - spec.center().x, p.y - spec.center().y);
    rms += (r - 8.0) * (r - 8.0);
  }
  rms = std::sqrt(rms / tracked.points.size());
  CHECK(rms <= 0.3);
}

TEST_CASE("contour_distance identities and concentric circles") {
  Contour a = circle(20.0, 20.0, 10.0, 720);
  CHECK(contour_distance(a, a, 1.0) == Catch::Approx(0.0).margin(1e-12));

  Contour b = circle(20.0, 20.0, 11.0, 720);
  CHECK(contour_distance(a, b, 1.0) == Catch::Approx(1.0).margin(2e-3));
  CHECK(contour_distance(a, b, 1.5) == Catch::Approx(1.5).margin(3e-3));

  Contour degenerate;
  CHECK_THROWS_AS(contour_distance(a, degenerate, 1.0), DataError);
}

TEST_CASE("contour_distance matches a brute-force point-to-segment oracle") {
  std::mt19937_64 gen(999);
  std::uniform_real_distribution<double> uni(2.0, 30.0);
  auto dist_pt_seg = [](Vec2 p, Vec2 s0, Vec2 s1) {
    const Vec2 d = s1 - s0;
    const double l2 = norm_sq(d);
    double u = l2 > 0 ? dot(p - s0, d) / l2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    return norm(p - (s0 + u * d));
  };
  for (int rep = 0; rep < 100; ++rep) {
    Contour a, b;
    const int na = 3 + int(uni(gen)) % 6, nb = 3 + int(uni(gen)) % 6;
    for (int k = 0; k < na; ++k) a.points.push_back(Vec2{uni(gen), uni(gen)});
    for (int k = 0; k < nb; ++k) b.points.push_back(Vec2{uni(gen), uni(gen)});
    double sab = 0.0;
    for (const Vec2& p : a.points) {
      double best = 1e300;
      for (std::size_t s = 0; s < b.points.size(); ++s)
        best = std::min(best, dist_pt_seg(p, b.points[s], b.points[(s + 1) % b.points.size()]));
      sab += best;
    }
    double sba = 0.0;
    for (const Vec2& p : b.points) {
      double best = 1e300;
      for (std::size_t s = 0; s < a.points.size(); ++s)
        best = std::min(best, dist_pt_seg(p, a.points[s], a.points[(s + 1) % a.points.size()]));
      sba += best;
    }
    const double want = 0.5 * (sab / na + sba / nb);
    CHECK(contour_distance(a, b, 1.0) == Catch::Approx(want).margin(1e-9));
    CHECK(contour_distance(a, b, 1.0) == Catch::Approx(contour_distance(b, a, 1.0)).margin(1e-12));
  }
}

TEST_CASE("drift takes the last curve value") {
  CHECK(drift({-5.0, -10.0, 0.0}) == 0.0);
  CHECK(drift({-5.0, -10.0, -1.33}) == Catch::Approx(1.33));
  CHECK_THROWS_AS(drift({}), DataError);
}
