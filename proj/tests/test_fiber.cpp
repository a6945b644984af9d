#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "geoxray/fiber.hpp"
#include "geoxray/xray.hpp"

using namespace geoxray;

namespace {

// Principal-value quadrature of the circular Hilbert kernel
// (1 + cos d)/(-sin d) with nodes placed symmetrically about the
// singularity (midpoint rule, singular node pair cancels).
double pv_hilbert(const std::function<double(double)>& u, double phi) {
  const int n = 4096;
  double acc = 0.0;
  for (int m = 0; m < n; ++m) {
    const double d = (m + 0.5) * kTwoPi / n - kPi;
    acc += u(phi + d) * (1.0 + std::cos(d)) / (-std::sin(d));
  }
  return acc / n;
}

std::vector<double> sample_fiber(const std::function<double(double)>& u, int n) {
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) f[i] = u(kTwoPi * i / n);
  return f;
}

}  // namespace

TEST_CASE("multiplier matches the principal-value kernel for modes up to 10") {
  const int n = 64;
  for (int k = 1; k <= 10; ++k) {
    auto uc = [k](double p) { return std::cos(k * p); };
    auto us = [k](double p) { return std::sin(k * p); };
    const std::vector<double> hc = hilbert_fiber(sample_fiber(uc, n));
    const std::vector<double> hs = hilbert_fiber(sample_fiber(us, n));
    for (int i = 0; i < n; i += 5) {
      const double phi = kTwoPi * i / n;
      CHECK(std::fabs(hc[i] - pv_hilbert(uc, phi)) < 1e-6);
      CHECK(std::fabs(hs[i] - pv_hilbert(us, phi)) < 1e-6);
      // Closed forms H cos = sin, H sin = -cos.
      CHECK(hc[i] == doctest::Approx(std::sin(k * phi)).epsilon(1e-10));
      CHECK(hs[i] == doctest::Approx(-std::cos(k * phi)).epsilon(1e-10));
    }
  }
}

TEST_CASE("constants are annihilated and H^2 = -(id - mean)") {
  const int n = 128;
  std::vector<double> one(n, 1.0);
  for (double v : hilbert_fiber(one)) CHECK(std::fabs(v) < 1e-13);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> f(n);
  double mean = 0.0;
  // Band-limited random data (Nyquist excluded so H^2 is exactly -id + mean).
  for (int i = 0; i < n; ++i) f[i] = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double a = u(rng), b = u(rng);
    for (int i = 0; i < n; ++i)
      f[i] += a * std::cos(k * kTwoPi * i / n) + b * std::sin(k * kTwoPi * i / n);
  }
  const double c0 = u(rng);
  for (int i = 0; i < n; ++i) {
    f[i] += c0;
    mean += f[i];
  }
  mean /= n;
  const std::vector<double> hh = hilbert_fiber(hilbert_fiber(f));
  for (int i = 0; i < n; ++i) CHECK(std::fabs(hh[i] + (f[i] - mean)) < 1e-10);
}

TEST_CASE("parity parts split the transform and carry pure mode support") {
  const MetricField g = conformal_bump_metric(0.1);
  auto usm = [](const Vec2& x, const Vec2& v) {
    return x.x + v.x + v.x * v.y + 0.3 * x.y * (v.y * v.y * v.y);
  };
  const SMGridFunction u = SMGridFunction::from_function(g, usm, 8, 16, 32);
  const SMGridFunction h = hilbert(u);
  const SMGridFunction he = hilbert_even(u);
  const SMGridFunction ho = hilbert_odd(u);
  for (int i = 0; i <= 8; i += 4)
    for (int j = 0; j < 16; j += 5) {
      for (int k = 0; k < 32; ++k)
        CHECK(std::fabs(he.value(i, j, k) + ho.value(i, j, k) -
                        h.value(i, j, k)) < 1e-12);
      const auto ce = he.fiber_coeffs(i, j);
      const auto co = ho.fiber_coeffs(i, j);
      for (int k = 0; k < 32; ++k) {
        const int m = fft_mode(k, 32);
        if (m % 2 != 0) CHECK(std::abs(ce[k]) < 1e-12);
        if (m % 2 == 0) CHECK(std::abs(co[k]) < 1e-12);
      }
    }
}

TEST_CASE("fiber coefficients are conjugate-symmetric and invert exactly") {
  const MetricField g = euclidean_metric();
  auto usm = [](const Vec2& x, const Vec2& v) {
    return std::cos(2.0 * std::atan2(v.y, v.x)) + x.x;
  };
  const SMGridFunction u = SMGridFunction::from_function(g, usm, 4, 8, 16);
  const auto c = u.fiber_coeffs(2, 3);
  for (int k = 1; k < 8; ++k)
    CHECK(std::abs(c[k] - std::conj(c[16 - k])) < 1e-13);
  CHECK(std::abs(c[2] - 0.5) < 1e-13);
}

TEST_CASE("X differentiates a lifted coordinate along the flow") {
  const MetricField g = euclidean_metric();
  auto u = [](const Vec2& x, const Vec2&) { return x.x; };
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ur(-0.5, 0.5), ua(0.0, kTwoPi);
  for (int k = 0; k < 30; ++k) {
    const Vec2 x{ur(rng), ur(rng)};
    const Vec2 v{std::cos(ua(rng)), std::sin(ua(rng))};
    CHECK(std::fabs(X_of(g, u, x, v) - v.x) < 1e-8);
  }
}

TEST_CASE("X_perp uses the clockwise rotation (a,b) -> (b,-a)") {
  const MetricField g = euclidean_metric();
  auto u = [](const Vec2& x, const Vec2&) { return x.x; };
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ur(-0.5, 0.5), ua(0.0, kTwoPi);
  for (int k = 0; k < 30; ++k) {
    const Vec2 x{ur(rng), ur(rng)};
    const Vec2 v{std::cos(ua(rng)), std::sin(ua(rng))};
    CHECK(std::fabs(X_perp_of(g, u, x, v) - v.y) < 1e-7);
  }
}

TEST_CASE("the flow-constant extension is annihilated by X") {
  const MetricField g = euclidean_metric();
  const FanGrid w = FanGrid::from_function(
      [](double b, double a) { return std::sin(b) + 0.3 * std::cos(b) * a * a; },
      128, 64);
  auto u = [&](const Vec2& x, const Vec2& v) {
    return sharp_eval(g, w, x, v);
  };
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ur(-0.45, 0.45), ua(0.0, kTwoPi);
  for (int k = 0; k < 15; ++k) {
    const Vec2 x{ur(rng), ur(rng)};
    const Vec2 v{std::cos(ua(rng)), std::sin(ua(rng))};
    CHECK(std::fabs(X_of(g, u, x, v)) < 2e-6);
  }
}

TEST_CASE("gradient lift agrees with the flow derivative") {
  const MetricField g = conformal_bump_metric(0.12);
  auto f = [](const Vec2& p) { return std::exp(-3.0 * dot(p, p)) * (1.0 + p.x); };
  auto lf = grad_lift(g, f);
  auto lfp = grad_perp_lift(g, f);
  auto uf = [f](const Vec2& x, const Vec2&) { return f(x); };
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> ur(-0.5, 0.5), ua(0.0, kTwoPi);
  for (int k = 0; k < 20; ++k) {
    const Vec2 x{ur(rng), ur(rng)};
    Vec2 v{std::cos(ua(rng)), std::sin(ua(rng))};
    v = v / g.g_norm(x, v);
    CHECK(std::fabs(lf(x, v) - X_of(g, uf, x, v)) < 5e-6);
    CHECK(std::fabs(lfp(x, v) - X_perp_of(g, uf, x, v)) < 5e-6);
  }
}

TEST_CASE("gradient lift is exact on x1^2 and constants vanish") {
  const MetricField g = euclidean_metric();
  auto lf = grad_lift(g, [](const Vec2& p) { return p.x * p.x; });
  auto lc = grad_lift(g, [](const Vec2&) { return 4.2; });
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> ur(-0.6, 0.6);
  for (int k = 0; k < 20; ++k) {
    const Vec2 x{ur(rng), ur(rng)};
    const Vec2 v{ur(rng), ur(rng)};
    CHECK(std::fabs(lf(x, v) - 2.0 * x.x * v.x) < 1e-8);
    CHECK(std::fabs(lc(x, v)) < 1e-10);
  }
}

TEST_CASE("conformal rescaling of the gradient norm") {
  const double c = 0.2;
  const MetricField g = conformal_bump_metric(c);
  auto lf = grad_lift(g, [](const Vec2& p) { return p.x; });
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> ur(-0.6, 0.6);
  for (int k = 0; k < 20; ++k) {
    const Vec2 x{ur(rng), ur(rng)};
    const OrthoFrame fr = ortho_frame(g, x);
    const double norm2 = lf(x, fr.e1) * lf(x, fr.e1) + lf(x, fr.e2) * lf(x, fr.e2);
    const double lam = c * (1.0 - dot(x, x));
    CHECK(norm2 == doctest::Approx(std::exp(-2.0 * lam)).epsilon(1e-6));
  }
}

TEST_CASE("X satisfies the Leibniz rule") {
  const MetricField g = conformal_bump_metric(0.1);
  auto u = [](const Vec2& x, const Vec2& v) { return x.x + 0.5 * v.y; };
  auto w = [](const Vec2& x, const Vec2& v) { return std::sin(x.y) + v.x * v.x; };
  auto uw = [&](const Vec2& x, const Vec2& v) { return u(x, v) * w(x, v); };
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> ur(-0.5, 0.5), ua(0.0, kTwoPi);
  for (int k = 0; k < 20; ++k) {
    const Vec2 x{ur(rng), ur(rng)};
    Vec2 v{std::cos(ua(rng)), std::sin(ua(rng))};
    v = v / g.g_norm(x, v);
    const double lhs = X_of(g, uw, x, v);
    const double rhs =
        u(x, v) * X_of(g, w, x, v) + w(x, v) * X_of(g, u, x, v);
    CHECK(std::fabs(lhs - rhs) < 5e-6);
  }
}
