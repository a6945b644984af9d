#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "geoxray/boundary.hpp"

using namespace geoxray;

TEST_CASE("fan measure of the flat disk is close to 4 pi") {
  const MetricField g = euclidean_metric();
  FanGrid one(64, 64);
  for (double& v : one.values()) v = 1.0;
  // Guard-band truncation removes 2 pi (1 - cos guard) of the exact 4 pi.
  CHECK(std::fabs(fan_inner(g, one, one) - 4.0 * kPi) < 0.02);
}

TEST_CASE("fan interpolation is cubic-exact inside the band") {
  auto f = [](double b, double a) {
    return std::cos(b) + 0.3 * std::sin(2 * b) * a + a * a * a;
  };
  const FanGrid w = FanGrid::from_function(f, 128, 48);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> ub(0.0, kTwoPi),
      ua(w.alpha_min() + 2 * w.dalpha(), w.alpha_max() - 2 * w.dalpha());
  for (int k = 0; k < 100; ++k) {
    const double b = ub(rng), a = ua(rng);
    CHECK(std::fabs(w.interp(b, a) - f(b, a)) < 2e-6);
  }
}

TEST_CASE("flat alpha extrapolation outside the guard band") {
  const FanGrid w = FanGrid::from_function(
      [](double, double a) { return a; }, 32, 32);
  CHECK(w.interp(1.0, kPi / 2) == doctest::Approx(w.alpha_max()).epsilon(1e-9));
}

TEST_CASE("euclidean scattering matches the chord closed form") {
  const MetricField g = euclidean_metric();
  for (double beta : {0.0, 1.1, 4.0}) {
    for (double alpha : {-1.2, -0.3, 0.0, 0.7}) {
      const ScatterResult s = scattering_relation(g, {beta, alpha});
      CHECK(std::fabs(angle_diff(s.beta_out, beta + kPi - 2 * alpha)) < 1e-9);
      CHECK(s.alpha_out == doctest::Approx(-alpha).epsilon(1e-9));
      CHECK(s.tau == doctest::Approx(2 * std::cos(alpha)).epsilon(1e-9));
    }
  }
}

TEST_CASE("constant conformal factor only rescales the exit time") {
  const double c = 0.2;
  const MetricField g = conformal_constant_metric(c);
  for (double alpha : {-0.9, 0.4}) {
    const ScatterResult s = scattering_relation(g, {0.5, alpha});
    const ScatterResult se = scattering_relation(euclidean_metric(), {0.5, alpha});
    CHECK(std::fabs(angle_diff(s.beta_out, se.beta_out)) < 1e-8);
    CHECK(s.alpha_out == doctest::Approx(se.alpha_out).epsilon(1e-8));
    CHECK(s.tau == doctest::Approx(std::exp(c) * se.tau).epsilon(1e-8));
  }
}

TEST_CASE("scattering is an involution on a 32x32 fan") {
  const MetricField g = conformal_bump_metric(0.15);
  const FanGrid probe(32, 32);
  double maxerr = 0.0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      const FanCoordinate fc{probe.beta_node(i), probe.alpha_node(j)};
      const ScatterResult s = scattering_relation(g, fc);
      const ScatterResult back = scattering_relation(g, {s.beta_out, s.alpha_out});
      maxerr = std::max(maxerr, std::fabs(angle_diff(back.beta_out, fc.beta)));
      maxerr = std::max(maxerr, std::fabs(back.alpha_out - fc.alpha));
    }
  CHECK(maxerr < 1e-8);
}

TEST_CASE("scattering table interpolates the relation") {
  const MetricField g = conformal_bump_metric(0.1);
  const ScatteringTable table(g, 64, 48);
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> ub(0.0, kTwoPi), ua(-1.3, 1.3);
  for (int k = 0; k < 25; ++k) {
    const FanCoordinate fc{ub(rng), ua(rng)};
    const ScatterResult st = table.map(fc);
    const ScatterResult sd = scattering_relation(g, fc);
    CHECK(std::fabs(angle_diff(st.beta_out, sd.beta_out)) < 1e-5);
    CHECK(std::fabs(st.alpha_out - sd.alpha_out) < 1e-5);
    CHECK(std::fabs(st.tau - sd.tau) < 1e-5);
  }
}

TEST_CASE("euclidean boundary distances are chord lengths") {
  const MetricField g = euclidean_metric();
  CHECK(boundary_distance(g, 0.0, kPi / 2) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-8));
  CHECK(boundary_distance(g, 0.3, 0.3 + kPi) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(boundary_distance(g, 1.0, 2.2) ==
        doctest::Approx(2 * std::sin(0.6)).epsilon(1e-8));
}

TEST_CASE("constant conformal factor scales boundary distances") {
  const double c = 0.15;
  const MetricField g = conformal_constant_metric(c);
  CHECK(boundary_distance(g, 0.0, 2.0) ==
        doctest::Approx(std::exp(c) * 2 * std::sin(1.0)).epsilon(1e-8));
}

TEST_CASE("boundary distance is symmetric") {
  const MetricField g = conformal_bump_metric(0.2);
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int k = 0; k < 10; ++k) {
    const double b1 = u(rng), b2 = u(rng);
    if (std::fabs(angle_diff(b1, b2)) < 0.3) continue;
    CHECK(boundary_distance(g, b1, b2) ==
          doctest::Approx(boundary_distance(g, b2, b1)).epsilon(1e-8));
  }
}

TEST_CASE("triangle inequality on random boundary triples") {
  const MetricField g = conformal_bump_metric(0.15);
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  int tested = 0;
  for (int k = 0; k < 200 && tested < 100; ++k) {
    const double a = u(rng), b = u(rng), c = u(rng);
    if (std::fabs(angle_diff(a, b)) < 0.3 || std::fabs(angle_diff(b, c)) < 0.3 ||
        std::fabs(angle_diff(a, c)) < 0.3)
      continue;
    const double dab = boundary_distance(g, a, b);
    const double dbc = boundary_distance(g, b, c);
    const double dac = boundary_distance(g, a, c);
    CHECK(dac <= dab + dbc + 1e-8);
    ++tested;
  }
  CHECK(tested == 100);
}

TEST_CASE("boundary-fixing diffeos preserve boundary distances") {
  const MetricField g = conformal_bump_metric(0.15);
  const MetricField pg = pullback(radial_bump_diffeo(0.05), g);
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int k = 0; k < 20; ++k) {
    const double b1 = u(rng), b2 = u(rng);
    if (std::fabs(angle_diff(b1, b2)) < 0.4) continue;
    CHECK(boundary_distance(g, b1, b2) ==
          doctest::Approx(boundary_distance(pg, b1, b2)).epsilon(1e-6));
  }
}

TEST_CASE("nearly coincident points fall back to the boundary arc") {
  const MetricField g = euclidean_metric();
  bool clipped = false;
  const double d = boundary_distance(g, 0.0, 0.004, &clipped);
  CHECK(clipped);
  CHECK(d == doctest::Approx(0.004).epsilon(1e-4));
}

TEST_CASE("tangential boundary norm from distance asymptotics") {
  auto oracle = [](const MetricField& g) {
    return [g](double b1, double b2) {
      FlowOptions o;
      o.h_ode = 2e-3;
      return boundary_distance(g, b1, b2, nullptr, o);
    };
  };
  CHECK(std::fabs(recover_boundary_metric(oracle(euclidean_metric()), 0.7) - 1.0) <
        1e-6);
  CHECK(std::fabs(recover_boundary_metric(oracle(conformal_constant_metric(0.1)),
                                          2.1) -
                  std::exp(0.1)) < 1e-3);
  CHECK(std::fabs(recover_boundary_metric(oracle(conformal_bump_metric(0.1)), 4.0) -
                  1.0) < 1e-3);
}
