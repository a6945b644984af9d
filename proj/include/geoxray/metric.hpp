// Riemannian metrics on the closed unit disk: evaluation, Christoffel
// symbols, Gauss curvature, diffeomorphisms, pullbacks and the
// boundary-normalizing gauge.
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "geoxray/errors.hpp"
#include "geoxray/geometry.hpp"

namespace geoxray {

using Christoffel = std::array<std::array<std::array<double, 2>, 2>, 2>;  // [i][j][k]

struct MetricField {
  enum class Kind { euclidean, conformal, sheared, pullback, custom };

  Kind kind = Kind::euclidean;
  int regularity = 4;

  // Metrics must be evaluable on |x| <= 1 + pad so the extended disk of the
  // surjectivity solver needs no re-specification.
  static constexpr double kEvalPad = 0.3;
  static constexpr double kFdStep = 1e-5;

  std::function<Mat2(const Vec2&)> eval_fn;
  // Optional analytic partials (d/dx g, d/dy g); central differences otherwise.
  std::function<std::array<Mat2, 2>(const Vec2&)> deriv_fn;
  // Optional analytic Gauss curvature; Brioschi formula with finite
  // differences otherwise.
  std::function<double(const Vec2&)> curvature_fn;

  Mat2 operator()(const Vec2& p) const {
    Mat2 g = eval_fn(p);
    if (!(g.a11 > 0.0) || !(g.det() > 0.0)) {
      throw PositivityViolation("metric not positive definite at (" +
                                std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
    }
    return g;
  }

  std::array<Mat2, 2> deriv(const Vec2& p) const {
    if (deriv_fn) return deriv_fn(p);
    const double h = kFdStep;
    std::array<Mat2, 2> d;
    d[0] = (eval_fn({p.x + h, p.y}) - eval_fn({p.x - h, p.y})) * (0.5 / h);
    d[1] = (eval_fn({p.x, p.y + h}) - eval_fn({p.x, p.y - h})) * (0.5 / h);
    return d;
  }

  double g_norm(const Vec2& p, const Vec2& v) const {
    return std::sqrt(quad_form((*this)(p), v, v));
  }

  bool is_euclidean() const { return kind == Kind::euclidean; }
};

// Levi-Civita connection coefficients.
inline Christoffel christoffel(const MetricField& g, const Vec2& p) {
  const Mat2 gi = g(p).inverse();
  const auto d = g.deriv(p);
  auto dg = [&](int l, int a, int b) {  // d_l g_{ab}
    const Mat2& m = d[l];
    return a == 0 ? (b == 0 ? m.a11 : m.a12) : (b == 0 ? m.a21 : m.a22);
  };
  auto ginv = [&](int a, int b) {
    return a == 0 ? (b == 0 ? gi.a11 : gi.a12) : (b == 0 ? gi.a21 : gi.a22);
  };
  Christoffel G{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = j; k < 2; ++k) {
        double s = 0.0;
        for (int l = 0; l < 2; ++l)
          s += ginv(i, l) * (dg(j, l, k) + dg(k, l, j) - dg(l, j, k));
        G[i][j][k] = 0.5 * s;
        G[i][k][j] = G[i][j][k];
      }
  return G;
}

inline Vec2 geodesic_acceleration(const Christoffel& G, const Vec2& v) {
  return {-(G[0][0][0] * v.x * v.x + 2.0 * G[0][0][1] * v.x * v.y + G[0][1][1] * v.y * v.y),
          -(G[1][0][0] * v.x * v.x + 2.0 * G[1][0][1] * v.x * v.y + G[1][1][1] * v.y * v.y)};
}

// Gauss curvature via the Brioschi formula when no analytic curvature is
// attached. Second derivatives are central differences of the first ones.
inline double gauss_curvature(const MetricField& g, const Vec2& p) {
  if (g.curvature_fn) return g.curvature_fn(p);
  const double h = 1e-4;
  const Mat2 gm = g(p);
  const double E = gm.a11, F = gm.a12, G_ = gm.a22;
  const auto dx = g.deriv({p.x + h, p.y});
  const auto mx = g.deriv({p.x - h, p.y});
  const auto dy = g.deriv({p.x, p.y + h});
  const auto my = g.deriv({p.x, p.y - h});
  const auto d0 = g.deriv(p);
  const double Eu = d0[0].a11, Ev = d0[1].a11;
  const double Fu = d0[0].a12, Fv = d0[1].a12;
  const double Gu = d0[0].a22, Gv = d0[1].a22;
  const double Evv = (dy[1].a11 - my[1].a11) / (2.0 * h);
  const double Guu = (dx[0].a22 - mx[0].a22) / (2.0 * h);
  const double Fuv = (dx[1].a12 - mx[1].a12) / (2.0 * h);
  const double D = E * G_ - F * F;
  auto det3 = [](double a, double b, double c, double d, double e, double f,
                 double g1, double h1, double i1) {
    return a * (e * i1 - f * h1) - b * (d * i1 - f * g1) + c * (d * h1 - e * g1);
  };
  const double m1 = det3(-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
                         Fv - 0.5 * Gu, E, F,
                         0.5 * Gv, F, G_);
  const double m2 = det3(0.0, 0.5 * Ev, 0.5 * Gu,
                         0.5 * Ev, E, F,
                         0.5 * Gu, F, G_);
  return (m1 - m2) / (D * D);
}

// ---------------------------------------------------------------------------
// Built-in metrics

inline MetricField euclidean_metric() {
  MetricField g;
  g.kind = MetricField::Kind::euclidean;
  g.eval_fn = [](const Vec2&) { return Mat2::identity(); };
  g.deriv_fn = [](const Vec2&) { return std::array<Mat2, 2>{Mat2{}, Mat2{}}; };
  g.curvature_fn = [](const Vec2&) { return 0.0; };
  return g;
}

// e^{2c} delta, constant conformal factor.
inline MetricField conformal_constant_metric(double c) {
  MetricField g;
  g.kind = MetricField::Kind::conformal;
  const double s = std::exp(2.0 * c);
  g.eval_fn = [s](const Vec2&) { return Mat2{s, 0.0, 0.0, s}; };
  g.deriv_fn = [](const Vec2&) { return std::array<Mat2, 2>{Mat2{}, Mat2{}}; };
  g.curvature_fn = [](const Vec2&) { return 0.0; };
  return g;
}

// e^{2 lambda} delta with lambda = c (1 - r^2); lambda vanishes on the
// boundary circle. K = -e^{-2 lambda} Laplacian(lambda) = 4 c e^{-2 lambda}.
inline MetricField conformal_bump_metric(double c) {
  MetricField g;
  g.kind = MetricField::Kind::conformal;
  auto lam = [c](const Vec2& p) { return c * (1.0 - p.x * p.x - p.y * p.y); };
  g.eval_fn = [lam](const Vec2& p) {
    const double s = std::exp(2.0 * lam(p));
    return Mat2{s, 0.0, 0.0, s};
  };
  g.deriv_fn = [lam, c](const Vec2& p) {
    const double s = std::exp(2.0 * lam(p));
    const double dx = s * 2.0 * (-2.0 * c * p.x);
    const double dy = s * 2.0 * (-2.0 * c * p.y);
    return std::array<Mat2, 2>{Mat2{dx, 0.0, 0.0, dx}, Mat2{dy, 0.0, 0.0, dy}};
  };
  g.curvature_fn = [lam, c](const Vec2& p) { return 4.0 * c * std::exp(-2.0 * lam(p)); };
  return g;
}

// delta + a * exp(-r^2) (dx dy + dy dx); off-diagonal persists at the boundary.
inline MetricField sheared_metric(double a) {
  MetricField g;
  g.kind = MetricField::Kind::sheared;
  auto bump = [](const Vec2& p) { return std::exp(-(p.x * p.x + p.y * p.y)); };
  g.eval_fn = [a, bump](const Vec2& p) {
    const double b = a * bump(p);
    return Mat2{1.0, b, b, 1.0};
  };
  g.deriv_fn = [a, bump](const Vec2& p) {
    const double b = a * bump(p);
    const double bx = -2.0 * p.x * b;
    const double by = -2.0 * p.y * b;
    return std::array<Mat2, 2>{Mat2{0.0, bx, bx, 0.0}, Mat2{0.0, by, by, 0.0}};
  };
  return g;
}

// ---------------------------------------------------------------------------
// Diffeomorphisms of the disk

struct DiskDiffeo {
  std::function<Vec2(const Vec2&)> forward;
  std::function<Mat2(const Vec2&)> jacobian_fn;  // optional
  std::function<Vec2(const Vec2&)> inverse_fn;   // optional
  bool boundary_fixing = false;

  Vec2 operator()(const Vec2& p) const { return forward(p); }

  Mat2 jacobian(const Vec2& p) const {
    if (jacobian_fn) return jacobian_fn(p);
    const double h = MetricField::kFdStep;
    const Vec2 dx = (forward({p.x + h, p.y}) - forward({p.x - h, p.y})) / (2.0 * h);
    const Vec2 dy = (forward({p.x, p.y + h}) - forward({p.x, p.y - h})) / (2.0 * h);
    return {dx.x, dy.x, dx.y, dy.y};
  }

  // Newton inversion when no analytic inverse is supplied.
  Vec2 inverse(const Vec2& q) const {
    if (inverse_fn) return inverse_fn(q);
    Vec2 x = q;
    for (int it = 0; it < 50; ++it) {
      const Vec2 r = forward(x) - q;
      if (norm(r) < 1e-13) break;
      x = x - jacobian(x).inverse() * r;
    }
    return x;
  }
};

inline DiskDiffeo identity_diffeo() {
  DiskDiffeo d;
  d.forward = [](const Vec2& p) { return p; };
  d.jacobian_fn = [](const Vec2&) { return Mat2::identity(); };
  d.inverse_fn = [](const Vec2& p) { return p; };
  d.boundary_fixing = true;
  return d;
}

inline DiskDiffeo rotation_diffeo(double t0) {
  DiskDiffeo d;
  const double c = std::cos(t0), s = std::sin(t0);
  d.forward = [c, s](const Vec2& p) { return Vec2{c * p.x - s * p.y, s * p.x + c * p.y}; };
  d.jacobian_fn = [c, s](const Vec2&) { return Mat2{c, -s, s, c}; };
  d.inverse_fn = [c, s](const Vec2& p) { return Vec2{c * p.x + s * p.y, -s * p.x + c * p.y}; };
  d.boundary_fixing = false;  // fixes the circle setwise, not pointwise
  return d;
}

// Radial displacement r -> r + amp * b((r - r0)/(r1 - r0)) with a smooth
// compactly supported profile b(t) = exp(4 - 1/(t(1-t))), supported in
// r0 < r < r1 (all derivatives vanish at the endpoints, so pullbacks stay
// smooth); boundary fixing whenever r1 <= 1.
inline DiskDiffeo radial_bump_diffeo(double amp, double r0 = 0.2, double r1 = 0.8) {
  DiskDiffeo d;
  auto s = [amp, r0, r1](double r) {
    const double t = (r - r0) / (r1 - r0);
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return amp * std::exp(4.0 - 1.0 / (t * (1.0 - t)));
  };
  auto sp = [amp, r0, r1](double r) {
    const double t = (r - r0) / (r1 - r0);
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double q = t * (1.0 - t);
    return amp * std::exp(4.0 - 1.0 / q) * ((1.0 - 2.0 * t) / (q * q)) / (r1 - r0);
  };
  d.forward = [s](const Vec2& p) {
    const double r = norm(p);
    if (r == 0.0) return p;
    return p * ((r + s(r)) / r);
  };
  d.jacobian_fn = [s, sp](const Vec2& p) {
    const double r = norm(p);
    if (r < 1e-12) return Mat2::identity();
    const double rho = r + s(r);
    const double f = rho / r;
    const double fp = (1.0 + sp(r) - f) / r;  // d/dr (rho/r)
    // J = f I + fp/r * x x^T
    return Mat2{f + fp * p.x * p.x / r, fp * p.x * p.y / r,
                fp * p.x * p.y / r, f + fp * p.y * p.y / r};
  };
  d.boundary_fixing = (r1 <= 1.0);
  return d;
}

inline DiskDiffeo compose(const DiskDiffeo& outer, const DiskDiffeo& inner) {
  DiskDiffeo d;
  d.forward = [outer, inner](const Vec2& p) { return outer.forward(inner.forward(p)); };
  d.jacobian_fn = [outer, inner](const Vec2& p) {
    return outer.jacobian(inner.forward(p)) * inner.jacobian(p);
  };
  d.boundary_fixing = outer.boundary_fixing && inner.boundary_fixing;
  return d;
}

// (Psi^* g)(x) = DPsi(x)^T g(Psi(x)) DPsi(x).
inline MetricField pullback(const DiskDiffeo& psi, const MetricField& g) {
  MetricField pg;
  pg.kind = MetricField::Kind::pullback;
  pg.regularity = g.regularity;
  auto base_eval = g.eval_fn;
  pg.eval_fn = [psi, base_eval](const Vec2& p) {
    const Vec2 q = psi.forward(p);
    if (norm(q) > 1.0 + MetricField::kEvalPad + 1e-12) {
      throw DomainEscape("pullback: diffeo left the evaluable pad");
    }
    const Mat2 J = psi.jacobian(p);
    return J.transpose() * base_eval(q) * J;
  };
  if (g.curvature_fn) {
    auto K = g.curvature_fn;
    pg.curvature_fn = [psi, K](const Vec2& p) { return K(psi.forward(p)); };
  }
  return pg;
}

// Positively oriented g-orthonormal frame from Gram-Schmidt on (d/dx, d/dy).
// With this frame the fiber circle angle carries the uniform measure.
struct OrthoFrame {
  Vec2 e1, e2;
};

inline OrthoFrame ortho_frame(const MetricField& g, const Vec2& p) {
  const Mat2 gm = g(p);
  const double s1 = 1.0 / std::sqrt(gm.a11);
  const Vec2 e1{s1, 0.0};
  Vec2 w{-gm.a12 / gm.a11, 1.0};
  const double nw = std::sqrt(quad_form(gm, w, w));
  return {e1, w / nw};
}

// Fiber angle of a g-unit vector v in the orthonormal frame at p.
inline double fiber_angle(const MetricField& g, const Vec2& p, const Vec2& v) {
  const Mat2 gm = g(p);
  const OrthoFrame f = ortho_frame(g, p);
  return std::atan2(quad_form(gm, v, f.e2), quad_form(gm, v, f.e1));
}

inline Vec2 fiber_vector(const MetricField& g, const Vec2& p, double phi) {
  const OrthoFrame f = ortho_frame(g, p);
  return f.e1 * std::cos(phi) + f.e2 * std::sin(phi);
}

// 90-degree rotations of a tangent vector with respect to g and the standard
// orientation of the disk. rotate_cw matches (a,b) -> (b,-a) on the Euclidean
// plane.
inline Vec2 rotate_ccw(const MetricField& g, const Vec2& p, const Vec2& v) {
  const Mat2 gm = g(p);
  const double s = std::sqrt(gm.det());
  return {(-gm.a12 * v.x - gm.a22 * v.y) / s, (gm.a11 * v.x + gm.a12 * v.y) / s};
}

inline Vec2 rotate_cw(const MetricField& g, const Vec2& p, const Vec2& v) {
  return -rotate_ccw(g, p, v);
}

// ---------------------------------------------------------------------------
// Boundary-normalizing gauge

// Polar components (coordinates (theta, r)) of a Cartesian metric at x != 0.
inline Mat2 polar_components(const MetricField& g, double theta, double r) {
  const Vec2 p{r * std::cos(theta), r * std::sin(theta)};
  const Mat2 gm = g(p);
  const Vec2 dth{-r * std::sin(theta), r * std::cos(theta)};
  const Vec2 dr{std::cos(theta), std::sin(theta)};
  return {quad_form(gm, dth, dth), quad_form(gm, dth, dr),
          quad_form(gm, dth, dr), quad_form(gm, dr, dr)};
}

namespace detail {
// Quintic smoothstep: 0 at t<=0, 1 at t>=1, C^2 across the ends.
inline double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
}  // namespace detail

// Boundary-normal gauge: a boundary-fixing diffeo phi with (phi^* g)_{theta r} = 0 and
// (phi^* g)_{rr} = 1 on the boundary circle. The boundary coefficients are
// solved from those two conditions directly; the printed norm in the source
// derivation is not relied on.
inline DiskDiffeo boundary_normal_gauge(const MetricField& g, double eps = 0.3) {
  const int nth = 512;
  const double eps_min = 1e-3;

  while (true) {
    auto a1v = std::make_shared<std::vector<double>>(nth);
    auto a2v = std::make_shared<std::vector<double>>(nth);
    for (int i = 0; i < nth; ++i) {
      const double th = kTwoPi * i / nth;
      const Mat2 gp = polar_components(g, th, 1.0);
      const double c = gp.a12 / gp.a11;  // g_{theta r} / g_{theta theta}
      const double a2 = 1.0 / std::sqrt(gp.a22 - gp.a12 * gp.a12 / gp.a11);
      (*a2v)[i] = a2;
      (*a1v)[i] = -c * a2;
    }
    // Periodic cubic Lagrange on the tabulated coefficients.
    auto coeff = [nth](const std::vector<double>& t, double th) {
      const double s = wrap_angle(th) / kTwoPi * nth;
      const int i0 = static_cast<int>(std::floor(s));
      const double u = s - i0;
      auto at = [&](int k) { return t[((i0 + k) % nth + nth) % nth]; };
      const double wm1 = -u * (u - 1.0) * (u - 2.0) / 6.0;
      const double w0 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
      const double w1 = -(u + 1.0) * u * (u - 2.0) / 2.0;
      const double w2 = (u + 1.0) * u * (u - 1.0) / 6.0;
      return wm1 * at(-1) + w0 * at(0) + w1 * at(1) + w2 * at(2);
    };
    const double e = eps;
    auto chi = [e](double r) { return detail::smoothstep5((r - (1.0 - e)) / (e / 2.0)); };

    DiskDiffeo d;
    d.forward = [coeff, a1v, a2v, chi](const Vec2& p) {
      const double r = norm(p);
      if (r < 1e-14) return p;
      const double th = std::atan2(p.y, p.x);
      const double x = chi(r);
      if (x == 0.0) return p;
      // Blend from the identity (chi = 0) toward the boundary-normal form:
      // the deformation is proportional to the coefficient's departure from
      // the identity values a1 = 0, a2 = 1, so a metric already in gauge
      // yields the identity map and the collar cannot fold for moderate
      // coefficients.
      const double th2 = th + (r - 1.0) * coeff(*a1v, th) * x;
      const double r2 =
          1.0 + (r - 1.0) * (1.0 + (coeff(*a2v, th) - 1.0) * x);
      return Vec2{r2 * std::cos(th2), r2 * std::sin(th2)};
    };
    d.boundary_fixing = true;

    // Injectivity floor on the collar.
    bool ok = true;
    for (int i = 0; i < 64 && ok; ++i) {
      for (int j = 0; j <= 8 && ok; ++j) {
        const double r = 1.0 - eps + (eps + 0.1) * j / 8.0;
        const double th = kTwoPi * i / 64;
        const Mat2 J = d.jacobian({r * std::cos(th), r * std::sin(th)});
        if (J.det() < 0.05) ok = false;
      }
    }
    if (ok) return d;
    if (eps / 2.0 < eps_min) {
      throw GaugeNotInjective("boundary_normal_gauge: collar Jacobian below floor");
    }
    eps /= 2.0;
  }
}

}  // namespace geoxray
