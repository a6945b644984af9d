// Geodesic flow on the disk: RK4 integration with refined boundary exit,
// exit times and their odd extension, scalar Jacobi fields, and the
// simplicity certificate.
#pragma once

#include <optional>
#include <vector>

#include "geoxray/errors.hpp"
#include "geoxray/grid.hpp"
#include "geoxray/metric.hpp"

namespace geoxray {

struct PhasePoint {
  Vec2 x;
  Vec2 v;
};

struct GeodesicTrace {
  std::vector<double> times;
  std::vector<PhasePoint> states;
  double exit_time = 0.0;
  PhasePoint exit_phase;
};

struct FlowOptions {
  double h_ode = 1e-3;
  double radius = 1.0;
  double tau_max = 100.0;
  bool record = true;
};

namespace detail {

struct FlowState {
  Vec2 x, v;
};

inline FlowState flow_rhs(const MetricField& g, const FlowState& s) {
  return {s.v, geodesic_acceleration(christoffel(g, s.x), s.v)};
}

inline FlowState rk4_step(const MetricField& g, const FlowState& s, double h) {
  const FlowState k1 = flow_rhs(g, s);
  const FlowState k2 = flow_rhs(g, {s.x + k1.x * (h / 2), s.v + k1.v * (h / 2)});
  const FlowState k3 = flow_rhs(g, {s.x + k2.x * (h / 2), s.v + k2.v * (h / 2)});
  const FlowState k4 = flow_rhs(g, {s.x + k3.x * h, s.v + k3.v * h});
  return {s.x + (k1.x + k2.x * 2.0 + k3.x * 2.0 + k4.x) * (h / 6.0),
          s.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * (h / 6.0)};
}

}  // namespace detail

// Forward flow from p until the circle |x| = radius. p must be g-unit.
// For direction = backward the reversed phase point is integrated and the
// returned trace carries the velocities of phi_{-t}(p).
enum class FlowDirection { forward, backward };

inline GeodesicTrace integrate_geodesic(const MetricField& g, const PhasePoint& p,
                                        FlowDirection dir = FlowDirection::forward,
                                        const FlowOptions& opt = {}) {
  const double R2 = opt.radius * opt.radius;
  auto rho = [R2](const Vec2& x) { return R2 - dot(x, x); };
  const bool back = (dir == FlowDirection::backward);

  detail::FlowState s{p.x, back ? -p.v : p.v};
  GeodesicTrace tr;
  auto push = [&](double t, const detail::FlowState& st) {
    if (!opt.record) return;
    tr.times.push_back(t);
    tr.states.push_back({st.x, back ? -st.v : st.v});
  };

  // Boundary start pointing outward: degenerate trace.
  if (rho(s.x) < 1e-12 * R2 && dot(s.x, s.v) >= 0.0) {
    push(0.0, s);
    tr.exit_time = 0.0;
    tr.exit_phase = {s.x, back ? -s.v : s.v};
    return tr;
  }

  double t = 0.0;
  push(t, s);
  while (true) {
    const detail::FlowState prev = s;
    const double tprev = t;
    s = detail::rk4_step(g, s, opt.h_ode);
    t += opt.h_ode;
    if (rho(s.x) <= 0.0) {
      // Bisection-seeded secant on the partial step length.
      double lo = 0.0, hi = opt.h_ode;
      double flo = rho(prev.x), fhi = rho(s.x);
      double hcross = hi;
      detail::FlowState sc = s;
      int it = 0;
      while (std::fabs(rho(sc.x)) > 1e-12 * R2) {
        // Metrics evaluated through interpolated coefficients or
        // finite-difference Jacobians carry evaluation noise above the target
        // tolerance; once the bracket is exhausted the crossing is as good as
        // the metric evaluation allows.
        if (hi - lo < 1e-13 * opt.h_ode) break;
        if (++it > 200) throw StepUnderflow("exit refinement stalled");
        double hmid;
        const double fc = flo - fhi;
        if (fc != 0.0) {
          hmid = lo + flo * (hi - lo) / (flo - fhi);  // secant / regula falsi
          if (!(hmid > lo && hmid < hi)) hmid = 0.5 * (lo + hi);
        } else {
          hmid = 0.5 * (lo + hi);
        }
        sc = detail::rk4_step(g, prev, hmid);
        const double fm = rho(sc.x);
        if (fm > 0.0) {
          lo = hmid;
          flo = fm;
        } else {
          hi = hmid;
          fhi = fm;
        }
        hcross = hmid;
      }
      tr.exit_time = tprev + hcross;
      tr.exit_phase = {sc.x, back ? -sc.v : sc.v};
      push(tr.exit_time, sc);
      return tr;
    }
    push(t, s);
    if (t > opt.tau_max) throw TrappedGeodesic("no boundary exit before tau_max");
  }
}

inline double exit_time(const MetricField& g, const PhasePoint& p,
                        const FlowOptions& opt = {}) {
  FlowOptions o = opt;
  o.record = false;
  return integrate_geodesic(g, p, FlowDirection::forward, o).exit_time;
}

// Odd extension tau~(x,v) = tau(x,v) - tau(x,-v).
inline double odd_exit_time(const MetricField& g, const PhasePoint& p,
                            const FlowOptions& opt = {}) {
  return exit_time(g, p, opt) - exit_time(g, {p.x, -p.v}, opt);
}

// ---------------------------------------------------------------------------
// Jacobi fields and simplicity

// Precomputed Gauss curvature on a polar grid; bicubic lookup along traces
// avoids second metric derivatives inside the ODE loop.
inline DiskGridFunction curvature_grid(const MetricField& g, double radius = 1.0,
                                       int nr = 64, int ntheta = 128) {
  auto K = [&g](const Vec2& p) { return gauss_curvature(g, p); };
  return DiskGridFunction::from_function(K, nr, ntheta, radius, /*keep_source=*/false);
}

struct JacobiResult {
  std::vector<double> times;
  std::vector<double> y;  // y(0) = 0, y'(0) = 1
  bool conjugate_point = false;
  double first_conjugate_time = -1.0;
};

// Scalar Jacobi equation y'' + K(gamma(t)) y = 0 along the geodesic from p.
inline JacobiResult jacobi_scalar(const MetricField& g, const PhasePoint& p,
                                  const DiskGridFunction& K,
                                  const FlowOptions& opt = {}) {
  const double R2 = opt.radius * opt.radius;
  auto rho = [R2](const Vec2& x) { return R2 - dot(x, x); };

  struct S {
    detail::FlowState f;
    double y, yd;
  };
  auto rhs = [&](const S& s) {
    const detail::FlowState fd = detail::flow_rhs(g, s.f);
    return S{fd, s.yd, -K.interp(s.f.x) * s.y};
  };
  auto step = [&](const S& s, double h) {
    const S k1 = rhs(s);
    auto adv = [&](const S& a, const S& k, double c) {
      return S{{a.f.x + k.f.x * c, a.f.v + k.f.v * c}, a.y + k.y * c, a.yd + k.yd * c};
    };
    const S k2 = rhs(adv(s, k1, h / 2));
    const S k3 = rhs(adv(s, k2, h / 2));
    const S k4 = rhs(adv(s, k3, h));
    S out = s;
    out.f.x = s.f.x + (k1.f.x + k2.f.x * 2.0 + k3.f.x * 2.0 + k4.f.x) * (h / 6.0);
    out.f.v = s.f.v + (k1.f.v + k2.f.v * 2.0 + k3.f.v * 2.0 + k4.f.v) * (h / 6.0);
    out.y = s.y + (k1.y + k2.y * 2.0 + k3.y * 2.0 + k4.y) * (h / 6.0);
    out.yd = s.yd + (k1.yd + k2.yd * 2.0 + k3.yd * 2.0 + k4.yd) * (h / 6.0);
    return out;
  };

  S s{{p.x, p.v}, 0.0, 1.0};
  JacobiResult res;
  res.times.push_back(0.0);
  res.y.push_back(0.0);
  double t = 0.0;
  while (rho(s.f.x) > 0.0) {
    s = step(s, opt.h_ode);
    t += opt.h_ode;
    res.times.push_back(t);
    res.y.push_back(s.y);
    if (t > 2.0 * opt.h_ode &&
        (s.y * res.y[res.y.size() - 2] < 0.0 || std::fabs(s.y) < 1e-10)) {
      if (!res.conjugate_point) {
        res.conjugate_point = true;
        res.first_conjugate_time = t;
      }
    }
    if (t > opt.tau_max) throw TrappedGeodesic("jacobi: no boundary exit before tau_max");
  }
  return res;
}

struct SimplicityReport {
  bool convex = false;
  bool nontrapping = false;
  bool no_conjugate = false;
  double tau_max_observed = 0.0;
  double min_second_fundamental = 0.0;
};

struct CertifyOptions {
  int n_boundary = 128;
  int nbeta = 64;
  int nalpha = 64;
  double guard = 0.05;
  FlowOptions flow;
};

// Boundary frame at angle beta on the circle |x| = radius: g-unit inward
// normal and positively oriented g-unit tangent.
struct BoundaryFrame {
  Vec2 x;
  Vec2 normal;   // inward
  Vec2 tangent;  // counterclockwise
};

inline BoundaryFrame boundary_frame(const MetricField& g, double beta,
                                    double radius = 1.0) {
  const Vec2 x{radius * std::cos(beta), radius * std::sin(beta)};
  const Mat2 gm = g(x);
  const Mat2 gi = gm.inverse();
  const Vec2 xhat = x / radius;
  Vec2 n = gi * xhat * (-1.0);  // raise the covector -d|x|
  n = n / std::sqrt(quad_form(gm, n, n));
  Vec2 t{-std::sin(beta), std::cos(beta)};
  t = t / std::sqrt(quad_form(gm, t, t));
  return {x, n, t};
}

// Phase point of the fan coordinate (beta, alpha), alpha measured from the
// inward normal toward the positive tangent.
inline PhasePoint fan_phase(const MetricField& g, double beta, double alpha,
                            double radius = 1.0) {
  const BoundaryFrame f = boundary_frame(g, beta, radius);
  return {f.x, f.normal * std::cos(alpha) + f.tangent * std::sin(alpha)};
}

// Simplicity checks: strict convexity via the second fundamental form at
// boundary samples, non-trapping and conjugate points over a fan of
// boundary-inward geodesics.
inline SimplicityReport certify_simple(const MetricField& g,
                                       const CertifyOptions& opt = {}) {
  SimplicityReport rep;
  const double R = opt.flow.radius;

  // II(T,T) with the inward normal; strictly convex iff positive.
  double min_ii = 1e300;
  for (int i = 0; i < opt.n_boundary; ++i) {
    const double beta = kTwoPi * i / opt.n_boundary;
    const BoundaryFrame f = boundary_frame(g, beta, R);
    const Vec2 cp{-R * std::sin(beta), R * std::cos(beta)};
    const Vec2 cpp{-f.x.x, -f.x.y};
    const Christoffel G = christoffel(g, f.x);
    // nabla_{c'} c' = c'' + Gamma(c', c'); geodesic_acceleration returns -Gamma.
    const Vec2 acc = cpp - geodesic_acceleration(G, cp);
    const Mat2 gm = g(f.x);
    const double ii = quad_form(gm, acc, f.normal) / quad_form(gm, cp, cp);
    min_ii = std::min(min_ii, ii);
  }
  rep.min_second_fundamental = min_ii;
  rep.convex = min_ii > 0.0;

  const DiskGridFunction K = curvature_grid(g, R);
  bool trapped = false, conj = false;
  double tau_obs = 0.0;
  for (int i = 0; i < opt.nbeta; ++i) {
    const double beta = kTwoPi * i / opt.nbeta;
    for (int j = 0; j < opt.nalpha; ++j) {
      const double amax = kPi / 2 - opt.guard;
      const double alpha = -amax + 2.0 * amax * j / (opt.nalpha - 1);
      const PhasePoint p = fan_phase(g, beta, alpha, R);
      try {
        const JacobiResult jr = jacobi_scalar(g, p, K, opt.flow);
        tau_obs = std::max(tau_obs, jr.times.back());
        if (jr.conjugate_point) conj = true;
      } catch (const TrappedGeodesic&) {
        trapped = true;
      }
    }
  }
  rep.nontrapping = !trapped;
  rep.no_conjugate = !conj;
  rep.tau_max_observed = tau_obs;
  return rep;
}

}  // namespace geoxray
