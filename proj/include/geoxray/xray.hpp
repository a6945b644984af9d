// Geodesic X-ray transform, backprojection, normal operator, the flow-constant
// extension of fan data, and the even/odd continuation operators with their
// adjoints.
#pragma once

#include "geoxray/boundary.hpp"
#include "geoxray/geodesic.hpp"
#include "geoxray/grid.hpp"

namespace geoxray {

struct XrayOptions {
  FlowOptions flow;       // path integration (xray_transform keeps the default step)
  int nphi = 256;         // fiber quadrature nodes
};

// Composite Simpson over the recorded trace samples: uniform interior steps
// paired two at a time, leftover segments (odd count, final partial step to
// the refined exit) by trapezoid.
template <class F>
double trace_integral(const GeodesicTrace& tr, F&& f) {
  const size_t n = tr.times.size();
  if (n < 2) return 0.0;
  std::vector<double> fv(n);
  for (size_t i = 0; i < n; ++i) fv[i] = f(tr.states[i].x);

  // Uniform segments are all but the final (partial) one.
  size_t m = n - 2;  // number of uniform segments
  double acc = 0.0;
  size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double h2 = tr.times[i + 2] - tr.times[i];
    acc += h2 / 6.0 * (fv[i] + 4.0 * fv[i + 1] + fv[i + 2]);
  }
  for (; i + 1 < n; ++i)
    acc += 0.5 * (tr.times[i + 1] - tr.times[i]) * (fv[i] + fv[i + 1]);
  return acc;
}

// Same quadrature for integrands on phase space.
template <class U>
double trace_integral_sm(const GeodesicTrace& tr, U&& u) {
  const size_t n = tr.times.size();
  if (n < 2) return 0.0;
  std::vector<double> fv(n);
  for (size_t i = 0; i < n; ++i) fv[i] = u(tr.states[i].x, tr.states[i].v);
  size_t m = n - 2;
  double acc = 0.0;
  size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double h2 = tr.times[i + 2] - tr.times[i];
    acc += h2 / 6.0 * (fv[i] + 4.0 * fv[i + 1] + fv[i + 2]);
  }
  for (; i + 1 < n; ++i)
    acc += 0.5 * (tr.times[i + 1] - tr.times[i]) * (fv[i] + fv[i + 1]);
  return acc;
}

template <class U>
double xray_transform_sm(const MetricField& g, U&& u, const FanCoordinate& fc,
                         const FlowOptions& opt = {}) {
  FlowOptions o = opt;
  o.record = true;
  const GeodesicTrace tr =
      integrate_geodesic(g, fan_phase(g, fc.beta, fc.alpha, o.radius),
                         FlowDirection::forward, o);
  return trace_integral_sm(tr, u);
}

template <class F>
double xray_transform(const MetricField& g, F&& f, const FanCoordinate& fc,
                      const FlowOptions& opt = {}) {
  FlowOptions o = opt;
  o.record = true;
  const GeodesicTrace tr =
      integrate_geodesic(g, fan_phase(g, fc.beta, fc.alpha, o.radius),
                         FlowDirection::forward, o);
  return trace_integral(tr, f);
}

template <class F>
FanGrid xray_fan(const MetricField& g, F&& f, int nbeta, int nalpha,
                 double guard = kGuardBand, const FlowOptions& opt = {}) {
  FanGrid w(nbeta, nalpha, guard);
  for (int i = 0; i < nbeta; ++i)
    for (int j = 0; j < nalpha; ++j)
      w.value(i, j) =
          xray_transform(g, f, {w.beta_node(i), w.alpha_node(j)}, opt);
  return w;
}

struct IncomingCoord {
  FanCoordinate fc;
  double tau_back = 0.0;  // time from the incoming point to (x, v)
  bool clipped = false;   // landed outside the fan guard band
};

// Incoming fan coordinate of the geodesic through (x, v): flow backward to
// the boundary (equivalently, flow (x, -v) forward and reverse the exit).
inline IncomingCoord backward_fan(const MetricField& g, const Vec2& x,
                                  const Vec2& v, double guard = kGuardBand,
                                  const FlowOptions& opt = {}) {
  FlowOptions o = opt;
  o.record = false;
  const GeodesicTrace tr =
      integrate_geodesic(g, {x, -v}, FlowDirection::forward, o);
  IncomingCoord ic;
  ic.fc.beta = wrap_angle(std::atan2(tr.exit_phase.x.y, tr.exit_phase.x.x));
  ic.fc.alpha = fan_angle(g, ic.fc.beta, -tr.exit_phase.v, o.radius);
  ic.tau_back = tr.exit_time;
  ic.clipped = std::fabs(ic.fc.alpha) > kPi / 2 - guard;
  return ic;
}

// Flow-constant extension of fan data: value of w at the incoming coordinate
// of the geodesic through (x, v). Values landing outside the guard band use
// the fan grid's flat extrapolation and set `clipped`.
inline double sharp_eval(const MetricField& g, const FanGrid& w, const Vec2& x,
                         const Vec2& v, const FlowOptions& opt = {},
                         bool* clipped = nullptr) {
  const IncomingCoord ic = backward_fan(g, x, v, w.guard(), opt);
  if (clipped) *clipped = ic.clipped;
  return w.interp(ic.fc);
}

// Fiber circle of g-unit vectors at x in an orthonormal frame; phi = 0 points
// along the first frame vector.
inline Vec2 fiber_dir(const OrthoFrame& fr, double phi) {
  return fr.e1 * std::cos(phi) + fr.e2 * std::sin(phi);
}

struct BackprojectOptions {
  int nphi = 256;
  double guard = kGuardBand;
  FlowOptions flow = {.h_ode = 0.01, .record = false};
};

// Backprojection: trapezoid quadrature of the flow-constant extension over
// the g-fiber circle at x. Pairs phi, phi+pi share one full chord, so only
// nphi/2 geodesics are integrated.
inline double backprojection(const MetricField& g, const FanGrid& w,
                             const Vec2& x, const BackprojectOptions& opt = {},
                             int* clip_count = nullptr) {
  const OrthoFrame fr = ortho_frame(g, x);
  const int n = opt.nphi;
  FlowOptions o = opt.flow;
  o.record = false;
  double acc = 0.0;
  int clips = 0;
  for (int j = 0; j < n / 2; ++j) {
    const double phi = kTwoPi * j / n;
    const Vec2 v = fiber_dir(fr, phi);
    // Exit of (x, v) is the reversed incoming coordinate for direction -v,
    // and vice versa.
    for (const Vec2 dir : {v, -v}) {
      const GeodesicTrace tr =
          integrate_geodesic(g, {x, dir}, FlowDirection::forward, o);
      const double beta =
          wrap_angle(std::atan2(tr.exit_phase.x.y, tr.exit_phase.x.x));
      const double alpha = fan_angle(g, beta, -tr.exit_phase.v, o.radius);
      if (std::fabs(alpha) > kPi / 2 - opt.guard) ++clips;
      acc += w.interp(beta, alpha);
    }
  }
  if (clip_count) *clip_count = clips;
  return acc * kTwoPi / n;
}

// Normal operator at a point: 2 * fiber average of forward path integrals,
// N f(x) = 2 int_{S_x} int_0^tau f dt dphi.
template <class F>
double normal_point(const MetricField& g, F&& f, const Vec2& x,
                    const BackprojectOptions& opt = {}) {
  const OrthoFrame fr = ortho_frame(g, x);
  const int n = opt.nphi;
  FlowOptions o = opt.flow;
  o.record = true;
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const GeodesicTrace tr = integrate_geodesic(
        g, {x, fiber_dir(fr, kTwoPi * j / n)}, FlowDirection::forward, o);
    acc += trace_integral(tr, f);
  }
  return 2.0 * acc * kTwoPi / n;
}

template <class F>
DiskGridFunction normal_operator(const MetricField& g, F&& f, int nr, int ntheta,
                                 const BackprojectOptions& opt = {},
                                 double radius = 1.0) {
  DiskGridFunction out(nr, ntheta, radius);
  const double center = normal_point(g, f, {0.0, 0.0}, opt);
  for (int j = 0; j < ntheta; ++j) out.node(0, j) = center;
  for (int i = 1; i <= nr; ++i)
    for (int j = 0; j < ntheta; ++j)
      out.node(i, j) = normal_point(g, f, out.node_point(i, j), opt);
  return out;
}

// L^2(M, dVol_g) inner product by tensor trapezoid on the polar grid.
template <class F1, class F2>
double disk_inner(const MetricField& g, F1&& f1, F2&& f2, int nr, int ntheta,
                  double radius = 1.0) {
  const double dr = radius / nr, dth = kTwoPi / ntheta;
  double acc = 0.0;
  for (int i = 1; i <= nr; ++i) {
    const double r = dr * i;
    const double wr = (i == nr) ? 0.5 : 1.0;
    for (int j = 0; j < ntheta; ++j) {
      const double th = dth * j;
      const Vec2 p{r * std::cos(th), r * std::sin(th)};
      acc += wr * f1(p) * f2(p) * std::sqrt(g(p).det()) * r;
    }
  }
  return acc * dr * dth;
}

template <class F>
double disk_norm(const MetricField& g, F&& f, int nr, int ntheta,
                 double radius = 1.0) {
  return std::sqrt(disk_inner(g, f, f, nr, ntheta, radius));
}

// Data on both boundary hemispheres of the sphere bundle. The outgoing sheet
// is indexed by the incoming fan coordinate of the reversed direction, so
// both sheets live on the same guard-banded fan grid.
struct BoundaryPairFunction {
  FanGrid in;
  FanGrid out;
};

enum class Parity { even, odd };

// Even/odd continuation: w on the incoming sheet, +-w pulled through the
// scattering relation on the outgoing sheet.
inline BoundaryPairFunction continuation(const FanGrid& w, Parity parity,
                                         const ScatteringTable& table) {
  BoundaryPairFunction u{w, FanGrid(w.nbeta(), w.nalpha(), w.guard())};
  const double sign = (parity == Parity::even) ? 1.0 : -1.0;
  for (int i = 0; i < w.nbeta(); ++i)
    for (int j = 0; j < w.nalpha(); ++j) {
      const ScatterResult s =
          table.map({w.beta_node(i), w.alpha_node(j)});
      u.out.value(i, j) = sign * w.interp(s.beta_out, s.alpha_out);
    }
  return u;
}

// Adjoint of the continuation: (u +- u o scattering) restricted to the
// incoming sheet.
inline FanGrid continuation_adjoint(const BoundaryPairFunction& u, Parity parity,
                                    const ScatteringTable& table) {
  FanGrid r(u.in.nbeta(), u.in.nalpha(), u.in.guard());
  const double sign = (parity == Parity::even) ? 1.0 : -1.0;
  for (int i = 0; i < r.nbeta(); ++i)
    for (int j = 0; j < r.nalpha(); ++j) {
      const ScatterResult s = table.map({r.beta_node(i), r.alpha_node(j)});
      r.value(i, j) =
          u.in.value(i, j) + sign * u.out.interp(s.beta_out, s.alpha_out);
    }
  return r;
}

}  // namespace geoxray
