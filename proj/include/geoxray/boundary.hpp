// Boundary geometry: fan coordinates on the inward unit sphere bundle over
// the boundary circle, scattering relation, boundary distances by shooting,
// and tangential boundary-metric recovery from distance asymptotics.
#pragma once

#include <functional>
#include <vector>

#include "geoxray/geodesic.hpp"
#include "geoxray/grid.hpp"

namespace geoxray {

inline constexpr double kGuardBand = 0.05;

struct FanCoordinate {
  double beta = 0.0;   // boundary angle in [0, 2pi)
  double alpha = 0.0;  // incidence angle from the g-unit inward normal
};

// Values sampled on the guard-banded incoming fan: uniform beta nodes
// (periodic) times uniform alpha nodes on [-pi/2+guard, pi/2-guard].
class FanGrid {
 public:
  FanGrid() = default;
  FanGrid(int nbeta, int nalpha, double guard = kGuardBand)
      : nbeta_(nbeta), nalpha_(nalpha), guard_(guard),
        vals_(nbeta * nalpha, 0.0) {}

  static FanGrid from_function(const std::function<double(double, double)>& f,
                               int nbeta, int nalpha, double guard = kGuardBand) {
    FanGrid w(nbeta, nalpha, guard);
    for (int i = 0; i < nbeta; ++i)
      for (int j = 0; j < nalpha; ++j)
        w.vals_[w.idx(i, j)] = f(w.beta_node(i), w.alpha_node(j));
    return w;
  }

  int nbeta() const { return nbeta_; }
  int nalpha() const { return nalpha_; }
  double guard() const { return guard_; }
  double alpha_min() const { return -kPi / 2 + guard_; }
  double alpha_max() const { return kPi / 2 - guard_; }
  double dbeta() const { return kTwoPi / nbeta_; }
  double dalpha() const { return (alpha_max() - alpha_min()) / (nalpha_ - 1); }
  double beta_node(int i) const { return dbeta() * i; }
  double alpha_node(int j) const { return alpha_min() + dalpha() * j; }
  double alpha_weight(int j) const {
    return (j == 0 || j == nalpha_ - 1) ? dalpha() / 2 : dalpha();
  }

  double& value(int i, int j) { return vals_[idx(i, j)]; }
  double value(int i, int j) const { return vals_[idx(i, j)]; }
  const std::vector<double>& values() const { return vals_; }
  std::vector<double>& values() { return vals_; }

  // Cubic Lagrange, periodic in beta, stencil clamped in alpha; alpha outside
  // the guard band extrapolates flat (integrands there carry a cos(alpha)
  // weight, so the induced error stays at guard-band size).
  double interp(double beta, double alpha) const {
    if (alpha < alpha_min()) alpha = alpha_min();
    if (alpha > alpha_max()) alpha = alpha_max();
    const double sb = wrap_angle(beta) / dbeta();
    int i0 = static_cast<int>(std::floor(sb));
    if (i0 >= nbeta_) i0 = nbeta_ - 1;
    const double sa = (alpha - alpha_min()) / dalpha();
    int j0 = static_cast<int>(std::floor(sa));
    if (j0 < 1) j0 = 1;
    if (j0 > nalpha_ - 3) j0 = nalpha_ - 3;

    double wb[4], wa[4];
    detail::lagrange4(sb - i0, wb);
    detail::lagrange4(sa - j0, wa);
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
      const int ia = ((i0 - 1 + a) % nbeta_ + nbeta_) % nbeta_;
      double row = 0.0;
      for (int b = 0; b < 4; ++b) row += wa[b] * vals_[idx(ia, j0 - 1 + b)];
      acc += wb[a] * row;
    }
    return acc;
  }
  double interp(const FanCoordinate& fc) const { return interp(fc.beta, fc.alpha); }

 private:
  int idx(int i, int j) const { return i * nalpha_ + j; }

  int nbeta_ = 0;
  int nalpha_ = 0;
  double guard_ = kGuardBand;
  std::vector<double> vals_;
};

// g-arc speed of the boundary circle at angle beta.
inline double boundary_speed(const MetricField& g, double beta, double radius = 1.0) {
  const Vec2 x{radius * std::cos(beta), radius * std::sin(beta)};
  const Vec2 t{-std::sin(beta), std::cos(beta)};
  return radius * g.g_norm(x, t);
}

// L^2_mu inner product on the incoming fan:
// <u, w> = sum u w cos(alpha) |c'(beta)|_g dbeta dalpha.
inline double fan_inner(const MetricField& g, const FanGrid& u, const FanGrid& w,
                        double radius = 1.0) {
  double acc = 0.0;
  for (int i = 0; i < u.nbeta(); ++i) {
    const double arc = boundary_speed(g, u.beta_node(i), radius) * u.dbeta();
    for (int j = 0; j < u.nalpha(); ++j) {
      const double mu = std::cos(u.alpha_node(j));
      acc += u.value(i, j) * w.value(i, j) * mu * arc * u.alpha_weight(j);
    }
  }
  return acc;
}

inline double fan_norm(const MetricField& g, const FanGrid& u, double radius = 1.0) {
  return std::sqrt(fan_inner(g, u, u, radius));
}

struct ScatterResult {
  double beta_out = 0.0;   // exit boundary angle
  double alpha_out = 0.0;  // incoming fan coordinate of the reversed exit direction
  double tau = 0.0;
};

// Incoming fan coordinate of a g-unit vector v at boundary angle beta.
inline double fan_angle(const MetricField& g, double beta, const Vec2& v,
                        double radius = 1.0) {
  const BoundaryFrame fr = boundary_frame(g, beta, radius);
  const Vec2 x{radius * std::cos(beta), radius * std::sin(beta)};
  const Mat2 G = g(x);
  const double c = quad_form(G, v, fr.normal);
  const double s = quad_form(G, v, fr.tangent);
  return std::atan2(s, c);
}

inline ScatterResult scattering_relation(const MetricField& g,
                                         const FanCoordinate& fc,
                                         const FlowOptions& opt = {}) {
  FlowOptions o = opt;
  o.record = false;
  const GeodesicTrace tr =
      integrate_geodesic(g, fan_phase(g, fc.beta, fc.alpha, o.radius),
                         FlowDirection::forward, o);
  ScatterResult out;
  out.beta_out = wrap_angle(std::atan2(tr.exit_phase.x.y, tr.exit_phase.x.x));
  out.alpha_out = fan_angle(g, out.beta_out, -tr.exit_phase.v, o.radius);
  out.tau = tr.exit_time;
  return out;
}

// Tabulated scattering relation over the fan. The exit angle is stored as the
// deviation beta' - (beta + pi), which is smooth and small for near-Euclidean
// metrics, so it interpolates cleanly.
class ScatteringTable {
 public:
  ScatteringTable() = default;
  ScatteringTable(const MetricField& g, int nbeta, int nalpha,
                  double guard = kGuardBand, const FlowOptions& opt = {})
      : dbeta_(nbeta, nalpha, guard), alpha_(nbeta, nalpha, guard),
        tau_(nbeta, nalpha, guard) {
    for (int i = 0; i < nbeta; ++i)
      for (int j = 0; j < nalpha; ++j) {
        const FanCoordinate fc{dbeta_.beta_node(i), dbeta_.alpha_node(j)};
        const ScatterResult s = scattering_relation(g, fc, opt);
        dbeta_.value(i, j) = angle_diff(s.beta_out, fc.beta + kPi);
        alpha_.value(i, j) = s.alpha_out;
        tau_.value(i, j) = s.tau;
      }
  }

  ScatterResult map(const FanCoordinate& fc) const {
    ScatterResult s;
    s.beta_out = wrap_angle(fc.beta + kPi + dbeta_.interp(fc.beta, fc.alpha));
    s.alpha_out = alpha_.interp(fc.beta, fc.alpha);
    s.tau = tau_.interp(fc.beta, fc.alpha);
    return s;
  }
  double tau(const FanCoordinate& fc) const { return tau_.interp(fc.beta, fc.alpha); }
  const FanGrid& tau_grid() const { return tau_; }

  // Diagnostic: inject a smooth spurious deviation into the tabulated exit
  // data. Consistency checks use this to confirm that downstream pipelines
  // actually consume the table.
  void corrupt(double amp) {
    for (int i = 0; i < dbeta_.nbeta(); ++i)
      for (int j = 0; j < dbeta_.nalpha(); ++j) {
        const double b = dbeta_.beta_node(i), a = dbeta_.alpha_node(j);
        dbeta_.value(i, j) += amp * std::sin(3.0 * b + 2.0 * a);
        alpha_.value(i, j) += amp * std::cos(2.0 * b - a);
      }
  }

 private:
  FanGrid dbeta_, alpha_, tau_;
};

// Geodesic distance between boundary points by shooting on the incidence
// angle: bracket over a fan scan, then secant refinement of the exit angle.
// When no fan direction brackets the target (nearly coincident points clipped
// by the guard band) the g-arc length of the short boundary arc is returned
// and `clipped` is set.
inline double boundary_distance(const MetricField& g, double beta1, double beta2,
                                bool* clipped = nullptr,
                                const FlowOptions& opt = {}) {
  if (clipped) *clipped = false;
  const double gap = angle_diff(beta2, beta1);
  if (gap == 0.0) return 0.0;

  FlowOptions o = opt;
  o.record = false;
  auto shoot_with = [&](double a, const FlowOptions& fo) {
    const GeodesicTrace tr = integrate_geodesic(
        g, fan_phase(g, beta1, a, fo.radius), FlowDirection::forward, fo);
    const double be = std::atan2(tr.exit_phase.x.y, tr.exit_phase.x.x);
    return std::pair<double, double>(angle_diff(be, beta2), tr.exit_time);
  };
  auto shoot = [&](double a) { return shoot_with(a, o); };

  // Bracketing only needs rough exit angles; scan with a coarser step. The
  // scan may approach glancing much closer than the fan guard band: nothing
  // is tabulated here and short near-tangent chords integrate fine.
  FlowOptions oscan = o;
  oscan.h_ode = std::max(o.h_ode, 0.01);
  const int nscan = 128;
  const double shoot_guard = 0.005;
  const double lo = -kPi / 2 + shoot_guard, hi = kPi / 2 - shoot_guard;
  double aprev = lo, fprev = shoot_with(lo, oscan).first;
  double abr0 = 0.0, abr1 = 0.0, fbr0 = 0.0, fbr1 = 0.0;
  bool found = false;
  for (int k = 1; k < nscan && !found; ++k) {
    const double a = lo + (hi - lo) * k / (nscan - 1);
    const double f = shoot_with(a, oscan).first;
    // Require both residuals on the same branch of the angle difference so a
    // wrap through +-pi is not mistaken for a bracket.
    if (fprev * f <= 0.0 && std::fabs(fprev) < 2.0 && std::fabs(f) < 2.0) {
      abr0 = aprev; abr1 = a; fbr0 = fprev; fbr1 = f;
      found = true;
    }
    aprev = a; fprev = f;
  }
  if (!found) {
    if (!clipped) throw NoBracket("boundary_distance: no fan direction brackets the target");
    *clipped = true;
    // Short-arc bound: g-length of the boundary arc between the two points.
    const int n = 64;
    double len = 0.0;
    for (int k = 0; k < n; ++k) {
      const double b = beta1 + gap * (k + 0.5) / n;
      len += boundary_speed(g, b, o.radius) * std::fabs(gap) / n;
    }
    return len;
  }

  double a0 = abr0, a1 = abr1, f0 = fbr0, f1 = fbr1, tau = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double a = (f1 != f0) ? a1 - f1 * (a1 - a0) / (f1 - f0) : 0.5 * (a0 + a1);
    const double ac = std::min(std::max(a, std::min(a0, a1)), std::max(a0, a1));
    const auto [f, t] = shoot(ac);
    tau = t;
    if (std::fabs(f) < 1e-10) return tau;
    if (f0 * f <= 0.0) { a1 = ac; f1 = f; } else { a0 = ac; f0 = f; }
    if (std::fabs(a1 - a0) < 1e-15) break;
  }
  return tau;
}

// Tangential boundary norm at angle beta from the short-distance asymptotics
// of a boundary-distance oracle d(beta1, beta2): Richardson-extrapolate
// q(s) = d(beta, beta+s)/s through s0, s0/2, s0/4.
inline double recover_boundary_metric(const std::function<double(double, double)>& d,
                                      double beta, double s0 = 0.1) {
  double s[3], q[3];
  for (int k = 0; k < 3; ++k) {
    s[k] = s0 / (1 << k);
    q[k] = d(beta, beta + s[k]) / s[k];
  }
  // Neville to s = 0 through the three nodes.
  for (int m = 1; m < 3; ++m)
    for (int k = 0; k < 3 - m; ++k)
      q[k] = (s[k + m] * q[k] - s[k] * q[k + 1]) / (s[k + m] - s[k]);
  return q[0];
}

}  // namespace geoxray
