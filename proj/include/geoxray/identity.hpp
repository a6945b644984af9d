// Experiment layer: transport and Hilbert-transform identities on the fan,
// the constructive surjectivity solver for the backprojection, Euclidean
// filtered backprojection as an independent oracle, and the two end-to-end
// rigidity experiments (gauge comparison and DN-map equality).
#pragma once

#include <random>
#include <sstream>
#include <string>

#include "geoxray/boundary.hpp"
#include "geoxray/fiber.hpp"
#include "geoxray/laplace.hpp"
#include "geoxray/xray.hpp"

namespace geoxray {

// ---------------------------------------------------------------------------
// Reports

struct RefinementRow {
  std::string grid;
  double residual = 0.0;
};

struct IdentityReport {
  std::string name;
  std::vector<RefinementRow> table;
  double residual = 0.0;      // finest level
  double max_abs_left = 0.0;  // finest level, max |LHS|
  double min_ratio = 0.0;     // smallest reduction factor between levels
  bool refinement_ok = true;  // every reduction factor >= kRefineFloor
  bool passed = true;

  static constexpr double kRefineFloor = 1.8;

  void finalize() {
    residual = table.empty() ? 0.0 : table.back().residual;
    min_ratio = 1e300;
    refinement_ok = true;
    for (size_t i = 0; i + 1 < table.size(); ++i) {
      const double r0 = table[i].residual, r1 = table[i + 1].residual;
      if (r0 < 1e-11) continue;  // at rounding level, ratios are noise
      const double ratio = r0 / std::max(r1, 1e-300);
      min_ratio = std::min(min_ratio, ratio);
      if (ratio < kRefineFloor) refinement_ok = false;
    }
    if (min_ratio == 1e300) min_ratio = 0.0;
    passed = passed && refinement_ok;
  }
};

namespace detail {

inline std::string grid_label(int a, int b, double h) {
  std::ostringstream os;
  os << a << "x" << b << " h=" << h;
  return os.str();
}

// Relative residual of a fan-grid difference in L^2_mu; falls back to the
// absolute norm when the reference side vanishes.
inline double fan_rel_residual(const MetricField& g, const FanGrid& lhs,
                               const FanGrid& rhs) {
  FanGrid diff = lhs;
  for (size_t n = 0; n < diff.values().size(); ++n)
    diff.values()[n] -= rhs.values()[n];
  const double den = fan_norm(g, rhs);
  const double num = fan_norm(g, diff);
  return (den > 1e-10) ? num / den : num;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Transport identity: I(Xf) = -(f0 - f0 o scattering) on the incoming fan,
// i.e. the path integral of the flow derivative telescopes to the boundary
// values. Refinement halves the integrator step.

struct TransportOptions {
  int nbeta = 128;
  int nalpha = 64;
  double guard = kGuardBand;
  double h0 = 0.04;  // coarsest chord step
  int levels = 3;
};

template <class F>
IdentityReport check_transport_identity(const MetricField& g, F f,
                                        const TransportOptions& opt = {}) {
  IdentityReport rep;
  rep.name = "transport";
  auto lift = grad_lift(g, f);
  for (int lev = 0; lev < opt.levels; ++lev) {
    const double h = opt.h0 / (1 << lev);
    FanGrid lhs(opt.nbeta, opt.nalpha, opt.guard);
    FanGrid rhs(opt.nbeta, opt.nalpha, opt.guard);
    FlowOptions fo;
    fo.h_ode = h;
    fo.record = true;
    for (int i = 0; i < opt.nbeta; ++i)
      for (int j = 0; j < opt.nalpha; ++j) {
        const FanCoordinate fc{lhs.beta_node(i), lhs.alpha_node(j)};
        const PhasePoint p0 = fan_phase(g, fc.beta, fc.alpha);
        const GeodesicTrace tr = integrate_geodesic(g, p0, FlowDirection::forward, fo);
        lhs.value(i, j) = trace_integral_sm(tr, lift);
        rhs.value(i, j) = f(tr.exit_phase.x) - f(p0.x);
      }
    rep.table.push_back({detail::grid_label(opt.nbeta, opt.nalpha, h),
                         detail::fan_rel_residual(g, lhs, rhs)});
    if (lev == opt.levels - 1)
      for (double v : lhs.values())
        rep.max_abs_left = std::max(rep.max_abs_left, std::fabs(v));
  }
  rep.finalize();
  return rep;
}

inline IdentityReport check_transport_identity(const MetricField& g,
                                               const DiskGridFunction& f,
                                               const TransportOptions& opt = {}) {
  return check_transport_identity(
      g, [&f](const Vec2& p) { return f.eval(p); }, opt);
}

// ---------------------------------------------------------------------------
// Hilbert identity machinery

namespace detail {

// Periodic-by-periodic sampled field with bicubic Lagrange interpolation;
// first axis is the boundary angle, second the full fiber angle.
struct PeriodicField2 {
  int nx = 0, ny = 0;
  std::vector<double> vals;

  PeriodicField2() = default;
  PeriodicField2(int nx_, int ny_) : nx(nx_), ny(ny_), vals(nx_ * ny_, 0.0) {}

  double& at(int i, int j) { return vals[i * ny + j]; }
  double at(int i, int j) const { return vals[i * ny + j]; }

  double interp(double a, double b) const {
    const double sa = wrap_angle(a) / (kTwoPi / nx);
    const double sb = wrap_angle(b) / (kTwoPi / ny);
    int i0 = static_cast<int>(std::floor(sa));
    int j0 = static_cast<int>(std::floor(sb));
    double wa[4], wb[4];
    lagrange4(sa - i0, wa);
    lagrange4(sb - j0, wb);
    double acc = 0.0;
    for (int p = 0; p < 4; ++p) {
      const int ip = ((i0 - 1 + p) % nx + nx) % nx;
      double row = 0.0;
      for (int q = 0; q < 4; ++q)
        row += wb[q] * vals[ip * ny + ((j0 - 1 + q) % ny + ny) % ny];
      acc += wa[p] * row;
    }
    return acc;
  }
};

// Assemble the full boundary fiber field of a two-sheet boundary function:
// fiber angle psi measured from the inward normal toward the positive
// tangent, so |psi| < pi/2 is the incoming sheet and the rest is the
// outgoing sheet indexed by the reversed direction.
inline PeriodicField2 boundary_fiber_field(const BoundaryPairFunction& u, int nphi) {
  const int nbeta = u.in.nbeta();
  PeriodicField2 f(nbeta, nphi);
  for (int i = 0; i < nbeta; ++i) {
    const double beta = u.in.beta_node(i);
    for (int k = 0; k < nphi; ++k) {
      const double psi = kTwoPi * k / nphi;
      const double a = angle_diff(psi, 0.0);
      if (std::fabs(a) <= kPi / 2)
        f.at(i, k) = u.in.interp(beta, a);
      else
        f.at(i, k) = u.out.interp(beta, angle_diff(psi, kPi));
    }
  }
  return f;
}

// Apply the even-part fiberwise Hilbert transform row by row.
inline PeriodicField2 hilbert_even_field(const PeriodicField2& f) {
  PeriodicField2 out(f.nx, f.ny);
  std::vector<double> fiber(f.ny);
  for (int i = 0; i < f.nx; ++i) {
    for (int k = 0; k < f.ny; ++k) fiber[k] = f.at(i, k);
    const std::vector<double> h = hilbert_even_fiber(fiber);
    for (int k = 0; k < f.ny; ++k) out.at(i, k) = h[k];
  }
  return out;
}

// 2 pi A*_- H_+ A_+ w on the fan of w, using a tabulated scattering relation.
// The fiber angle psi runs from the inward normal toward the positive
// boundary tangent; that frame is negatively oriented with respect to the
// disk (the inward normal is -r_hat), so the positively oriented fiberwise
// Hilbert transform equals minus the transform taken in psi coordinates.
inline FanGrid hilbert_chain_lhs(const FanGrid& w, const ScatteringTable& table,
                                 int nphi) {
  const BoundaryPairFunction u = continuation(w, Parity::even, table);
  const PeriodicField2 hf = hilbert_even_field(boundary_fiber_field(u, nphi));
  FanGrid lhs(w.nbeta(), w.nalpha(), w.guard());
  for (int i = 0; i < w.nbeta(); ++i)
    for (int j = 0; j < w.nalpha(); ++j) {
      const FanCoordinate fc{w.beta_node(i), w.alpha_node(j)};
      const ScatterResult s = table.map(fc);
      lhs.value(i, j) = -kTwoPi * (hf.interp(fc.beta, fc.alpha) -
                                   hf.interp(s.beta_out, s.alpha_out + kPi));
    }
  return lhs;
}

}  // namespace detail

// Built-in tapered generators for the Hilbert identity: a low boundary mode
// times cos(alpha), with a cos^2(alpha) taper that suppresses the glancing
// layer clipped by the guard band.
inline std::function<double(double, double)> taper_generator(int m) {
  return [m](double beta, double alpha) {
    const double c = std::cos(alpha);
    return std::cos(m * beta) * c * c * c;
  };
}

struct HilbertOptions {
  int levels = 3;
  int nbeta0 = 32, nalpha0 = 16, nphi0 = 64;  // level-0 fan and fiber sizes
  int nr0 = 12, ntheta0 = 24;                 // level-0 backprojection grid
  int nphi_back = 128;                        // fiber quadrature nodes for I*
  double guard = kGuardBand;
  double h_fan = 0.01;   // chord step for the table and fan path integrals
  double h_back = 0.015; // chord step inside the backprojection
};

// Hilbert identity 2 pi A*_- H_+ A_+ w = I X_perp I* w, checked in relative
// L^2_mu across refinement levels that double every grid simultaneously.
inline IdentityReport check_hilbert_identity(
    const MetricField& g, const std::function<double(double, double)>& wfun,
    const HilbertOptions& opt = {}) {
  IdentityReport rep;
  rep.name = "hilbert";
  for (int lev = 0; lev < opt.levels; ++lev) {
    const int nbeta = opt.nbeta0 << lev;
    const int nalpha = opt.nalpha0 << lev;
    const int nphi = opt.nphi0 << lev;
    const int nr = opt.nr0 << lev;
    const int ntheta = opt.ntheta0 << lev;

    const FanGrid w = FanGrid::from_function(wfun, nbeta, nalpha, opt.guard);
    FlowOptions fo;
    fo.h_ode = opt.h_fan;
    const ScatteringTable table(g, nbeta, nalpha, opt.guard, fo);
    const FanGrid lhs = detail::hilbert_chain_lhs(w, table, nphi);

    // Right side: backprojection on a disk grid, then the rotated derivative
    // of the (scalar) result integrated along each fan geodesic.
    BackprojectOptions bo;
    bo.nphi = opt.nphi_back;
    bo.guard = opt.guard;
    bo.flow.h_ode = opt.h_back;
    DiskGridFunction u1(nr, ntheta);
    const double center = backprojection(g, w, {0.0, 0.0}, bo);
    for (int j = 0; j < ntheta; ++j) u1.node(0, j) = center;
    for (int i = 1; i <= nr; ++i)
      for (int j = 0; j < ntheta; ++j)
        u1.node(i, j) = backprojection(g, w, u1.node_point(i, j), bo);

    auto xperp_u1 = [&](const Vec2& x, const Vec2& v) {
      const Vec2 grad = u1.grad(x);
      const Vec2 vp = rotate_cw(g, x, v);
      return grad.x * vp.x + grad.y * vp.y;
    };
    FanGrid rhs(nbeta, nalpha, opt.guard);
    FlowOptions fi;
    fi.h_ode = opt.h_fan;
    for (int i = 0; i < nbeta; ++i)
      for (int j = 0; j < nalpha; ++j)
        rhs.value(i, j) = xray_transform_sm(
            g, xperp_u1, {rhs.beta_node(i), rhs.alpha_node(j)}, fi);

    rep.table.push_back({detail::grid_label(nbeta, nalpha, opt.h_fan),
                         detail::fan_rel_residual(g, lhs, rhs)});
    if (lev == opt.levels - 1)
      for (double v : lhs.values())
        rep.max_abs_left = std::max(rep.max_abs_left, std::fabs(v));
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Surjectivity of the backprojection: solve phi N1 phi h = f on the extended
// disk by a preconditioned conjugate-residual iteration with an exactly
// symmetric discrete normal operator, then read off w = sharp(I1(phi h)).

struct SurjectivityOptions {
  double radius1 = 1.2;        // extended disk radius
  int nr1 = 48, ntheta1 = 96;  // extended-disk polar grid
  // Oversampled fan: more chords than grid unknowns, so the discrete normal
  // operator has no spurious near-null space beyond the Tikhonov floor.
  int nbeta1 = 128, nalpha1 = 64;
  double guard = kGuardBand;
  double h_chord = 0.01;
  // Tikhonov level chosen against semi-convergence: sub-chord-scale modes the
  // discrete system cannot certify are pinned near zero instead of absorbing
  // residual, which is what keeps the continuum verification error small.
  double eps_tik = 1e-2;
  double tol = 1e-5;
  int max_iter = 500;
  int ncart = 96, pad = 4;   // Riesz preconditioner transfer grid
  double riesz_cap = 25.0;   // frequency clamp inside the preconditioner
  // Identity shift keeping the preconditioner SPD. Order one, so modes the
  // transfer grid cannot see keep their unpreconditioned convergence rate.
  double riesz_shift = 1.0;
  bool precondition = true;
  bool support_cutoff = true;  // clamp targets to r <= 0.9 smoothly
  bool check_simple = true;
  bool verify = true;
  int verify_nr = 20, verify_ntheta = 40, verify_nphi = 128;
};

struct SurjectivityReport {
  int iterations = 0;
  double rel_residual = 1.0;
  bool converged = false;
  bool monotone = true;          // preconditioned residual norm nonincreasing
  double verify_error = -1.0;    // |I* w - f| / |f| on the unit disk
  std::vector<double> history;   // preconditioned residual norms
};

struct SurjectivityResult {
  FanGrid w;           // on the unit-disk incoming fan
  DiskGridFunction h;  // solution on the extended disk
  SurjectivityReport report;
};

namespace detail {

// Cubic interpolation stencil on a polar grid with the same mirror-at-center
// convention as DiskGridFunction::interp_polar, but with the center ring
// collapsed into a single unknown so gather and scatter are exact transposes.
struct PolarStencil {
  int node[16];
  float w[16];
};

inline PolarStencil polar_stencil(int nr, int ntheta, double radius, const Vec2& p) {
  const double dr = radius / nr;
  double r = norm(p);
  if (r > radius) r = radius;
  const double th = std::atan2(p.y, p.x);
  const double sr = r / dr;
  int i0 = static_cast<int>(std::floor(sr));
  if (i0 > nr - 2) i0 = nr - 2;
  if (i0 < 0) i0 = 0;
  const double st = wrap_angle(th) / (kTwoPi / ntheta);
  int j0 = static_cast<int>(std::floor(st));
  if (j0 >= ntheta) j0 = ntheta - 1;
  double wr[4], wt[4];
  lagrange4(sr - i0, wr);
  lagrange4(st - j0, wt);
  PolarStencil s;
  int n = 0;
  for (int a = 0; a < 4; ++a) {
    int ia = i0 - 1 + a;
    int jshift = 0;
    if (ia < 0) {
      ia = -ia;
      jshift = ntheta / 2;
    }
    for (int b = 0; b < 4; ++b) {
      const int jb = ((j0 - 1 + b + jshift) % ntheta + ntheta) % ntheta;
      s.node[n] = (ia == 0) ? 0 : 1 + (ia - 1) * ntheta + jb;
      s.w[n] = static_cast<float>(wr[a] * wt[b]);
      ++n;
    }
  }
  return s;
}

// Quadrature weights reproducing trace_integral on the recorded time nodes.
inline std::vector<double> trace_weights(const std::vector<double>& t) {
  const size_t n = t.size();
  std::vector<double> w(n, 0.0);
  if (n < 2) return w;
  size_t m = n - 2;
  size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double h2 = t[i + 2] - t[i];
    w[i] += h2 / 6.0;
    w[i + 1] += 4.0 * h2 / 6.0;
    w[i + 2] += h2 / 6.0;
  }
  for (; i + 1 < n; ++i) {
    const double hh = 0.5 * (t[i + 1] - t[i]);
    w[i] += hh;
    w[i + 1] += hh;
  }
  return w;
}

// Discretized ray transform of the extended disk: every fan chord sampled
// along the flow, with per-sample interpolation stencils and quadrature
// weights stored once so apply and transpose-apply share the exact same
// coefficients.
struct ChordSystem {
  int nchord = 0;
  int nunk = 0;
  std::vector<int> offset;       // chord c covers samples [offset[c], offset[c+1])
  std::vector<double> q;         // quadrature weight per sample
  std::vector<PolarStencil> st;  // interpolation stencil per sample
  std::vector<double> fanw;      // L^2_mu weight per chord

  void apply(const std::vector<double>& u, std::vector<double>& chord_vals) const {
    chord_vals.assign(nchord, 0.0);
    for (int c = 0; c < nchord; ++c) {
      double acc = 0.0;
      for (int s = offset[c]; s < offset[c + 1]; ++s) {
        const PolarStencil& ps = st[s];
        double val = 0.0;
        for (int k = 0; k < 16; ++k) val += ps.w[k] * u[ps.node[k]];
        acc += q[s] * val;
      }
      chord_vals[c] = acc;
    }
  }

  void apply_transpose(const std::vector<double>& chord_vals,
                       std::vector<double>& out) const {
    out.assign(nunk, 0.0);
    for (int c = 0; c < nchord; ++c) {
      const double cv = chord_vals[c];
      if (cv == 0.0) continue;
      for (int s = offset[c]; s < offset[c + 1]; ++s) {
        const double cq = cv * q[s];
        const PolarStencil& ps = st[s];
        for (int k = 0; k < 16; ++k) out[ps.node[k]] += cq * ps.w[k];
      }
    }
  }
};

inline ChordSystem build_chord_system(const MetricField& g,
                                      const SurjectivityOptions& opt) {
  ChordSystem cs;
  const FanGrid proto(opt.nbeta1, opt.nalpha1, opt.guard);
  cs.nchord = opt.nbeta1 * opt.nalpha1;
  cs.nunk = 1 + (opt.nr1 - 1) * opt.ntheta1 + opt.ntheta1;  // center + rings 1..nr1
  cs.offset.assign(cs.nchord + 1, 0);
  FlowOptions fo;
  fo.h_ode = opt.h_chord;
  fo.radius = opt.radius1;
  fo.record = true;
  int c = 0;
  for (int i = 0; i < opt.nbeta1; ++i) {
    const double arc = boundary_speed(g, proto.beta_node(i), opt.radius1) * proto.dbeta();
    for (int j = 0; j < opt.nalpha1; ++j, ++c) {
      const GeodesicTrace tr = integrate_geodesic(
          g, fan_phase(g, proto.beta_node(i), proto.alpha_node(j), opt.radius1),
          FlowDirection::forward, fo);
      const std::vector<double> w = trace_weights(tr.times);
      for (size_t s = 0; s < w.size(); ++s) {
        cs.q.push_back(w[s]);
        cs.st.push_back(polar_stencil(opt.nr1, opt.ntheta1, opt.radius1,
                                      tr.states[s].x));
      }
      cs.offset[c + 1] = static_cast<int>(cs.q.size());
      cs.fanw.push_back(std::cos(proto.alpha_node(j)) * arc * proto.alpha_weight(j));
    }
  }
  return cs;
}

// Euclidean Riesz filter |D| / (4 pi) applied through a zero-padded Cartesian
// transfer grid; used both as the CG preconditioner and by the filtered
// backprojection oracle.
class RieszFilter {
 public:
  // xi_cap > 0 clamps the multiplier at min(|xi|, xi_cap)/(4 pi); the
  // preconditioner uses this so frequencies the chord discretization cannot
  // resolve are not amplified into the search directions.
  RieszFilter(int ncart, int pad, double extent, double xi_cap = 0.0)
      : n_(ncart), big_(ncart * pad), extent_(extent), hx_(2.0 * extent / ncart),
        xi_cap_(xi_cap), work_(big_ * big_) {}

  double cell_center(int i) const { return -extent_ + (i + 0.5) * hx_; }

  // data: row-major n x n samples on cell centers; returns filtered samples.
  std::vector<double> apply(const std::vector<double>& data) {
    std::fill(work_.begin(), work_.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) work_[i * big_ + j] = data[i * n_ + j];
    fft2(work_, big_, true);
    const double dxi = kTwoPi / (big_ * hx_);
    for (int i = 0; i < big_; ++i) {
      const double xi1 = dxi * fft_mode(i, big_);
      for (int j = 0; j < big_; ++j) {
        const double xi2 = dxi * fft_mode(j, big_);
        double m = std::sqrt(xi1 * xi1 + xi2 * xi2);
        if (xi_cap_ > 0.0 && m > xi_cap_) m = xi_cap_;
        work_[i * big_ + j] *= m / (4.0 * kPi);
      }
    }
    fft2(work_, big_, false);
    std::vector<double> out(n_ * n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out[i * n_ + j] = work_[i * big_ + j].real();
    return out;
  }

  // Bicubic sample of a filtered grid at a point.
  double sample(const std::vector<double>& grid, const Vec2& p) const {
    const double sx = (p.x + extent_) / hx_ - 0.5;
    const double sy = (p.y + extent_) / hx_ - 0.5;
    int i0 = static_cast<int>(std::floor(sx));
    int j0 = static_cast<int>(std::floor(sy));
    i0 = std::min(std::max(i0, 1), n_ - 3);
    j0 = std::min(std::max(j0, 1), n_ - 3);
    double wx[4], wy[4];
    lagrange4(sx - i0, wx);
    lagrange4(sy - j0, wy);
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
      double row = 0.0;
      for (int b = 0; b < 4; ++b) row += wy[b] * grid[(i0 - 1 + a) * n_ + (j0 - 1 + b)];
      acc += wx[a] * row;
    }
    return acc;
  }

  int n() const { return n_; }

 private:
  int n_, big_;
  double extent_, hx_;
  double xi_cap_ = 0.0;
  std::vector<std::complex<double>> work_;
};

inline double support_taper(double r) {
  // 1 for r <= 0.9, 0 for r >= 1.0.
  return 1.0 - smoothstep5((r - 0.9) / 0.1);
}

inline double extension_cutoff(double r) {
  // 1 for r <= 1.05, 0 for r >= 1.15.
  return 1.0 - smoothstep5((r - 1.05) / 0.1);
}

}  // namespace detail

inline SurjectivityResult solve_surjectivity(
    const MetricField& g, const std::function<double(const Vec2&)>& f,
    const SurjectivityOptions& opt = {}) {
  const double R1 = opt.radius1;
  if (opt.check_simple) {
    CertifyOptions co;
    co.nbeta = 24;
    co.nalpha = 24;
    co.n_boundary = 64;
    co.flow.radius = R1;
    co.flow.h_ode = 0.01;
    const SimplicityReport sr = certify_simple(g, co);
    if (!sr.convex || !sr.nontrapping || !sr.no_conjugate)
      throw NonSimpleExtension("solve_surjectivity: extended disk fails simplicity");
  }

  const detail::ChordSystem cs = detail::build_chord_system(g, opt);
  const int nunk = cs.nunk;
  const int nth = opt.ntheta1;
  const double dr = R1 / opt.nr1, dth = kTwoPi / nth;

  // Node data: position, cutoff, target, volume weight.
  auto node_point = [&](int n) -> Vec2 {
    if (n == 0) return {0.0, 0.0};
    const int i = 1 + (n - 1) / nth;
    const int j = (n - 1) % nth;
    return {dr * i * std::cos(dth * j), dr * i * std::sin(dth * j)};
  };
  std::vector<double> phi(nunk), V(nunk), b(nunk);
  for (int n = 0; n < nunk; ++n) {
    const Vec2 p = node_point(n);
    const double r = norm(p);
    phi[n] = detail::extension_cutoff(r);
    if (n == 0)
      V[n] = kPi * (dr / 2) * (dr / 2) * std::sqrt(g(p).det());
    else {
      const int i = 1 + (n - 1) / nth;
      V[n] = r * dr * dth * std::sqrt(g(p).det()) * ((i == opt.nr1) ? 0.5 : 1.0);
    }
    double target = (r <= 1.0 + 1e-12) ? f(p) : ((r <= R1) ? f(p) : 0.0);
    if (opt.support_cutoff) target *= detail::support_taper(r);
    b[n] = target;
  }

  auto dotV = [&](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0.0;
    for (int n = 0; n < nunk; ++n) s += V[n] * a[n] * c[n];
    return s;
  };

  std::vector<double> chord_vals, tmp(nunk);
  auto apply_A = [&](const std::vector<double>& u, std::vector<double>& out) {
    for (int n = 0; n < nunk; ++n) tmp[n] = phi[n] * u[n];
    cs.apply(tmp, chord_vals);
    for (int c = 0; c < cs.nchord; ++c) chord_vals[c] *= cs.fanw[c];
    cs.apply_transpose(chord_vals, out);
    for (int n = 0; n < nunk; ++n)
      out[n] = phi[n] * out[n] / V[n] + opt.eps_tik * u[n];
  };

  // Symmetric preconditioner P = chi G^T H G chi + shift * id. The transfer G
  // onto the Cartesian filter grid is a volume-weighted cell average,
  //   (G u)[cell] = sum_{nodes in cell} V_n chi_n u_n / cell_area,
  // and the return map reads the filtered field back at each node's cell. The
  // averaging is what makes the pair exactly adjoint in the V-inner product
  // (so the conjugate-residual recurrences and the monotonicity guarantee
  // stay intact) and it annihilates sub-cell polar modes instead of aliasing
  // them into the filter band. chi tapers smoothly to zero across the cutoff
  // annulus: there the operator degenerates to the Tikhonov shift and the
  // preconditioner falls back to the identity part.
  detail::RieszFilter riesz(opt.ncart, opt.pad, R1, opt.riesz_cap);
  const double cell_h = 2.0 * R1 / opt.ncart;
  const double cell_area = cell_h * cell_h;
  std::vector<int> node_cell(nunk);
  std::vector<double> chi(nunk);
  for (int n = 0; n < nunk; ++n) {
    const Vec2 p = node_point(n);
    const int ci = std::clamp(static_cast<int>((p.x + R1) / cell_h), 0,
                              opt.ncart - 1);
    const int cj = std::clamp(static_cast<int>((p.y + R1) / cell_h), 0,
                              opt.ncart - 1);
    node_cell[n] = ci * opt.ncart + cj;
    chi[n] = 1.0 - detail::smoothstep5((norm(p) - 0.95) / 0.2);
  }
  std::vector<double> cart(opt.ncart * opt.ncart);
  auto apply_P = [&](const std::vector<double>& r_, std::vector<double>& out) {
    if (!opt.precondition) {
      out = r_;
      return;
    }
    std::fill(cart.begin(), cart.end(), 0.0);
    for (int n = 0; n < nunk; ++n)
      cart[node_cell[n]] += V[n] * chi[n] * r_[n] / cell_area;
    const std::vector<double> filt = riesz.apply(cart);
    out.resize(nunk);
    for (int n = 0; n < nunk; ++n)
      out[n] = chi[n] * filt[node_cell[n]] + opt.riesz_shift * r_[n];
  };

  SurjectivityResult res;
  SurjectivityReport& rep = res.report;
  std::vector<double> x(nunk, 0.0);
  const double bnorm = std::sqrt(dotV(b, b));
  if (bnorm > 0.0) {
    // Preconditioned conjugate residual: for a symmetric positive system and
    // a symmetric positive preconditioner the preconditioned residual norm
    // sqrt(<r, P r>) is minimized over the Krylov space, hence nonincreasing.
    std::vector<double> r = b, z(nunk), p(nunk), Ap(nunk), Az(nunk), Pap(nunk);
    apply_P(r, z);
    p = z;
    apply_A(p, Ap);
    Az = Ap;
    double gamma = dotV(z, Az);
    double prev_pres = std::sqrt(std::max(dotV(r, z), 0.0));
    rep.history.push_back(prev_pres);
    for (int it = 0; it < opt.max_iter; ++it) {
      apply_P(Ap, Pap);
      const double denom = dotV(Ap, Pap);
      if (!(denom > 0.0)) break;
      const double alpha = gamma / denom;
      for (int n = 0; n < nunk; ++n) {
        x[n] += alpha * p[n];
        r[n] -= alpha * Ap[n];
        z[n] -= alpha * Pap[n];
      }
      rep.iterations = it + 1;
      rep.rel_residual = std::sqrt(dotV(r, r)) / bnorm;
      const double pres = std::sqrt(std::max(dotV(r, z), 0.0));
      if (pres > prev_pres * (1.0 + 1e-8)) rep.monotone = false;
      prev_pres = pres;
      rep.history.push_back(pres);
      if (rep.rel_residual <= opt.tol) {
        rep.converged = true;
        break;
      }
      // Hard plateau: no meaningful progress over a long window while far
      // from the target.
      const size_t hl = rep.history.size();
      if (hl > 120 && rep.history[hl - 1] > 0.99 * rep.history[hl - 101] &&
          rep.rel_residual > 100.0 * opt.tol)
        throw CGStagnation("solve_surjectivity: residual plateau at rel " +
                           std::to_string(rep.rel_residual));
      apply_A(z, Az);
      const double gamma_new = dotV(z, Az);
      const double beta = gamma_new / gamma;
      gamma = gamma_new;
      for (int n = 0; n < nunk; ++n) {
        p[n] = z[n] + beta * p[n];
        Ap[n] = Az[n] + beta * Ap[n];
      }
    }
  } else {
    rep.converged = true;
    rep.rel_residual = 0.0;
  }

  // Solution on the extended disk.
  res.h = DiskGridFunction(opt.nr1, nth, R1);
  for (int j = 0; j < nth; ++j) res.h.node(0, j) = x[0];
  for (int i = 1; i <= opt.nr1; ++i)
    for (int j = 0; j < nth; ++j) res.h.node(i, j) = x[1 + (i - 1) * nth + j];

  // w1 = I1(phi h) on the extended fan, then restrict its flow-constant
  // extension to the unit-disk incoming fan. The restriction interpolates the
  // extended fan samples rather than re-integrating chords: the fan-sampled,
  // interpolated transform is the object the discrete normal equations are
  // consistent with, and it filters the sub-chord-scale content of h that the
  // chord system cannot certify.
  for (int n = 0; n < nunk; ++n) tmp[n] = phi[n] * x[n];
  cs.apply(tmp, chord_vals);
  FanGrid w1(opt.nbeta1, opt.nalpha1, opt.guard);
  for (int c = 0; c < cs.nchord; ++c) w1.values()[c] = chord_vals[c];

  res.w = FanGrid(opt.nbeta1, opt.nalpha1, opt.guard);
  FlowOptions fo1;
  fo1.h_ode = opt.h_chord;
  fo1.radius = R1;
  for (int i = 0; i < opt.nbeta1; ++i)
    for (int j = 0; j < opt.nalpha1; ++j) {
      const PhasePoint p0 =
          fan_phase(g, res.w.beta_node(i), res.w.alpha_node(j), 1.0);
      const IncomingCoord ic = backward_fan(g, p0.x, p0.v, opt.guard, fo1);
      res.w.value(i, j) = w1.interp(ic.fc);
    }

  if (opt.verify && bnorm > 0.0) {
    BackprojectOptions bo;
    bo.nphi = opt.verify_nphi;
    bo.guard = opt.guard;
    bo.flow.h_ode = opt.h_chord;
    double num = 0.0, den = 0.0;
    for (int i = 1; i <= opt.verify_nr; ++i)
      for (int j = 0; j < opt.verify_ntheta; ++j) {
        const double r = static_cast<double>(i) / opt.verify_nr;
        const double th = kTwoPi * j / opt.verify_ntheta;
        const Vec2 p{r * std::cos(th), r * std::sin(th)};
        double target = f(p);
        if (opt.support_cutoff) target *= detail::support_taper(r);
        const double got = backprojection(g, res.w, p, bo);
        const double wgt = r * std::sqrt(g(p).det());
        num += wgt * (got - target) * (got - target);
        den += wgt * target * target;
      }
    rep.verify_error = std::sqrt(num / std::max(den, 1e-300));
  }
  return res;
}

inline SurjectivityResult solve_surjectivity(const MetricField& g,
                                             const DiskGridFunction& f,
                                             const SurjectivityOptions& opt = {}) {
  return solve_surjectivity(
      g,
      [&f](const Vec2& p) { return (norm(p) <= 1.0) ? f.eval(p) : 0.0; }, opt);
}

// ---------------------------------------------------------------------------
// Euclidean filtered backprojection: f = (1/4pi) |D| N f, with N computed by
// the angular pipeline inside the disk and by direct convolution quadrature
// (N f = 2 int f(y)/|x-y| dy) outside it.

struct FbpOptions {
  int ncart = 64;
  // The filtered field only converges like the 1/r tail of N f truncated at
  // the grid edge, so the transfer grid extends well past the disk.
  double extent = 1.5;
  int pad = 4;
  int nphi = 128;    // fiber nodes for the angular N
  double h = 0.01;   // chord step
  bool validate = true;
};

namespace detail {

inline double newton_potential(const std::function<double(const Vec2&)>& f,
                               const Vec2& x, int nrho = 64, int nth = 128) {
  // 2 int_{|y|<1} f(y)/|x-y| dy in polar coordinates centered at x, where the
  // kernel singularity cancels against the area element exactly:
  // N = 2 int dphi int_{ray cap} f(x + rho e(phi)) drho. Each ray is clipped
  // to its chord of the unit disk, which also covers evaluation points
  // outside the disk.
  const double b0 = dot(x, x) - 1.0;
  double acc = 0.0;
  for (int j = 0; j < nth; ++j) {
    const double th = kTwoPi * (j + 0.5) / nth;
    const Vec2 e{std::cos(th), std::sin(th)};
    const double b = dot(x, e);
    const double disc = b * b - b0;
    if (disc <= 0.0) continue;
    const double s = std::sqrt(disc);
    const double t0 = std::max(-b - s, 0.0), t1 = -b + s;
    if (t1 <= t0) continue;
    const double dt = (t1 - t0) / nrho;
    double ray = 0.0;
    for (int i = 0; i < nrho; ++i) ray += f(x + e * (t0 + (i + 0.5) * dt));
    acc += ray * dt;
  }
  return 2.0 * acc * (kTwoPi / nth);
}

}  // namespace detail

inline DiskGridFunction filtered_backprojection(const DiskGridFunction& f,
                                                const FbpOptions& opt = {}) {
  const MetricField g = euclidean_metric();
  auto feval = [&f](const Vec2& p) { return (norm(p) <= 1.0) ? f.eval(p) : 0.0; };

  if (opt.validate) {
    // Validate the multiplier constant on a Gaussian before use: the
    // convolution-quadrature N composed with the filter must reproduce the
    // input on the interior.
    const double sig = 0.2;
    auto gauss = [sig](const Vec2& p) { return std::exp(-dot(p, p) / (2 * sig * sig)); };
    const int nv = 32;
    detail::RieszFilter rv(nv, opt.pad, opt.extent);
    std::vector<double> nf(nv * nv);
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j)
        nf[i * nv + j] =
            detail::newton_potential(gauss, {rv.cell_center(i), rv.cell_center(j)}, 48, 96);
    const std::vector<double> rec = rv.apply(nf);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) {
        const Vec2 p{rv.cell_center(i), rv.cell_center(j)};
        if (norm(p) >= 0.7) continue;
        const double want = gauss(p);
        const double got = rv.sample(rec, p);
        num += (got - want) * (got - want);
        den += want * want;
      }
    if (std::sqrt(num / den) > 5e-2)
      throw OracleFailure("filtered_backprojection: multiplier validation failed");
  }

  detail::RieszFilter riesz(opt.ncart, opt.pad, opt.extent);
  BackprojectOptions bo;
  bo.nphi = opt.nphi;
  bo.flow.h_ode = opt.h;
  std::vector<double> nf(opt.ncart * opt.ncart);
  for (int i = 0; i < opt.ncart; ++i)
    for (int j = 0; j < opt.ncart; ++j) {
      const Vec2 p{riesz.cell_center(i), riesz.cell_center(j)};
      if (norm(p) < 1.0)
        nf[i * opt.ncart + j] = normal_point(g, feval, p, bo);
      else
        nf[i * opt.ncart + j] = detail::newton_potential(feval, p);
    }
  const std::vector<double> rec = riesz.apply(nf);

  DiskGridFunction out(f.nr(), f.ntheta(), f.radius());
  for (int i = 0; i <= f.nr(); ++i)
    for (int j = 0; j < f.ntheta(); ++j)
      out.node(i, j) = riesz.sample(rec, out.node_point(i, j));
  return out;
}

// ---------------------------------------------------------------------------
// Conjugate identity: for a harmonic extension hstar of a boundary mode, its
// conjugate h, and w constructed so that I* w = h, the boundary chain
// 2 pi A*_- H_+ A_+ w = -(hstar0 - hstar0 o scattering) closes.

struct ConjugateOptions {
  int levels = 2;
  int nbeta0 = 32, nalpha0 = 16, nphi0 = 64;
  int dn_nr = 64, dn_ntheta = 128;  // extension/conjugate grid
  double guard = kGuardBand;
  double h_fan = 0.01;
  SurjectivityOptions surj;
  double corrupt_amp = 0.0;  // diagnostic: poison the scattering table
};

struct ConjugateResult {
  IdentityReport report;
  FanGrid w;
  double target_error = -1.0;  // |I* w - h| / |h| on r <= 0.85
  int cg_iterations = 0;
};

inline ConjugateResult check_conjugate_identity(const MetricField& g, int k,
                                                bool sine,
                                                const ConjugateOptions& opt = {}) {
  ConjugateResult out;
  out.report.name = "conjugate";

  // (i) harmonic extension of the boundary mode and its conjugate.
  const BoundaryFunction mode = BoundaryFunction::harmonic_mode(k, sine, opt.dn_ntheta);
  const DiskGridFunction hstar = solve_dirichlet(g, mode, opt.dn_nr, opt.dn_ntheta);
  DiskGridFunction h1 = harmonic_conjugate(g, hstar);
  for (int i = 0; i <= h1.nr(); ++i)
    for (int j = 0; j < h1.ntheta(); ++j) h1.node(i, j) = -h1.node(i, j);

  // Smooth radial extension of h beyond the unit circle (value plus linear
  // term from the rim radial derivative); the extended-disk cutoff tapers it
  // away before r = 1.15.
  BoundaryFunction rim(h1.ntheta()), rimdr(h1.ntheta());
  {
    const double dr = h1.dr();
    for (int j = 0; j < h1.ntheta(); ++j) {
      rim.node(j) = h1.node(h1.nr(), j);
      rimdr.node(j) = (3.0 * h1.node(h1.nr(), j) - 4.0 * h1.node(h1.nr() - 1, j) +
                       h1.node(h1.nr() - 2, j)) /
                      (2.0 * dr);
    }
  }
  auto target = [&](const Vec2& p) {
    const double r = norm(p);
    if (r <= 1.0) return h1.interp(p);
    const double th = std::atan2(p.y, p.x);
    return rim.eval(th) + (r - 1.0) * rimdr.eval(th);
  };

  // (ii)-(iii) per refinement level: w is reconstructed with a chord fan
  // scaled alongside the chain grids, so the construction error of w (the
  // dominant term) and the chain discretization refine together.
  auto h0 = [k, sine](double beta) {
    return sine ? std::sin(k * beta) : std::cos(k * beta);
  };
  for (int lev = 0; lev < opt.levels; ++lev) {
    SurjectivityOptions so = opt.surj;
    so.support_cutoff = false;
    so.verify = false;
    so.nbeta1 = opt.surj.nbeta1 * (2 + lev) / 2;
    so.nalpha1 = opt.surj.nalpha1 * (2 + lev) / 2;
    so.check_simple = (lev == 0) && opt.surj.check_simple;
    const SurjectivityResult sr = solve_surjectivity(g, target, so);
    out.w = sr.w;
    out.cg_iterations = sr.report.iterations;

    const int nbeta = opt.nbeta0 << lev;
    const int nalpha = opt.nalpha0 << lev;
    const int nphi = opt.nphi0 << lev;
    FlowOptions fo;
    fo.h_ode = opt.h_fan;
    ScatteringTable table(g, nbeta, nalpha, opt.guard, fo);
    if (opt.corrupt_amp != 0.0) table.corrupt(opt.corrupt_amp);
    FanGrid wl(nbeta, nalpha, opt.guard);
    for (int i = 0; i < nbeta; ++i)
      for (int j = 0; j < nalpha; ++j)
        wl.value(i, j) = out.w.interp(wl.beta_node(i), wl.alpha_node(j));
    const FanGrid lhs = detail::hilbert_chain_lhs(wl, table, nphi);
    FanGrid rhs(nbeta, nalpha, opt.guard);
    for (int i = 0; i < nbeta; ++i)
      for (int j = 0; j < nalpha; ++j) {
        const ScatterResult s = table.map({rhs.beta_node(i), rhs.alpha_node(j)});
        rhs.value(i, j) = h0(s.beta_out) - h0(rhs.beta_node(i));
      }
    out.report.table.push_back(
        {detail::grid_label(nbeta, nalpha, opt.h_fan) + " chords " +
             std::to_string(so.nbeta1) + "x" + std::to_string(so.nalpha1),
         detail::fan_rel_residual(g, lhs, rhs)});
  }

  // Reconstruction quality of the finest-level w against the conjugate.
  {
    BackprojectOptions bo;
    bo.nphi = 128;
    bo.guard = opt.guard;
    bo.flow.h_ode = opt.surj.h_chord;
    double num = 0.0, den = 0.0;
    for (int i = 1; i <= 12; ++i)
      for (int j = 0; j < 32; ++j) {
        const double r = 0.85 * i / 12.0;
        const double th = kTwoPi * j / 32.0;
        const Vec2 p{r * std::cos(th), r * std::sin(th)};
        const double want = h1.interp(p);
        const double got = backprojection(g, out.w, p, bo);
        num += r * (got - want) * (got - want);
        den += r * want * want;
      }
    out.target_error = std::sqrt(num / std::max(den, 1e-300));
  }
  out.report.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Gauge experiment: two metrics with equal boundary distances are compared
// after the boundary-normalizing gauge, at the boundary and through their
// scattering relations.

struct Theorem1Options {
  int npairs = 20;
  double dist_tol = 1e-3;
  int nfan = 32;
  double scatter_tol = 1e-3;
  int nbdry = 64;
  int nrecover = 8;
  double bdry_tol = 1e-3;
  unsigned seed = 1;
  double h_ode = 2e-3;
};

struct Theorem1Report {
  double max_distance_mismatch = 0.0;
  double max_recovered_mismatch = 0.0;
  double max_component_mismatch = 0.0;
  double max_scatter_mismatch = 0.0;
  bool passed = false;
};

inline Theorem1Report theorem1_experiment(const MetricField& g1,
                                          const MetricField& g2,
                                          const Theorem1Options& opt = {}) {
  Theorem1Report rep;
  FlowOptions fo;
  fo.h_ode = opt.h_ode;

  std::mt19937 rng(opt.seed);
  std::uniform_real_distribution<double> ub(0.0, kTwoPi), ug(0.5, kPi - 0.2);
  for (int k = 0; k < opt.npairs; ++k) {
    const double b1 = ub(rng);
    const double b2 = b1 + ug(rng);
    const double d1 = boundary_distance(g1, b1, b2, nullptr, fo);
    const double d2 = boundary_distance(g2, b1, b2, nullptr, fo);
    rep.max_distance_mismatch = std::max(rep.max_distance_mismatch, std::fabs(d1 - d2));
  }
  if (rep.max_distance_mismatch > opt.dist_tol)
    throw DistanceMismatch("theorem1_experiment: boundary distances differ by " +
                           std::to_string(rep.max_distance_mismatch));

  const DiskDiffeo phi1 = boundary_normal_gauge(g1);
  const DiskDiffeo phi2 = boundary_normal_gauge(g2);
  const MetricField n1 = pullback(phi1, g1);
  const MetricField n2 = pullback(phi2, g2);

  // Tangential boundary norm recovered from distance asymptotics of the
  // gauged metrics.
  for (int k = 0; k < opt.nrecover; ++k) {
    const double beta = kTwoPi * k / opt.nrecover;
    auto d1 = [&](double a, double b) {
      return boundary_distance(n1, a, b, nullptr, fo);
    };
    auto d2 = [&](double a, double b) {
      return boundary_distance(n2, a, b, nullptr, fo);
    };
    const double t1 = recover_boundary_metric(d1, beta);
    const double t2 = recover_boundary_metric(d2, beta);
    rep.max_recovered_mismatch =
        std::max(rep.max_recovered_mismatch, std::fabs(t1 - t2));
  }

  // Direct comparison of gauged boundary components: tangential components
  // equal, mixed component zero, normal component one.
  for (int k = 0; k < opt.nbdry; ++k) {
    const double beta = kTwoPi * k / opt.nbdry;
    const Mat2 p1 = polar_components(n1, beta, 1.0);
    const Mat2 p2 = polar_components(n2, beta, 1.0);
    double m = std::fabs(p1.a11 - p2.a11);
    m = std::max(m, std::fabs(p1.a12));
    m = std::max(m, std::fabs(p2.a12));
    m = std::max(m, std::fabs(p1.a22 - 1.0));
    m = std::max(m, std::fabs(p2.a22 - 1.0));
    rep.max_component_mismatch = std::max(rep.max_component_mismatch, m);
  }

  // Scattering relations of the (ungauged) metrics on a fan.
  const FanGrid proto(opt.nfan, opt.nfan);
  for (int i = 0; i < opt.nfan; ++i)
    for (int j = 0; j < opt.nfan; ++j) {
      const FanCoordinate fc{proto.beta_node(i), proto.alpha_node(j)};
      const ScatterResult s1 = scattering_relation(g1, fc, fo);
      const ScatterResult s2 = scattering_relation(g2, fc, fo);
      double m = std::fabs(angle_diff(s1.beta_out, s2.beta_out));
      m = std::max(m, std::fabs(s1.alpha_out - s2.alpha_out));
      m = std::max(m, std::fabs(s1.tau - s2.tau));
      rep.max_scatter_mismatch = std::max(rep.max_scatter_mismatch, m);
    }

  rep.passed = rep.max_recovered_mismatch <= opt.bdry_tol &&
               rep.max_component_mismatch <= opt.bdry_tol &&
               rep.max_scatter_mismatch <= opt.scatter_tol;
  return rep;
}

// ---------------------------------------------------------------------------
// DN-map equality experiment for a metric and a boundary-fixing pullback.

struct ModeComparison {
  int k = 0;
  bool sine = false;
  double rel_diff = 0.0;
};

struct Theorem3Options {
  int modes = 8;
  int dn_nr = 64, dn_ntheta = 128;
  double dn_tol = 1e-2;
  int mech_mode = 1;  // boundary mode carried through the full mechanism
  ConjugateOptions conj;
  int ndist = 10;
  double dist_tol = 1e-3;
  int cr_nr = 16, cr_ntheta = 32;
  double cr_rmax = 0.8;
  double cr_tol = 5e-2;
  int back_nphi = 128;
  double h_back = 0.01;
  double target_tol = 5e-2;
  bool corrupt_scattering = false;
  unsigned seed = 2;
};

struct Theorem3Report {
  double max_distance_mismatch = 0.0;
  std::vector<ModeComparison> dn;
  double max_dn_mismatch = 0.0;
  IdentityReport conjugate;      // stage (iii)
  double target_error = -1.0;    // stage (ii) verification
  double cr_residual = -1.0;     // stage (iv)
  bool mech_passed = false;
  bool dn_passed = false;
  bool passed = false;
};

inline Theorem3Report theorem3_experiment(const MetricField& g,
                                          const DiskDiffeo& psi, int modes,
                                          Theorem3Options opt = {}) {
  if (!psi.boundary_fixing)
    throw std::invalid_argument("theorem3_experiment: diffeo must fix the boundary");
  opt.modes = modes;
  Theorem3Report rep;
  const MetricField g2 = pullback(psi, g);

  // Hypothesis: equal boundary distance functions.
  {
    FlowOptions fo;
    fo.h_ode = 2e-3;
    std::mt19937 rng(opt.seed);
    std::uniform_real_distribution<double> ub(0.0, kTwoPi), ug(0.5, kPi - 0.2);
    for (int k = 0; k < opt.ndist; ++k) {
      const double b1 = ub(rng);
      const double b2 = b1 + ug(rng);
      const double d1 = boundary_distance(g, b1, b2, nullptr, fo);
      const double d2 = boundary_distance(g2, b1, b2, nullptr, fo);
      rep.max_distance_mismatch =
          std::max(rep.max_distance_mismatch, std::fabs(d1 - d2));
    }
    if (rep.max_distance_mismatch > opt.dist_tol)
      throw DistanceMismatch("theorem3_experiment: boundary distances differ by " +
                             std::to_string(rep.max_distance_mismatch));
  }

  // Stages (i)-(iii): the boundary chain for the representative mode.
  ConjugateOptions co = opt.conj;
  if (opt.corrupt_scattering) co.corrupt_amp = 0.2;
  const ConjugateResult cr = check_conjugate_identity(g, opt.mech_mode, false, co);
  rep.conjugate = cr.report;
  rep.target_error = cr.target_error;

  // Stage (iv): backprojection of the same w under the pulled-back metric is
  // conjugate to the g2-harmonic extension of the mode.
  {
    const BoundaryFunction mode =
        BoundaryFunction::harmonic_mode(opt.mech_mode, false, opt.dn_ntheta);
    const DiskGridFunction e2 = solve_dirichlet(g2, mode, opt.dn_nr, opt.dn_ntheta);
    BackprojectOptions bo;
    bo.nphi = opt.back_nphi;
    bo.flow.h_ode = opt.h_back;
    DiskGridFunction u2(opt.cr_nr, opt.cr_ntheta, opt.cr_rmax);
    const double center = backprojection(g2, cr.w, {0.0, 0.0}, bo);
    for (int j = 0; j < opt.cr_ntheta; ++j) u2.node(0, j) = center;
    for (int i = 1; i <= opt.cr_nr; ++i)
      for (int j = 0; j < opt.cr_ntheta; ++j)
        u2.node(i, j) = backprojection(g2, cr.w, u2.node_point(i, j), bo);

    // Conjugate relation: grad u2 = -(g J g^{-1}) grad e2 in Cartesian
    // components, matching h = -conjugate(hstar).
    double num = 0.0, den = 0.0;
    for (int i = 2; i <= opt.cr_nr - 1; ++i)
      for (int j = 0; j < opt.cr_ntheta; ++j) {
        const Vec2 p = u2.node_point(i, j);
        const Mat2 gm = g2(p);
        const Vec2 ge = e2.grad(p);
        const Vec2 want = (gm * rotate_ccw(g2, p, gm.inverse() * ge)) * (-1.0);
        const Vec2 got = u2.grad(p);
        num += dot(got - want, got - want);
        den += dot(want, want);
      }
    rep.cr_residual = std::sqrt(num / std::max(den, 1e-300));
  }

  // Stage (v): DN maps mode by mode.
  for (int k = 1; k <= opt.modes; ++k)
    for (bool sine : {false, true}) {
      const BoundaryFunction mode =
          BoundaryFunction::harmonic_mode(k, sine, opt.dn_ntheta);
      const BoundaryFunction l1 = dn_map(g, mode, opt.dn_nr, opt.dn_ntheta);
      const BoundaryFunction l2 = dn_map(g2, mode, opt.dn_nr, opt.dn_ntheta);
      double num = 0.0, den = 0.0;
      for (int j = 0; j < opt.dn_ntheta; ++j) {
        num += (l1.node(j) - l2.node(j)) * (l1.node(j) - l2.node(j));
        den += l1.node(j) * l1.node(j);
      }
      const double rd = std::sqrt(num / std::max(den, 1e-300));
      rep.dn.push_back({k, sine, rd});
      rep.max_dn_mismatch = std::max(rep.max_dn_mismatch, rd);
    }

  rep.dn_passed = rep.max_dn_mismatch <= opt.dn_tol;
  rep.mech_passed = rep.conjugate.passed &&
                    rep.conjugate.residual <= 5e-2 &&
                    rep.target_error >= 0.0 && rep.target_error <= opt.target_tol &&
                    rep.cr_residual >= 0.0 && rep.cr_residual <= opt.cr_tol;
  // The experiment as a whole only passes when the mechanism stages support
  // the DN equality; a poisoned scattering table therefore can never yield a
  // passing report even though the DN solves alone do not consume it.
  rep.passed = rep.dn_passed && rep.mech_passed;
  return rep;
}

}  // namespace geoxray
