// Functions on the unit sphere bundle with fiberwise Fourier structure: the
// circular Hilbert transform and its parity parts, the geodesic vector field
// X, its rotated companion X_perp, and gradient lifts of scalars.
#pragma once

#include "geoxray/fft.hpp"
#include "geoxray/geodesic.hpp"
#include "geoxray/grid.hpp"

namespace geoxray {

// Fiberwise Hilbert transform of one periodic fiber: Fourier multiplier
// u_k -> -i sgn(k) u_k, with the mean (and the unpaired Nyquist mode) killed.
// The sign convention is pinned by the principal-value kernel oracle in the
// test suite: H(cos k phi) = sin k phi.
inline std::vector<double> hilbert_fiber(const std::vector<double>& u) {
  const int n = static_cast<int>(u.size());
  std::vector<std::complex<double>> buf(n);
  for (int i = 0; i < n; ++i) buf[i] = u[i];
  fft(buf, true);
  for (int k = 0; k < n; ++k) {
    const int m = fft_mode(k, n);
    if (m == 0 || 2 * std::abs(m) == n)
      buf[k] = 0.0;
    else
      buf[k] *= std::complex<double>(0.0, m > 0 ? -1.0 : 1.0);
  }
  fft(buf, false);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

enum class FiberParity { even, odd };

// Keep only the even-k or odd-k fiber modes (even/odd under v -> -v).
inline std::vector<double> fiber_parity_part(const std::vector<double>& u,
                                             FiberParity parity) {
  const int n = static_cast<int>(u.size());
  std::vector<double> out(n);
  // v -> -v is phi -> phi + pi, i.e. a shift by n/2 nodes.
  const double sign = (parity == FiberParity::even) ? 1.0 : -1.0;
  for (int i = 0; i < n; ++i)
    out[i] = 0.5 * (u[i] + sign * u[(i + n / 2) % n]);
  return out;
}

inline std::vector<double> hilbert_even_fiber(const std::vector<double>& u) {
  return hilbert_fiber(fiber_parity_part(u, FiberParity::even));
}

inline std::vector<double> hilbert_odd_fiber(const std::vector<double>& u) {
  return hilbert_fiber(fiber_parity_part(u, FiberParity::odd));
}

// Sampled function on the sphere bundle: polar base grid times a uniform
// fiber angle grid measured in the g-orthonormal frame at each base node.
class SMGridFunction {
 public:
  SMGridFunction() = default;
  SMGridFunction(int nr, int ntheta, int nphi, double radius = 1.0)
      : nr_(nr), ntheta_(ntheta), nphi_(nphi), radius_(radius),
        vals_((nr + 1) * ntheta * nphi, 0.0) {}

  template <class U>
  static SMGridFunction from_function(const MetricField& g, U&& u, int nr,
                                      int ntheta, int nphi, double radius = 1.0) {
    SMGridFunction s(nr, ntheta, nphi, radius);
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j < ntheta; ++j) {
        const Vec2 x = s.node_point(i, j);
        const OrthoFrame fr = ortho_frame(g, x);
        for (int k = 0; k < nphi; ++k) {
          const double phi = kTwoPi * k / nphi;
          s.value(i, j, k) =
              u(x, fr.e1 * std::cos(phi) + fr.e2 * std::sin(phi));
        }
      }
    return s;
  }

  int nr() const { return nr_; }
  int ntheta() const { return ntheta_; }
  int nphi() const { return nphi_; }
  double radius() const { return radius_; }

  Vec2 node_point(int i, int j) const {
    const double r = radius_ / nr_ * i;
    const double th = kTwoPi / ntheta_ * j;
    return {r * std::cos(th), r * std::sin(th)};
  }

  double& value(int i, int j, int k) { return vals_[idx(i, j, k)]; }
  double value(int i, int j, int k) const { return vals_[idx(i, j, k)]; }

  std::vector<double> fiber(int i, int j) const {
    std::vector<double> f(nphi_);
    for (int k = 0; k < nphi_; ++k) f[k] = vals_[idx(i, j, k)];
    return f;
  }
  void set_fiber(int i, int j, const std::vector<double>& f) {
    for (int k = 0; k < nphi_; ++k) vals_[idx(i, j, k)] = f[k];
  }

  std::vector<std::complex<double>> fiber_coeffs(int i, int j) const {
    std::vector<std::complex<double>> buf(nphi_);
    for (int k = 0; k < nphi_; ++k) buf[k] = vals_[idx(i, j, k)];
    fft(buf, true);
    for (auto& c : buf) c /= static_cast<double>(nphi_);
    return buf;
  }

  template <class Op>
  SMGridFunction map_fibers(Op&& op) const {
    SMGridFunction out(nr_, ntheta_, nphi_, radius_);
    for (int i = 0; i <= nr_; ++i)
      for (int j = 0; j < ntheta_; ++j) out.set_fiber(i, j, op(fiber(i, j)));
    return out;
  }

 private:
  int idx(int i, int j, int k) const { return (i * ntheta_ + j) * nphi_ + k; }

  int nr_ = 0, ntheta_ = 0, nphi_ = 0;
  double radius_ = 1.0;
  std::vector<double> vals_;
};

inline SMGridFunction hilbert(const SMGridFunction& u) {
  return u.map_fibers([](const std::vector<double>& f) { return hilbert_fiber(f); });
}
inline SMGridFunction hilbert_even(const SMGridFunction& u) {
  return u.map_fibers(
      [](const std::vector<double>& f) { return hilbert_even_fiber(f); });
}
inline SMGridFunction hilbert_odd(const SMGridFunction& u) {
  return u.map_fibers(
      [](const std::vector<double>& f) { return hilbert_odd_fiber(f); });
}
inline SMGridFunction fiber_part(const SMGridFunction& u, FiberParity p) {
  return u.map_fibers(
      [p](const std::vector<double>& f) { return fiber_parity_part(f, p); });
}

inline constexpr double kFlowFdStep = 1e-4;

namespace detail {

// One RK4 step of the geodesic flow from (x, v).
inline PhasePoint flow_step(const MetricField& g, const PhasePoint& p, double t) {
  const FlowState s = rk4_step(g, {p.x, p.v}, t);
  return {s.x, s.v};
}

// One RK4 step of the geodesic flow from (x, dir) carrying a parallel vector
// W along: W' = -Gamma(x)(x', W).
inline PhasePoint transport_step(const MetricField& g, const Vec2& x,
                                 const Vec2& dir, const Vec2& w0, double t) {
  struct S {
    Vec2 x, v, w;
  };
  auto rhs = [&g](const S& s) {
    const Christoffel G = christoffel(g, s.x);
    Vec2 dv{0.0, 0.0}, dw{0.0, 0.0};
    for (int i = 0; i < 2; ++i) {
      double av = 0.0, aw = 0.0;
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          const double vj = (j == 0) ? s.v.x : s.v.y;
          const double vk = (k == 0) ? s.v.x : s.v.y;
          const double wk = (k == 0) ? s.w.x : s.w.y;
          av += G[i][j][k] * vj * vk;
          aw += G[i][j][k] * vj * wk;
        }
      if (i == 0) {
        dv.x = -av;
        dw.x = -aw;
      } else {
        dv.y = -av;
        dw.y = -aw;
      }
    }
    return S{s.v, dv, dw};
  };
  auto axpy = [](const S& a, const S& b, double c) {
    return S{a.x + b.x * c, a.v + b.v * c, a.w + b.w * c};
  };
  const S s0{x, dir, w0};
  const S k1 = rhs(s0);
  const S k2 = rhs(axpy(s0, k1, t / 2));
  const S k3 = rhs(axpy(s0, k2, t / 2));
  const S k4 = rhs(axpy(s0, k3, t));
  const S s1{
      s0.x + (k1.x + k2.x * 2.0 + k3.x * 2.0 + k4.x) * (t / 6),
      s0.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * (t / 6),
      s0.w + (k1.w + k2.w * 2.0 + k3.w * 2.0 + k4.w) * (t / 6)};
  return {s1.x, s1.w};
}

}  // namespace detail

// Geodesic vector field by centered flow differences.
template <class U>
double X_of(const MetricField& g, U&& u, const Vec2& x, const Vec2& v,
            double t = kFlowFdStep) {
  const PhasePoint fwd = detail::flow_step(g, {x, v}, t);
  const PhasePoint bwd = detail::flow_step(g, {x, v}, -t);
  return (u(fwd.x, fwd.v) - u(bwd.x, bwd.v)) / (2.0 * t);
}

// Rotated companion: differentiate along the geodesic issued in the clockwise
// rotated direction while parallel-transporting the fiber vector.
template <class U>
double X_perp_of(const MetricField& g, U&& u, const Vec2& x, const Vec2& v,
                 double t = kFlowFdStep) {
  const Vec2 vp = rotate_cw(g, x, v);
  const PhasePoint fwd = detail::transport_step(g, x, vp, v, t);
  const PhasePoint bwd = detail::transport_step(g, x, vp, v, -t);
  return (u(fwd.x, fwd.v) - u(bwd.x, bwd.v)) / (2.0 * t);
}

// Gradient lifts of a scalar: X f(x,v) = df(v), X_perp f(x,v) = df(v_perp),
// returned as callables on phase points.
template <class F>
auto grad_lift(const MetricField& g, F f) {
  return [g, f](const Vec2& x, const Vec2& v) {
    const double h = 1e-5;
    const double fx = (f({x.x + h, x.y}) - f({x.x - h, x.y})) / (2 * h);
    const double fy = (f({x.x, x.y + h}) - f({x.x, x.y - h})) / (2 * h);
    return fx * v.x + fy * v.y;
  };
}

template <class F>
auto grad_perp_lift(const MetricField& g, F f) {
  auto lift = grad_lift(g, f);
  return [g, lift](const Vec2& x, const Vec2& v) {
    return lift(x, rotate_cw(g, x, v));
  };
}

}  // namespace geoxray
