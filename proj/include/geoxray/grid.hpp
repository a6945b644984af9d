// Sampled scalar functions on a disk: polar tensor grid with cubic Lagrange
// interpolation, optional analytic source, and node-level differentiation
// (spectral in theta, 5-point stencils in r).
#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "geoxray/fft.hpp"
#include "geoxray/geometry.hpp"

namespace geoxray {

namespace detail {

// Derivative weights (times 1/h) of the 5-point Lagrange basis, evaluated at
// node p of the stencil.
inline const double* fd5_weights(int p) {
  static const double W[5][5] = {
      {-25.0 / 12, 48.0 / 12, -36.0 / 12, 16.0 / 12, -3.0 / 12},
      {-3.0 / 12, -10.0 / 12, 18.0 / 12, -6.0 / 12, 1.0 / 12},
      {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12},
      {-1.0 / 12, 6.0 / 12, -18.0 / 12, 10.0 / 12, 3.0 / 12},
      {3.0 / 12, -16.0 / 12, 36.0 / 12, -48.0 / 12, 25.0 / 12}};
  return W[p];
}

// Cubic Lagrange weights on offsets {-1,0,1,2} for local coordinate u in [0,1].
inline void lagrange4(double u, double w[4]) {
  w[0] = -u * (u - 1.0) * (u - 2.0) / 6.0;
  w[1] = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
  w[2] = -(u + 1.0) * u * (u - 2.0) / 2.0;
  w[3] = (u + 1.0) * u * (u - 1.0) / 6.0;
}

}  // namespace detail

class DiskGridFunction {
 public:
  DiskGridFunction() = default;

  DiskGridFunction(int nr, int ntheta, double radius = 1.0)
      : nr_(nr), ntheta_(ntheta), radius_(radius),
        vals_((nr + 1) * ntheta, 0.0) {}

  static DiskGridFunction from_function(const std::function<double(const Vec2&)>& f,
                                        int nr, int ntheta, double radius = 1.0,
                                        bool keep_source = true) {
    DiskGridFunction d(nr, ntheta, radius);
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j < ntheta; ++j)
        d.vals_[d.idx(i, j)] = (i == 0) ? f({0.0, 0.0}) : f(d.node_point(i, j));
    if (keep_source) d.source_ = f;
    return d;
  }

  int nr() const { return nr_; }
  int ntheta() const { return ntheta_; }
  double radius() const { return radius_; }
  double dr() const { return radius_ / nr_; }
  double dtheta() const { return kTwoPi / ntheta_; }
  bool has_source() const { return static_cast<bool>(source_); }
  void drop_source() { source_ = nullptr; }

  double& node(int i, int j) {
    gradx_.reset();
    grady_.reset();
    return vals_[idx(i, j)];
  }
  double node(int i, int j) const { return vals_[idx(i, j)]; }
  const std::vector<double>& values() const { return vals_; }

  Vec2 node_point(int i, int j) const {
    const double r = dr() * i;
    const double th = dtheta() * j;
    return {r * std::cos(th), r * std::sin(th)};
  }

  double eval(const Vec2& p) const {
    if (source_) return source_(p);
    return interp(p);
  }
  double operator()(const Vec2& p) const { return eval(p); }

  // Grid-only bicubic (4x4 Lagrange) evaluation; r clamped to [0, radius].
  double interp(const Vec2& p) const {
    double r = norm(p);
    if (r > radius_) r = radius_;
    const double th = std::atan2(p.y, p.x);
    return interp_polar(r, th);
  }

  double interp_polar(double r, double th) const {
    const double sr = r / dr();
    int i0 = static_cast<int>(std::floor(sr));
    if (i0 > nr_ - 2) i0 = nr_ - 2;  // shift stencil inside at the rim
    if (i0 < 0) i0 = 0;
    const double st = wrap_angle(th) / dtheta();
    int j0 = static_cast<int>(std::floor(st));
    if (j0 >= ntheta_) j0 = ntheta_ - 1;

    double wr[4];
    detail::lagrange4(sr - i0, wr);
    double wt[4];
    detail::lagrange4(st - j0, wt);

    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
      const int ia = i0 - 1 + a;
      double row = 0.0;
      if (ia >= 0) {
        for (int b = 0; b < 4; ++b) row += wt[b] * vals_[idx(ia, wrapj(j0 - 1 + b))];
      } else {
        // mirror through the center: f(-r, th) = f(r, th + pi)
        const int jshift = ntheta_ / 2;
        for (int b = 0; b < 4; ++b)
          row += wt[b] * vals_[idx(-ia, wrapj(j0 - 1 + b + jshift))];
      }
      acc += wr[a] * row;
    }
    return acc;
  }

  // Coordinate gradient. Analytic-source functions use central differences on
  // the source; grid data interpolates precomputed node gradients.
  Vec2 grad(const Vec2& p) const {
    if (source_) {
      const double h = 1e-5;
      return {(source_({p.x + h, p.y}) - source_({p.x - h, p.y})) / (2.0 * h),
              (source_({p.x, p.y + h}) - source_({p.x, p.y - h})) / (2.0 * h)};
    }
    ensure_gradient();
    return {gradx_->interp(p), grady_->interp(p)};
  }

  // Node-level Cartesian gradient of the sampled data (spectral in theta,
  // 5-point Lagrange in r). Returned components carry no source.
  std::pair<DiskGridFunction, DiskGridFunction> gradient_grids() const {
    DiskGridFunction gx(nr_, ntheta_, radius_), gy(nr_, ntheta_, radius_);
    const int n = ntheta_;
    const double h = dr();

    // d/dtheta per ring via FFT.
    std::vector<double> fth((nr_ + 1) * n, 0.0);
    std::vector<std::complex<double>> buf(n);
    for (int i = 1; i <= nr_; ++i) {
      for (int j = 0; j < n; ++j) buf[j] = vals_[idx(i, j)];
      fft(buf, true);
      for (int k = 0; k < n; ++k) {
        const int m = fft_mode(k, n);
        buf[k] *= std::complex<double>(0.0, (2 * std::abs(m) == n) ? 0.0 : m);
      }
      fft(buf, false);
      for (int j = 0; j < n; ++j) fth[idx(i, j)] = buf[j].real();
    }

    // d/dr per spoke with mirror extension through the center.
    auto at = [&](int i, int j) {
      if (i >= 0) return vals_[idx(i, wrapj(j))];
      return vals_[idx(-i, wrapj(j + n / 2))];
    };
    std::vector<double> fr((nr_ + 1) * n, 0.0);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= nr_; ++i) {
        int start = i - 2;
        if (start > nr_ - 4) start = nr_ - 4;
        const double* w = detail::fd5_weights(i - start);
        double s = 0.0;
        for (int a = 0; a < 5; ++a) s += w[a] * at(start + a, j);
        fr[idx(i, j)] = s / h;
      }
    }

    for (int i = 1; i <= nr_; ++i) {
      const double r = h * i;
      for (int j = 0; j < n; ++j) {
        const double th = dtheta() * j;
        const double c = std::cos(th), s = std::sin(th);
        const double dfr = fr[idx(i, j)];
        const double dft = fth[idx(i, j)] / r;
        gx.vals_[idx(i, j)] = c * dfr - s * dft;
        gy.vals_[idx(i, j)] = s * dfr + c * dft;
      }
    }
    // Center: project spoke derivatives onto the two Cartesian directions.
    double fx = 0.0, fy = 0.0;
    for (int j = 0; j < n; ++j) {
      const double th = dtheta() * j;
      fx += fr[idx(0, j)] * std::cos(th);
      fy += fr[idx(0, j)] * std::sin(th);
    }
    fx *= 2.0 / n;
    fy *= 2.0 / n;
    for (int j = 0; j < n; ++j) {
      gx.vals_[idx(0, j)] = fx;
      gy.vals_[idx(0, j)] = fy;
    }
    return {gx, gy};
  }

 private:
  int idx(int i, int j) const { return i * ntheta_ + j; }
  int wrapj(int j) const { return ((j % ntheta_) + ntheta_) % ntheta_; }

  void ensure_gradient() const {
    if (gradx_) return;
    auto [gx, gy] = gradient_grids();
    gradx_ = std::make_shared<DiskGridFunction>(std::move(gx));
    grady_ = std::make_shared<DiskGridFunction>(std::move(gy));
  }

  int nr_ = 0;
  int ntheta_ = 0;
  double radius_ = 1.0;
  std::vector<double> vals_;
  std::function<double(const Vec2&)> source_;
  mutable std::shared_ptr<DiskGridFunction> gradx_, grady_;
};

}  // namespace geoxray
