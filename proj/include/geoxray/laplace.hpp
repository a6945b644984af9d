// Dirichlet problem for the Laplace-Beltrami operator on the disk via a
// conservative finite-difference scheme on the polar grid, the associated
// Dirichlet-to-Neumann map (inward-normal convention), and harmonic
// conjugates by path integration of the rotated differential.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "geoxray/boundary.hpp"
#include "geoxray/fft.hpp"
#include "geoxray/grid.hpp"

namespace geoxray {

// Periodic boundary data with exact trigonometric interpolation.
class BoundaryFunction {
 public:
  BoundaryFunction() = default;
  explicit BoundaryFunction(int n) : vals_(n, 0.0) {}
  explicit BoundaryFunction(std::vector<double> v) : vals_(std::move(v)) {}

  static BoundaryFunction from_function(const std::function<double(double)>& f,
                                        int n) {
    BoundaryFunction b(n);
    for (int i = 0; i < n; ++i) b.vals_[i] = f(kTwoPi * i / n);
    return b;
  }
  static BoundaryFunction harmonic_mode(int k, bool sine, int n) {
    return from_function(
        [k, sine](double t) { return sine ? std::sin(k * t) : std::cos(k * t); },
        n);
  }

  int size() const { return static_cast<int>(vals_.size()); }
  double node(int i) const { return vals_[i]; }
  double& node(int i) { coeffs_.clear(); return vals_[i]; }
  const std::vector<double>& values() const { return vals_; }

  double eval(double beta) const {
    ensure_coeffs();
    const int n = size();
    std::complex<double> acc = coeffs_[0];
    for (int k = 1; k <= n / 2; ++k) {
      const std::complex<double> e(std::cos(k * beta), std::sin(k * beta));
      if (2 * k == n) {
        acc += coeffs_[k] * e;  // unpaired Nyquist mode (real data: cosine)
      } else {
        acc += coeffs_[k] * e + coeffs_[n - k] * std::conj(e);
      }
    }
    return acc.real();
  }

  std::vector<std::complex<double>> coeffs() const {
    ensure_coeffs();
    return coeffs_;
  }

 private:
  void ensure_coeffs() const {
    if (!coeffs_.empty()) return;
    const int n = size();
    coeffs_.assign(vals_.begin(), vals_.end());
    fft(coeffs_, true);
    for (auto& c : coeffs_) c /= static_cast<double>(n);
  }

  std::vector<double> vals_;
  mutable std::vector<std::complex<double>> coeffs_;
};

namespace detail {

// Sparse matrix in triplet-accumulated CSR-ish form.
struct SparseMatrix {
  int rows = 0, cols = 0;
  std::vector<std::vector<std::pair<int, double>>> row_data;

  explicit SparseMatrix(int r, int c) : rows(r), cols(c), row_data(r) {}
  void add(int r, int c, double v) {
    if (v != 0.0) row_data[r].push_back({c, v});
  }
  void compress() {
    for (auto& row : row_data) {
      std::sort(row.begin(), row.end());
      size_t w = 0;
      for (size_t i = 0; i < row.size(); ++i) {
        if (w > 0 && row[w - 1].first == row[i].first)
          row[w - 1].second += row[i].second;
        else
          row[w++] = row[i];
      }
      row.resize(w);
    }
  }
  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (const auto& [c, v] : row_data[r]) acc += v * x[c];
      y[r] = acc;
    }
  }
  void apply_transpose(const std::vector<double>& y, std::vector<double>& z) const {
    std::fill(z.begin(), z.end(), 0.0);
    for (int r = 0; r < rows; ++r)
      for (const auto& [c, v] : row_data[r]) z[c] += v * y[r];
  }
};

}  // namespace detail

struct DirichletOptions {
  double tol = 1e-10;     // relative residual target
  int max_iter = 0;       // 0: derived from the grid size
  bool check_maximum_principle = true;
};

struct DirichletStats {
  int iterations = 0;
  double rel_residual = 0.0;
  double min_value = 0.0, max_value = 0.0;
};

// Solve div(sqrt(det g) g^{-1} grad u) = 0 with Dirichlet data f0 on the rim.
// Conservative 9-point flux scheme in polar coordinates; the pole is a single
// unknown closed by the flux balance through the circle r = dr/2. The
// (generally nonsymmetric) system is solved by CG on the normal equations
// with Jacobi column scaling.
inline DiskGridFunction solve_dirichlet(const MetricField& g,
                                        const BoundaryFunction& f0, int nr,
                                        int ntheta,
                                        const DirichletOptions& opt = {},
                                        DirichletStats* stats = nullptr) {
  const double dr = 1.0 / nr, dth = kTwoPi / ntheta;
  const int nunk = 1 + (nr - 1) * ntheta;  // pole + interior rings
  auto col = [&](int i, int j) {
    j = ((j % ntheta) + ntheta) % ntheta;
    return (i == 0) ? 0 : 1 + (i - 1) * ntheta + j;
  };
  std::vector<double> bdry(ntheta);
  for (int j = 0; j < ntheta; ++j) bdry[j] = f0.eval(dth * j);

  detail::SparseMatrix A(nunk, nunk);
  std::vector<double> rhs(nunk, 0.0);

  // Coefficient tensor sqrt(det) g^{-1} in (theta, r) components at a point.
  auto coef = [&](double th, double r) {
    const Mat2 gp = polar_components(g, th, r);
    const Mat2 gi = gp.inverse();
    const double s = std::sqrt(gp.det());
    return Mat2{s * gi.a11, s * gi.a12, s * gi.a21, s * gi.a22};
  };

  // Accumulate coefficient for u(i,j) into row `row`, folding Dirichlet and
  // pole identifications into rhs/columns.
  auto put = [&](int row, int i, int j, double v) {
    if (i == nr)
      rhs[row] -= v * bdry[((j % ntheta) + ntheta) % ntheta];
    else
      A.add(row, col(i, j), v);
  };

  // Radial flux through the face (i+1/2, j), scaled by 1/dr, accumulated with
  // weight w into row: F = Arr (u[i+1]-u[i])/dr + Art (dtheta-avg).
  auto add_radial_flux = [&](int row, int i, int j, double w) {
    const double r = dr * (i + 0.5), th = dth * j;
    const Mat2 a = coef(th, r);
    put(row, i + 1, j, w * a.a22 / dr);
    put(row, i, j, -w * a.a22 / dr);
    // dtheta u at the face: average of centered differences on both rings;
    // the pole ring is constant in theta, so its difference vanishes.
    for (const int ii : {i, i + 1}) {
      if (ii == 0) continue;
      put(row, ii, j + 1, w * a.a12 * 0.5 / (2.0 * dth));
      put(row, ii, j - 1, -w * a.a12 * 0.5 / (2.0 * dth));
    }
  };

  // Angular flux through the face (i, j+1/2), weight w:
  // F = Att (u[j+1]-u[j])/dth + Art (dr-avg).
  auto add_angular_flux = [&](int row, int i, int j, double w) {
    const double r = dr * i, th = dth * (j + 0.5);
    const Mat2 a = coef(th, r);
    put(row, i, j + 1, w * a.a11 / dth);
    put(row, i, j, -w * a.a11 / dth);
    for (const int jj : {j, j + 1}) {
      put(row, i + 1, jj, w * a.a12 * 0.5 / (2.0 * dr));
      put(row, i - 1, jj, -w * a.a12 * 0.5 / (2.0 * dr));
    }
  };

  // Pole row: net radial flux through the circle r = dr/2.
  for (int j = 0; j < ntheta; ++j) add_radial_flux(0, 0, j, dth);

  // Interior rows: divergence of the two fluxes.
  for (int i = 1; i <= nr - 1; ++i)
    for (int j = 0; j < ntheta; ++j) {
      const int row = col(i, j);
      add_radial_flux(row, i, j, 1.0 / dr);
      add_radial_flux(row, i - 1, j, -1.0 / dr);
      add_angular_flux(row, i, j, 1.0 / dth);
      add_angular_flux(row, i, j - 1, -1.0 / dth);
    }
  A.compress();

  // Jacobi column scaling, then CG on the normal equations.
  std::vector<double> cscale(nunk, 0.0);
  for (int r = 0; r < nunk; ++r)
    for (const auto& [c, v] : A.row_data[r]) cscale[c] += v * v;
  for (double& s : cscale) s = (s > 0.0) ? 1.0 / std::sqrt(s) : 1.0;
  for (int r = 0; r < nunk; ++r)
    for (auto& [c, v] : A.row_data[r]) v *= cscale[c];

  const int max_iter =
      opt.max_iter > 0 ? opt.max_iter
                       : 200 * static_cast<int>(std::sqrt(double(nr) * ntheta));
  std::vector<double> x(nunk, 0.0), r_(nunk), z(nunk), p(nunk), Ap(nunk),
      Atz(nunk);
  // r_ = rhs - A x = rhs; z = A^T r_
  r_ = rhs;
  A.apply_transpose(r_, z);
  p = z;
  double zz = 0.0, rhs_norm = 0.0;
  for (int i = 0; i < nunk; ++i) {
    zz += z[i] * z[i];
    rhs_norm += rhs[i] * rhs[i];
  }
  rhs_norm = std::sqrt(rhs_norm);
  int it = 0;
  double relres = 1.0;
  const double floor = (rhs_norm > 0) ? rhs_norm : 1.0;
  for (; it < max_iter; ++it) {
    A.apply(p, Ap);
    double app = 0.0;
    for (int i = 0; i < nunk; ++i) app += Ap[i] * Ap[i];
    if (app == 0.0) break;
    const double alpha = zz / app;
    for (int i = 0; i < nunk; ++i) {
      x[i] += alpha * p[i];
      r_[i] -= alpha * Ap[i];
    }
    double rn = 0.0;
    for (int i = 0; i < nunk; ++i) rn += r_[i] * r_[i];
    relres = std::sqrt(rn) / floor;
    if (relres < opt.tol) { ++it; break; }
    A.apply_transpose(r_, Atz);
    double zz_new = 0.0;
    for (int i = 0; i < nunk; ++i) zz_new += Atz[i] * Atz[i];
    const double beta = zz_new / zz;
    zz = zz_new;
    for (int i = 0; i < nunk; ++i) p[i] = Atz[i] + beta * p[i];
  }
  if (relres > std::sqrt(opt.tol))
    throw SolverStall("solve_dirichlet: CGNR stalled at relative residual " +
                      std::to_string(relres));

  DiskGridFunction u(nr, ntheta);
  for (int j = 0; j < ntheta; ++j) {
    u.node(0, j) = x[0] * cscale[0];
    u.node(nr, j) = bdry[j];
  }
  for (int i = 1; i <= nr - 1; ++i)
    for (int j = 0; j < ntheta; ++j)
      u.node(i, j) = x[col(i, j)] * cscale[col(i, j)];

  if (stats || opt.check_maximum_principle) {
    double lo = 1e300, hi = -1e300, blo = 1e300, bhi = -1e300;
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j < ntheta; ++j) {
        lo = std::min(lo, u.node(i, j));
        hi = std::max(hi, u.node(i, j));
      }
    for (int j = 0; j < ntheta; ++j) {
      blo = std::min(blo, bdry[j]);
      bhi = std::max(bhi, bdry[j]);
    }
    if (stats) {
      stats->iterations = it;
      stats->rel_residual = relres;
      stats->min_value = lo;
      stats->max_value = hi;
    }
    if (opt.check_maximum_principle) {
      const double slack = 1e-8 + 1e-6 * (bhi - blo);
      if (lo < blo - slack || hi > bhi + slack)
        throw SolverStall("solve_dirichlet: discrete maximum principle violated");
    }
  }
  return u;
}

// DN map: inward g-unit normal derivative of the harmonic extension,
// one-sided 3-point radial stencil at the rim combined with the spectral
// tangential derivative.
inline BoundaryFunction dn_map(const MetricField& g, const BoundaryFunction& f0,
                               int nr, int ntheta,
                               const DirichletOptions& opt = {}) {
  const DiskGridFunction u = solve_dirichlet(g, f0, nr, ntheta, opt);
  const double dr = 1.0 / nr, dth = kTwoPi / ntheta;

  // Spectral d/dtheta of the rim ring.
  std::vector<std::complex<double>> buf(ntheta);
  for (int j = 0; j < ntheta; ++j) buf[j] = u.node(nr, j);
  fft(buf, true);
  for (int k = 0; k < ntheta; ++k) {
    const int m = fft_mode(k, ntheta);
    buf[k] *= std::complex<double>(0.0, (2 * std::abs(m) == ntheta) ? 0.0 : m);
  }
  fft(buf, false);

  BoundaryFunction out(ntheta);
  for (int j = 0; j < ntheta; ++j) {
    const double th = dth * j;
    const double ur =
        (3.0 * u.node(nr, j) - 4.0 * u.node(nr - 1, j) + u.node(nr - 2, j)) /
        (2.0 * dr);
    const double ut = buf[j].real();
    // Cartesian differential, then pair with the inward normal.
    const double c = std::cos(th), s = std::sin(th);
    const double ux = c * ur - s * ut;
    const double uy = s * ur + c * ut;
    const BoundaryFrame fr = boundary_frame(g, th);
    out.node(j) = ux * fr.normal.x + uy * fr.normal.y;
  }
  return out;
}

// Weighted boundary inner product with the g-arc element.
inline double boundary_inner(const MetricField& g, const BoundaryFunction& a,
                             const BoundaryFunction& b) {
  const int n = a.size();
  double acc = 0.0;
  for (int j = 0; j < n; ++j)
    acc += a.node(j) * b.node(j) * boundary_speed(g, kTwoPi * j / n);
  return acc * kTwoPi / n;
}

// Harmonic conjugate u* with du* = -*du, normalized by u*(0) = 0, built by
// integrating the rotated differential along radial spokes. Loop integrals of
// the rotated differential around grid circles certify path independence.
inline DiskGridFunction harmonic_conjugate(const MetricField& g,
                                           const DiskGridFunction& u,
                                           double loop_tol = 1e-4) {
  const int nr = u.nr(), ntheta = u.ntheta();
  const double dr = u.dr(), dth = u.dtheta();

  // Rotated differential: dstar(w) = <J grad_g u, w>_g at the grid nodes.
  auto [gx, gy] = u.gradient_grids();
  std::vector<double> star_r((nr + 1) * ntheta), star_t((nr + 1) * ntheta);
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j < ntheta; ++j) {
      const Vec2 p = u.node_point(i, j);
      const double th = dth * j;
      const Vec2 du{gx.node(i, j), gy.node(i, j)};
      const Mat2 gm = g(p);
      const Vec2 grad = gm.inverse() * du;
      const Vec2 rot = rotate_ccw(g, p, grad);
      const Vec2 low = gm * rot;  // the covector d(u*)
      // Components against the polar coordinate directions.
      star_r[i * ntheta + j] = low.x * std::cos(th) + low.y * std::sin(th);
      star_t[i * ntheta + j] =
          dr * i * (-low.x * std::sin(th) + low.y * std::cos(th));
    }

  // Path independence: loop integrals around a few circles.
  for (const int i : {nr / 4, nr / 2, (3 * nr) / 4, nr}) {
    double loop = 0.0;
    for (int j = 0; j < ntheta; ++j) loop += star_t[i * ntheta + j] * dth;
    if (std::fabs(loop) > loop_tol)
      throw PathInconsistency(
          "harmonic_conjugate: loop residual " + std::to_string(loop) +
          " at r = " + std::to_string(dr * i));
  }

  DiskGridFunction out(nr, ntheta, u.radius());
  for (int j = 0; j < ntheta; ++j) {
    double acc = 0.0;
    out.node(0, j) = 0.0;
    for (int i = 0; i < nr; ++i) {
      acc += 0.5 * dr * (star_r[i * ntheta + j] + star_r[(i + 1) * ntheta + j]);
      out.node(i + 1, j) = acc;
    }
  }
  return out;
}

// Stencil residual of the interior Laplace equation, for preconditions.
inline double harmonic_residual(const MetricField& g, const DiskGridFunction& u) {
  const int nr = u.nr(), ntheta = u.ntheta();
  const double dr = u.dr(), dth = u.dtheta();
  double worst = 0.0;
  for (int i = 2; i <= nr - 2; i += std::max(1, nr / 16)) {
    for (int j = 0; j < ntheta; j += std::max(1, ntheta / 32)) {
      auto uat = [&](int ii, int jj) {
        return u.node(ii, ((jj % ntheta) + ntheta) % ntheta);
      };
      auto a_at = [&](double th, double r) {
        const Mat2 gp = polar_components(g, th, r);
        const Mat2 gi = gp.inverse();
        const double s = std::sqrt(gp.det());
        return Mat2{s * gi.a11, s * gi.a12, s * gi.a21, s * gi.a22};
      };
      const double th = dth * j;
      const Mat2 ap = a_at(th, dr * (i + 0.5));
      const Mat2 am = a_at(th, dr * (i - 0.5));
      const Mat2 bp = a_at(th + 0.5 * dth, dr * i);
      const Mat2 bm = a_at(th - 0.5 * dth, dr * i);
      const double fr_p =
          ap.a22 * (uat(i + 1, j) - uat(i, j)) / dr +
          ap.a12 * 0.5 *
              ((uat(i, j + 1) - uat(i, j - 1)) + (uat(i + 1, j + 1) - uat(i + 1, j - 1))) /
              (2.0 * dth);
      const double fr_m =
          am.a22 * (uat(i, j) - uat(i - 1, j)) / dr +
          am.a12 * 0.5 *
              ((uat(i, j + 1) - uat(i, j - 1)) + (uat(i - 1, j + 1) - uat(i - 1, j - 1))) /
              (2.0 * dth);
      const double ft_p =
          bp.a11 * (uat(i, j + 1) - uat(i, j)) / dth +
          bp.a12 * 0.5 *
              ((uat(i + 1, j) - uat(i - 1, j)) + (uat(i + 1, j + 1) - uat(i - 1, j + 1))) /
              (2.0 * dr);
      const double ft_m =
          bm.a11 * (uat(i, j) - uat(i, j - 1)) / dth +
          bm.a12 * 0.5 *
              ((uat(i + 1, j) - uat(i - 1, j)) + (uat(i + 1, j - 1) - uat(i - 1, j - 1))) /
              (2.0 * dr);
      worst = std::max(worst, std::fabs((fr_p - fr_m) / dr + (ft_p - ft_m) / dth));
    }
  }
  return worst;
}

}  // namespace geoxray
