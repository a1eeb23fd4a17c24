#include "usot/prox.hpp"

#include <cmath>
#include <limits>

namespace usot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void SymMat2::shifted_solve(double s, double r, double mx, double my, double& wx,
                            double& wy) const {
  // (s A + r I) w = m, closed form
  const double b11 = s * a11 + r, b12 = s * a12, b22 = s * a22 + r;
  const double det = b11 * b22 - b12 * b12;
  wx = (b22 * mx - b12 * my) / det;
  wy = (b11 * my - b12 * mx) / det;
}

double SymMat2::lambda_min() const {
  const double tr = a11 + a22, d = a11 - a22;
  return 0.5 * (tr - std::sqrt(d * d + 4 * a12 * a12));
}

double SymMat2::lambda_max() const {
  const double tr = a11 + a22, d = a11 - a22;
  return 0.5 * (tr + std::sqrt(d * d + 4 * a12 * a12));
}

double eval_J(const CellState& x, const ProxParams& p) {
  if (x.rho > 0)
    return (p.alpha * p.A.quad(x.mx, x.my) + p.beta * x.H * x.H) / x.rho;
  if (x.rho == 0 && x.mx == 0 && x.my == 0 && x.H == 0) return 0.0;
  return kInf;
}

double phi(double r, const CellState& x, const ProxParams& p) {
  const double c = p.c;
  double wx, wy;
  p.A.shifted_solve(2 * c * p.alpha, r, x.mx, x.my, wx, wy);
  const double mterm = c * p.alpha * p.A.quad(wx, wy);
  const double hd = 2 * c * p.beta + r;
  const double hterm = c * p.beta * x.H * x.H / (hd * hd);
  return x.rho + mterm + hterm;
}

namespace {

CellState candidate(double r, const CellState& x, const ProxParams& p) {
  CellState y;
  y.rho = r;
  p.A.shifted_solve(2 * p.c * p.alpha, r, r * x.mx, r * x.my, y.mx, y.my);
  y.H = r * x.H / (2 * p.c * p.beta + r);
  return y;
}

}  // namespace

ProxResult prox_J(const CellState& x, const ProxParams& p) {
  // The origin is optimal iff x/c lies in c-scaled dJ(0), i.e. phi(0) <= 0; for rho > 0
  // phi(0) >= rho > 0 always, so this is the unique branch switch. (Subsumes rho <= 0
  // with moderate momentum; a cell with rho <= 0 but a large enough momentum lift still
  // takes the positive branch, which the brute-force oracle confirms.)
  ProxResult res;
  const double phi0 = phi(0.0, x, p);
  if (phi0 <= 0.0) {
    res.y = CellState{};
    return res;
  }

  // fixed-point iteration, with bisection on psi(r) = r - phi(r) as the safety net
  double r = std::max(x.rho, 1e-12);
  double prev_step = kInf;
  int noncontract = 0;
  bool fixed_point_done = false;
  for (int it = 0; it < p.fp_max; ++it) {
    const double rn = phi(r, x, p);
    const double step = std::abs(rn - r);
    ++res.iters;
    r = rn;
    // the true root is the unique positive one; below zero phi has a pole and, past
    // it, a spurious attracting fixed point near x.rho, so bail to bisection
    if (!(r > 0.0)) break;
    if (step <= p.fp_tol) {
      fixed_point_done = true;
      break;
    }
    if (step >= prev_step) {
      if (++noncontract >= p.noncontract_max) break;
    }
    prev_step = step;
  }
  if (!fixed_point_done) {
    res.bisection = true;
    // psi(0) = -phi0 < 0 and the root is <= phi0 (phi decreasing)
    double lo = 0.0, hi = phi0;
    while (hi - phi(hi, x, p) < 0.0) hi *= 2.0;  // safety; cannot loop forever
    for (int it = 0; it < 200 && (hi - lo) > p.fp_tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid - phi(mid, x, p) < 0.0)
        lo = mid;
      else
        hi = mid;
      ++res.iters;
    }
    r = 0.5 * (lo + hi);
  }
  res.y = candidate(r, x, p);
  return res;
}

CellState prox_J_conjugate(const CellState& x, double sigma, const ProxParams& p) {
  ProxParams q = p;
  q.c = 1.0 / sigma;
  CellState xs{x.mx / sigma, x.my / sigma, x.rho / sigma, x.H / sigma};
  CellState y = prox_J(xs, q).y;
  return CellState{x.mx - sigma * y.mx, x.my - sigma * y.my, x.rho - sigma * y.rho,
                   x.H - sigma * y.H};
}

void prox_J_conjugate_field(CenteredState& U, CenteredField& H, double sigma,
                            const ProxParams& p, const SymMat2* Aspatial) {
  const GridSpec& g = U.g;
  const bool two_d = g.dim == 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      ProxParams q = p;
      if (Aspatial) q.A = Aspatial[static_cast<size_t>(i) * g.N + j];
      for (int k = 0; k < g.Q; ++k) {
        const size_t a = U.m.idx(i, j, k);
        CellState x{U.m.v[a], two_d ? U.n.v[a] : 0.0, U.rho.v[a], H.v[a]};
        CellState y = prox_J_conjugate(x, sigma, q);
        U.m.v[a] = y.mx;
        if (two_d) U.n.v[a] = y.my;
        U.rho.v[a] = y.rho;
        H.v[a] = y.H;
      }
    }
}

double sum_J(const CenteredState& U, const CenteredField& H, const ProxParams& p,
             const SymMat2* Aspatial, int* violations) {
  const GridSpec& g = U.g;
  const bool two_d = g.dim == 2;
  double total = 0;
  int bad = 0;
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      SymMat2 A = Aspatial ? Aspatial[static_cast<size_t>(i) * g.N + j] : p.A;
      for (int k = 0; k < g.Q; ++k) {
        const size_t a = U.m.idx(i, j, k);
        const double mx = U.m.v[a], my = two_d ? U.n.v[a] : 0.0;
        const double rho = U.rho.v[a], h = H.v[a];
        if (rho > 0) {
          total += (p.alpha * A.quad(mx, my) + p.beta * h * h) / rho;
        } else if (std::abs(mx) > 1e-12 || std::abs(my) > 1e-12 || std::abs(h) > 1e-12) {
          ++bad;  // off-domain cell; contributes nothing but is reported
        }
      }
    }
  if (violations) *violations = bad;
  return total;
}

}  // namespace usot
