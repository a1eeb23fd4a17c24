#include "usot/grid.hpp"

#include <cmath>
#include <random>

namespace usot {

void BoundaryData::validate() const {
  for (double x : mu)
    if (!(x >= 0.0)) throw std::invalid_argument("BoundaryData: mu must be nonnegative");
  for (double x : nu)
    if (!(x >= 0.0)) throw std::invalid_argument("BoundaryData: nu must be nonnegative");
}

double BoundaryData::mass_mu() const {
  double s = 0;
  for (double x : mu) s += x;
  return s * g.spatial_volume();
}

double BoundaryData::mass_nu() const {
  double s = 0;
  for (double x : nu) s += x;
  return s * g.spatial_volume();
}

CenteredState interpolate(const StaggeredField& U) {
  const GridSpec& g = U.g;
  CenteredState V(g);
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k < g.Q; ++k) {
        V.m.at(i, j, k) = 0.5 * (U.m.at(i, j, k) + U.m.at(i + 1, j, k));
        V.rho.at(i, j, k) = 0.5 * (U.rho.at(i, j, k) + U.rho.at(i, j, k + 1));
        if (g.dim == 2) V.n.at(i, j, k) = 0.5 * (U.n.at(i, j, k) + U.n.at(i, j + 1, k));
      }
  return V;
}

StaggeredField interpolate_adjoint(const CenteredState& V) {
  const GridSpec& g = V.g;
  StaggeredField U(g);
  // each staggered face takes half of each adjacent cell; boundary faces have one
  for (int i = 0; i <= g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k < g.Q; ++k) {
        double s = 0;
        if (i > 0) s += 0.5 * V.m.at(i - 1, j, k);
        if (i < g.M) s += 0.5 * V.m.at(i, j, k);
        U.m.at(i, j, k) = s;
      }
  if (g.dim == 2)
    for (int i = 0; i < g.M; ++i)
      for (int j = 0; j <= g.N; ++j)
        for (int k = 0; k < g.Q; ++k) {
          double s = 0;
          if (j > 0) s += 0.5 * V.n.at(i, j - 1, k);
          if (j < g.N) s += 0.5 * V.n.at(i, j, k);
          U.n.at(i, j, k) = s;
        }
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k <= g.Q; ++k) {
        double s = 0;
        if (k > 0) s += 0.5 * V.rho.at(i, j, k - 1);
        if (k < g.Q) s += 0.5 * V.rho.at(i, j, k);
        U.rho.at(i, j, k) = s;
      }
  return U;
}

CenteredField weighted_divergence(const StaggeredField& U, const ConstraintWeights& w) {
  const GridSpec& g = U.g;
  CenteredField d = make_centered(g);
  const double cx = w.wx / g.dx(), cy = w.wy / g.dy(), ct = w.wt / g.dt();
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k < g.Q; ++k) {
        double s = cx * (U.m.at(i + 1, j, k) - U.m.at(i, j, k)) +
                   ct * (U.rho.at(i, j, k + 1) - U.rho.at(i, j, k));
        if (g.dim == 2) s += cy * (U.n.at(i, j + 1, k) - U.n.at(i, j, k));
        d.at(i, j, k) = s;
      }
  return d;
}

CenteredField divergence(const StaggeredField& U) {
  return weighted_divergence(U, ConstraintWeights{1, 1, 1, 0});
}

void divergence_adjoint(const CenteredField& s, const ConstraintWeights& w,
                        StaggeredField& out_U, CenteredField& out_H) {
  const GridSpec& g = out_U.g;
  const double cx = w.wx / g.dx(), cy = w.wy / g.dy(), ct = w.wt / g.dt();
  out_U.m.fill(0.0);
  if (g.dim == 2) out_U.n.fill(0.0);
  out_U.rho.fill(0.0);
  // interior faces only: the boundary rows of the constraint are handled by the
  // boundary operator, so A* puts nothing there
  for (int i = 1; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k < g.Q; ++k)
        out_U.m.at(i, j, k) = -cx * (s.at(i, j, k) - s.at(i - 1, j, k));
  if (g.dim == 2)
    for (int i = 0; i < g.M; ++i)
      for (int j = 1; j < g.N; ++j)
        for (int k = 0; k < g.Q; ++k)
          out_U.n.at(i, j, k) = -cy * (s.at(i, j, k) - s.at(i, j - 1, k));
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 1; k < g.Q; ++k)
        out_U.rho.at(i, j, k) = -ct * (s.at(i, j, k) - s.at(i, j, k - 1));
  for (size_t a = 0; a < s.size(); ++a) out_H.v[a] = -w.beta * s.v[a];
}

BoundaryData boundary_read(const StaggeredField& U) {
  const GridSpec& g = U.g;
  BoundaryData b(g);
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      b.mu[b.sidx(i, j)] = U.rho.at(i, j, 0);
      b.nu[b.sidx(i, j)] = U.rho.at(i, j, g.Q);
    }
  return b;
}

void boundary_write(StaggeredField& U, const BoundaryData& b) {
  const GridSpec& g = U.g;
  for (int j = 0; j < g.N; ++j)
    for (int k = 0; k < g.Q; ++k) {
      U.m.at(0, j, k) = 0.0;
      U.m.at(g.M, j, k) = 0.0;
    }
  if (g.dim == 2)
    for (int i = 0; i < g.M; ++i)
      for (int k = 0; k < g.Q; ++k) {
        U.n.at(i, 0, k) = 0.0;
        U.n.at(i, g.N, k) = 0.0;
      }
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      U.rho.at(i, j, 0) = b.mu[b.sidx(i, j)];
      U.rho.at(i, j, g.Q) = b.nu[b.sidx(i, j)];
    }
}

double dot(const Field3& a, const Field3& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

double dot(const StaggeredField& a, const StaggeredField& b) {
  double s = dot(a.m, b.m) + dot(a.rho, b.rho);
  if (a.g.dim == 2) s += dot(a.n, b.n);
  return s;
}

double norm2(const Field3& a) { return std::sqrt(dot(a, a)); }
double norm2(const StaggeredField& a) { return std::sqrt(dot(a, a)); }

double operator_norm_K(const GridSpec& g, int iters, unsigned long long seed) {
  // K(U,H) = (interpolate(U), H); the H block is an isometry so power-iterate I*I
  // on the staggered block and combine.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  StaggeredField x(g);
  for (auto& t : x.m.v) t = nd(rng);
  if (g.dim == 2)
    for (auto& t : x.n.v) t = nd(rng);
  for (auto& t : x.rho.v) t = nd(rng);
  double lam = 0;
  for (int it = 0; it < iters; ++it) {
    double nx = norm2(x);
    if (nx == 0) return 1.0;
    for (auto& t : x.m.v) t /= nx;
    if (g.dim == 2)
      for (auto& t : x.n.v) t /= nx;
    for (auto& t : x.rho.v) t /= nx;
    StaggeredField y = interpolate_adjoint(interpolate(x));
    lam = dot(x, y);
    x = std::move(y);
  }
  // ||K||^2 = max(||I||^2, 1) since the H block contributes eigenvalue 1
  return std::sqrt(std::max(lam, 1.0));
}

}  // namespace usot
