#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace usot {

// Flat row-major 3d block, k fastest. All field storage goes through this so the
// index map lives in exactly one place.
struct Field3 {
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> v;

  Field3() = default;
  Field3(int nx_, int ny_, int nz_, double fill = 0.0)
      : nx(nx_), ny(ny_), nz(nz_), v(static_cast<size_t>(nx_) * ny_ * nz_, fill) {}

  size_t idx(int i, int j, int k) const {
    return (static_cast<size_t>(i) * ny + j) * nz + k;
  }
  double& at(int i, int j, int k) { return v[idx(i, j, k)]; }
  double at(int i, int j, int k) const { return v[idx(i, j, k)]; }
  size_t size() const { return v.size(); }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
  void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// Unit space-time box [0,1]^dim x [0,1]; M x N spatial cells (N = 1 when dim = 1),
// Q time cells.
struct GridSpec {
  int dim = 1;
  int M = 2;
  int N = 1;
  int Q = 2;

  double dx() const { return 1.0 / M; }
  double dy() const { return 1.0 / N; }  // 1.0 when dim == 1 since N == 1
  double dt() const { return 1.0 / Q; }
  double cell_volume() const { return dx() * dy() * dt(); }
  double spatial_volume() const { return dx() * dy(); }
  int cells() const { return M * N * Q; }
  int spatial_cells() const { return M * N; }

  double xc(int i) const { return (i + 0.5) * dx(); }
  double yc(int j) const { return (j + 0.5) * dy(); }
  double tc(int k) const { return (k + 0.5) * dt(); }
  // staggered time node t_k, k = 0..Q
  double ts(int k) const { return k * dt(); }

  void validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("GridSpec: dim must be 1 or 2");
    if (dim == 1 && N != 1) throw std::invalid_argument("GridSpec: dim==1 requires N==1");
    if (M < 2 || Q < 2 || (dim == 2 && N < 2))
      throw std::invalid_argument("GridSpec: M, Q (and N when dim==2) must be >= 2");
  }
  bool operator==(const GridSpec& o) const {
    return dim == o.dim && M == o.M && N == o.N && Q == o.Q;
  }
};

using CenteredField = Field3;  // M x N x Q
inline CenteredField make_centered(const GridSpec& g) { return Field3(g.M, g.N, g.Q); }

// Staggered momentum/density block: m on x-faces, n on y-faces (dim==2 only),
// rho on time-faces. Array index i=0..M corresponds to face x_{i-1/2}, i.e. i=0 and
// i=M are the spatial boundary; same pattern for j and k.
struct StaggeredField {
  GridSpec g;
  Field3 m;    // (M+1) x N x Q
  Field3 n;    // M x (N+1) x Q, empty when dim == 1
  Field3 rho;  // M x N x (Q+1)

  explicit StaggeredField(const GridSpec& gs)
      : g(gs),
        m(gs.M + 1, gs.N, gs.Q),
        n(gs.dim == 2 ? Field3(gs.M, gs.N + 1, gs.Q) : Field3()),
        rho(gs.M, gs.N, gs.Q + 1) {}
};

// Interpolated (or dual) centered state: one M x N x Q block per staggered channel.
struct CenteredState {
  GridSpec g;
  Field3 m, n, rho;  // n empty when dim == 1

  explicit CenteredState(const GridSpec& gs)
      : g(gs), m(make_centered(gs)), n(gs.dim == 2 ? make_centered(gs) : Field3()),
        rho(make_centered(gs)) {}
};

// Temporal marginal slabs: mu at t=0, nu at t=1, densities over the spatial cells.
// The spatial flux boundary values are identically zero and carried implicitly.
struct BoundaryData {
  GridSpec g;
  std::vector<double> mu, nu;  // size M*N, nonnegative

  explicit BoundaryData(const GridSpec& gs)
      : g(gs), mu(static_cast<size_t>(gs.M) * gs.N, 0.0), nu(static_cast<size_t>(gs.M) * gs.N, 0.0) {}

  size_t sidx(int i, int j) const { return static_cast<size_t>(i) * g.N + j; }
  void validate() const;
  double mass_mu() const;  // sum mu * dx*dy
  double mass_nu() const;
};

// Per-axis divergence weights; the `paper` constraint form uses w = alpha on every
// axis, the `continuity` form uses 1 on the time axis.
struct ConstraintWeights {
  double wx = 1, wy = 1, wt = 1, beta = 0;
};

// midpoint interpolation staggered -> centered, and its adjoint
CenteredState interpolate(const StaggeredField& U);
StaggeredField interpolate_adjoint(const CenteredState& V);

// space-time divergence (unweighted) and the weighted variant used by the constraint
CenteredField divergence(const StaggeredField& U);
CenteredField weighted_divergence(const StaggeredField& U, const ConstraintWeights& w);

// adjoint of (U,H) -> wx Dx m + wy Dy n + wt Dt rho - beta H; staggered entries are
// backward differences of s on interior faces, zero on boundary faces, and the
// centered block is -beta s.
void divergence_adjoint(const CenteredField& s, const ConstraintWeights& w,
                        StaggeredField& out_U, CenteredField& out_H);
inline void divergence_adjoint(const CenteredField& s, double alpha, double beta,
                               StaggeredField& out_U, CenteredField& out_H) {
  divergence_adjoint(s, ConstraintWeights{alpha, alpha, alpha, beta}, out_U, out_H);
}

BoundaryData boundary_read(const StaggeredField& U);
void boundary_write(StaggeredField& U, const BoundaryData& b);

// l2 dot/norm over every staggered + centered entry (diagnostics, power iteration)
double dot(const StaggeredField& a, const StaggeredField& b);
double dot(const Field3& a, const Field3& b);
double norm2(const StaggeredField& a);
double norm2(const Field3& a);

// ||K|| for K(U,H) = (interpolate(U), H), by power iteration on K*K
double operator_norm_K(const GridSpec& g, int iters = 50, unsigned long long seed = 1234);

}  // namespace usot
