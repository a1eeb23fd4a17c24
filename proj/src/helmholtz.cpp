#include "usot/helmholtz.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace usot {

namespace {
std::mutex planner_mutex;  // fftw planning is not thread-safe
}

struct HelmholtzPlan::Fftw {
  fftw_plan fwd = nullptr, inv = nullptr;
  std::vector<double> buf;  // planning template; executes use the new-array API
};

HelmholtzPlan::HelmholtzPlan(const GridSpec& g, double alpha, double beta,
                             ConstraintForm form)
    : g_(g), alpha_(alpha), beta_(beta), form_(form), fftw_(new Fftw) {
  g.validate();
  if (!(alpha > 0) || beta < 0) throw std::invalid_argument("HelmholtzPlan: need alpha>0, beta>=0");

  const ConstraintWeights w = weights();
  symbol_.resize(static_cast<size_t>(g.M) * g.N * g.Q);
  const double cx = w.wx * w.wx / (g.dx() * g.dx());
  const double cy = w.wy * w.wy / (g.dy() * g.dy());
  const double ct = w.wt * w.wt / (g.dt() * g.dt());
  for (int i = 0; i < g.M; ++i) {
    const double ex = 2.0 - 2.0 * std::cos(M_PI * i / g.M);
    for (int j = 0; j < g.N; ++j) {
      const double ey = g.dim == 2 ? 2.0 - 2.0 * std::cos(M_PI * j / g.N) : 0.0;
      for (int k = 0; k < g.Q; ++k) {
        const double et = 2.0 - 2.0 * std::cos(M_PI * k / g.Q);
        symbol_[(static_cast<size_t>(i) * g.N + j) * g.Q + k] =
            beta * beta + cx * ex + cy * ey + ct * et;
      }
    }
  }

  fftw_->buf.resize(symbol_.size());
  std::lock_guard<std::mutex> lock(planner_mutex);
  fftw_->fwd = fftw_plan_r2r_3d(g.M, g.N, g.Q, fftw_->buf.data(), fftw_->buf.data(),
                                FFTW_REDFT10, FFTW_REDFT10, FFTW_REDFT10,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_->inv = fftw_plan_r2r_3d(g.M, g.N, g.Q, fftw_->buf.data(), fftw_->buf.data(),
                                FFTW_REDFT01, FFTW_REDFT01, FFTW_REDFT01,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!fftw_->fwd || !fftw_->inv) throw std::runtime_error("HelmholtzPlan: fftw planning failed");
}

HelmholtzPlan::~HelmholtzPlan() {
  std::lock_guard<std::mutex> lock(planner_mutex);
  if (fftw_->fwd) fftw_destroy_plan(fftw_->fwd);
  if (fftw_->inv) fftw_destroy_plan(fftw_->inv);
}

void HelmholtzPlan::dct2(double* data) const { fftw_execute_r2r(fftw_->fwd, data, data); }
void HelmholtzPlan::dct3(double* data) const { fftw_execute_r2r(fftw_->inv, data, data); }

void dct_neumann_solve(const HelmholtzPlan& plan, const CenteredField& rhs,
                       CenteredField& s) {
  const GridSpec& g = plan.grid();
  s = rhs;
  plan.dct2(s.data());
  const auto& sym = plan.symbol();
  const double norm = 1.0 / (8.0 * g.M * g.N * g.Q);  // REDFT10 o REDFT01 = 2n per axis
  if (plan.beta() == 0.0) {
    // pure Neumann: the constant mode is in the kernel; require a compatible rhs
    double l1 = 0;
    for (double x : rhs.v) l1 += std::abs(x);
    const double mode = s.v[0] * norm;  // = mean(rhs)
    if (std::abs(mode) * rhs.size() > 1e-10 * std::max(l1, 1e-300))
      throw std::runtime_error("dct_neumann_solve: incompatible rhs for beta = 0");
    s.v[0] = 0.0;
    for (size_t a = 1; a < s.size(); ++a) s.v[a] /= sym[a];
  } else {
    for (size_t a = 0; a < s.size(); ++a) s.v[a] /= sym[a];
  }
  plan.dct3(s.data());
  for (double& x : s.v) x *= norm;
}

CenteredField constraint_apply(const StaggeredField& U, const CenteredField& H,
                               const HelmholtzPlan& plan) {
  CenteredField r = weighted_divergence(U, plan.weights());
  const double beta = plan.beta();
  for (size_t a = 0; a < r.size(); ++a) r.v[a] -= beta * H.v[a];
  return r;
}

ProjectionStats project_constraints(StaggeredField& U, CenteredField& H,
                                    const BoundaryData& b0, const HelmholtzPlan& plan) {
  const GridSpec& g = plan.grid();
  const ConstraintWeights w = plan.weights();
  boundary_write(U, b0);

  CenteredField rhs = constraint_apply(U, H, plan);
  ProjectionStats st;
  for (double x : rhs.v) st.rhs_inf = std::max(st.rhs_inf, std::abs(x));

  CenteredField s = make_centered(g);
  dct_neumann_solve(plan, rhs, s);

  // (U,H) <- (U,H) - A* s  on the free coordinates
  const double cx = w.wx / g.dx(), cy = w.wy / g.dy(), ct = w.wt / g.dt();
  for (int i = 1; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k < g.Q; ++k)
        U.m.at(i, j, k) += cx * (s.at(i, j, k) - s.at(i - 1, j, k));
  if (g.dim == 2)
    for (int i = 0; i < g.M; ++i)
      for (int j = 1; j < g.N; ++j)
        for (int k = 0; k < g.Q; ++k)
          U.n.at(i, j, k) += cy * (s.at(i, j, k) - s.at(i, j - 1, k));
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 1; k < g.Q; ++k)
        U.rho.at(i, j, k) += ct * (s.at(i, j, k) - s.at(i, j, k - 1));
  const double beta = plan.beta();
  for (size_t a = 0; a < H.size(); ++a) H.v[a] += beta * s.v[a];
  return st;
}

}  // namespace usot
