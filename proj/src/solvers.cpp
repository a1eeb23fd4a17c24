#include "usot/solvers.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace usot {

namespace {

void axpy(Field3& y, double a, const Field3& x) {
  for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += a * x.v[i];
}

// y = 2a - b, elementwise (the theta = 1 over-relaxation)
void relax(Field3& y, const Field3& a, const Field3& b) {
  for (size_t i = 0; i < y.v.size(); ++i) y.v[i] = 2.0 * a.v[i] - b.v[i];
}

double inf_norm(const Field3& f) {
  double m = 0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return m;
}

void validate_config(const SolveConfig& cfg) {
  if (!(cfg.alpha > 0)) throw std::invalid_argument("solve: alpha must be positive");
  if (cfg.beta < 0) throw std::invalid_argument("solve: beta must be nonnegative");
  if (cfg.max_iters < 1 || cfg.stop_window < 1)
    throw std::invalid_argument("solve: max_iters and stop_window must be >= 1");
}

}  // namespace

std::vector<double> slice_masses(const GridSpec& g, const Field3& rho_s) {
  std::vector<double> mass(static_cast<size_t>(g.Q) + 1, 0.0);
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k <= g.Q; ++k) mass[k] += rho_s.at(i, j, k);
  for (double& m : mass) m *= g.spatial_volume();
  return mass;
}

void initialize(StaggeredField& U, CenteredField& H, const BoundaryData& b,
                const HelmholtzPlan& plan) {
  const GridSpec& g = b.g;
  U = StaggeredField(g);
  H = make_centered(g);
  for (int i = 0; i < g.M; ++i) {
    for (int j = 0; j < g.N; ++j) {
      const double m0 = b.mu[b.sidx(i, j)], m1 = b.nu[b.sidx(i, j)];
      for (int k = 0; k <= g.Q; ++k) {
        const double t = g.ts(k);
        U.rho.at(i, j, k) = (1.0 - t) * m0 + t * m1;
      }
    }
  }
  const ConstraintWeights w = plan.weights();
  if (w.beta > 0) {
    const double s = w.wt / w.beta;
    for (int i = 0; i < g.M; ++i)
      for (int j = 0; j < g.N; ++j) {
        const double drift = s * (b.nu[b.sidx(i, j)] - b.mu[b.sidx(i, j)]);
        for (int k = 0; k < g.Q; ++k) H.at(i, j, k) = drift;
      }
  }
  project_constraints(U, H, b, plan);
}

StepSizes estimate_step_sizes(const SolveConfig& cfg, const GridSpec& g,
                              const BoundaryData* boundary, const MarkovKernel* kernel,
                              SecondaryWorkspace* ws) {
  StepSizes st;
  st.knorm = operator_norm_K(g, 50, cfg.seed);
  st.tau = st.sigma = 0.99 / st.knorm;
  if (!kernel || !ws || !boundary || cfg.c2 == 0) return st;

  // symmetric secant probe of the internal smooth gradient around the initial trajectory
  // (same rescaled-source plan the solver itself runs on)
  HelmholtzPlan plan(g, cfg.alpha, std::sqrt(cfg.beta), cfg.form);
  StaggeredField U(g);
  CenteredField H;
  initialize(U, H, *boundary, plan);
  const double w_int = (cfg.c2 / cfg.c1) / g.cell_volume();

  Field3 gp, gm;
  secondary_action_gradient(g, U.rho, *kernel, *ws, gp);  // warms the per-pair duals

  double scale = 0;
  for (double v : U.rho.v) scale += std::abs(v);
  scale = 1e-2 * scale / static_cast<double>(U.rho.v.size()) + 1e-8;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  Field3 delta(U.rho.nx, U.rho.ny, U.rho.nz);
  Field3 rp = U.rho, rm = U.rho;
  double L = 0;
  for (int probe = 0; probe < 10; ++probe) {
    delta.fill(0.0);
    for (int i = 0; i < g.M; ++i)
      for (int j = 0; j < g.N; ++j)
        for (int k = 1; k < g.Q; ++k) delta.at(i, j, k) = scale * un(rng);
    for (size_t t = 0; t < rp.v.size(); ++t) {
      rp.v[t] = U.rho.v[t] + delta.v[t];
      rm.v[t] = U.rho.v[t] - delta.v[t];
    }
    secondary_action_gradient(g, rp, *kernel, *ws, gp);
    secondary_action_gradient(g, rm, *kernel, *ws, gm);
    double num = 0, den = 0;
    for (size_t t = 0; t < gp.v.size(); ++t) {
      const double d = gp.v[t] - gm.v[t];
      num += d * d;
      den += 4.0 * delta.v[t] * delta.v[t];
    }
    if (den > 0) L = std::max(L, w_int * std::sqrt(num / den));
  }
  st.lipschitz = L;
  if (L > 0) st.tau = std::min(st.tau, cfg.grad_step_safety * 2.0 / L);
  st.sigma = 0.99 * 0.99 / (st.tau * st.knorm * st.knorm);
  return st;
}

namespace {

SolveReport run_primal_dual(const BoundaryData& b, const SolveConfig& cfg,
                            const MetricField* metric, const MarkovKernel* kernel) {
  const GridSpec& g = b.g;
  g.validate();
  b.validate();
  validate_config(cfg);
  if (metric && (int)metric->A.size() != g.spatial_cells())
    throw std::invalid_argument("solve: metric field does not match the grid");
  if (kernel && kernel->rows != g.spatial_cells())
    throw std::invalid_argument("solve: kernel rows do not match the grid");
  if (kernel && !(cfg.c1 > 0)) throw std::invalid_argument("solve: c1 must be positive");
  if (kernel && cfg.c2 < 0) throw std::invalid_argument("solve: c2 must be nonnegative");

  const bool yan = kernel && cfg.c2 != 0;
  const double wsec = yan ? cfg.c2 / cfg.c1 : 0.0;
  const double vol = g.cell_volume();
  const double w_int = yan ? wsec / vol : 0.0;

  const auto t_start = std::chrono::steady_clock::now();
  // the solver runs on the rescaled source H' = sqrt(beta) H, which keeps the dual ball
  // of the conjugate prox at unit scale no matter how extreme beta is; the constraint
  // weight on H' is then sqrt(beta) and the H' cost weight in J is exactly 1
  const double hscale = std::sqrt(cfg.beta);
  HelmholtzPlan plan(g, cfg.alpha, hscale, cfg.form);
  ProxParams pp;
  pp.dim = g.dim;
  pp.alpha = cfg.alpha;
  pp.beta = 1.0;
  const SymMat2* Asp = metric ? metric->A.data() : nullptr;

  SolveReport rep(g);
  SecondaryWorkspace ws;
  if (yan) ws = make_secondary_workspace(*kernel, cfg.alpha, cfg.beta, g.Q, cfg.hk);

  StepSizes st;
  if (cfg.tau > 0 && cfg.sigma > 0) {
    st.tau = cfg.tau;
    st.sigma = cfg.sigma;
    st.knorm = operator_norm_K(g, 50, cfg.seed);
  } else {
    st = estimate_step_sizes(cfg, g, &b, yan ? kernel : nullptr, yan ? &ws : nullptr);
  }

  StaggeredField Uhat(g), Urel(g), Unew(g), back(g);
  CenteredField Hhat, Hrel, Hnew, Hd, ZH;
  CenteredState Vc(g), Z(g);
  Field3 Ghat, Grel, Gnew;

  // running sums for tail means: primal-dual convergence is ergodic, so the mean of
  // the recent iterates usually sits well below the oscillating last one; restarting
  // at powers of two keeps the window covering at least the latest half of the run
  StaggeredField Usum(g), Uwin(g);
  CenteredField Hsum = make_centered(g), Hwin = make_centered(g);
  long nsum = 0, nwin = 0;
  int restart_at = 64;

  double tau = st.tau, sigma = st.sigma;
  double S_last = 0, sumJ_last = 0;
  bool diverged = false;
  do {
    diverged = false;
    initialize(Uhat, Hhat, b, plan);
    Urel = Uhat;
    Hrel = Hhat;
    Vc = CenteredState(g);
    Hd = make_centered(g);
    rep.objective_log.clear();
    rep.secondary_log.clear();
    rep.residual_log.clear();
    rep.converged = false;
    Usum = StaggeredField(g);
    Hsum.fill(0.0);
    nsum = nwin = 0;
    restart_at = 64;
    S_last = 0;
    if (yan) {
      S_last = secondary_action_gradient(g, Uhat.rho, *kernel, ws, Ghat);
      Grel = Ghat;
    }
    {
      const CenteredState I0 = interpolate(Uhat);
      sumJ_last = sum_J(I0, Hhat, pp, Asp);
    }
    const double guard = cfg.divergence_factor * (std::abs(vol * sumJ_last + wsec * S_last) + 1.0);

    for (int it = 1; it <= cfg.max_iters; ++it) {
      // dual ascent: prox_{sigma J*}(dual + sigma K(relaxed primal))
      const CenteredState Zi = interpolate(Urel);
      Z.m = Vc.m;
      axpy(Z.m, sigma, Zi.m);
      if (g.dim == 2) {
        Z.n = Vc.n;
        axpy(Z.n, sigma, Zi.n);
      }
      Z.rho = Vc.rho;
      axpy(Z.rho, sigma, Zi.rho);
      ZH = Hd;
      axpy(ZH, sigma, Hrel);
      prox_J_conjugate_field(Z, ZH, sigma, pp, Asp);
      std::swap(Vc, Z);
      std::swap(Hd, ZH);

      // primal descent: project(hat - tau K* dual - tau * smooth gradient)
      back = interpolate_adjoint(Vc);
      Unew = Uhat;
      axpy(Unew.m, -tau, back.m);
      if (g.dim == 2) axpy(Unew.n, -tau, back.n);
      axpy(Unew.rho, -tau, back.rho);
      if (yan) axpy(Unew.rho, -tau * w_int, Grel);
      Hnew = Hhat;
      axpy(Hnew, -tau, Hd);
      project_constraints(Unew, Hnew, b, plan);

      // over-relax (theta = 1), with the gradient correction on the rho_s channel
      relax(Urel.m, Unew.m, Uhat.m);
      if (g.dim == 2) relax(Urel.n, Unew.n, Uhat.n);
      relax(Urel.rho, Unew.rho, Uhat.rho);
      relax(Hrel, Hnew, Hhat);
      double S_new = 0;
      if (yan) {
        S_new = secondary_action_gradient(g, Unew.rho, *kernel, ws, Gnew);
        for (size_t t = 0; t < Urel.rho.v.size(); ++t)
          Urel.rho.v[t] += tau * w_int * (Ghat.v[t] - Gnew.v[t]);
        std::swap(Ghat, Gnew);
      }
      std::swap(Uhat, Unew);
      std::swap(Hhat, Hnew);
      if (yan) secondary_action_gradient(g, Urel.rho, *kernel, ws, Grel);

      if (it == restart_at) {
        Uwin = Usum;
        Hwin = Hsum;
        nwin = nsum;
        Usum = StaggeredField(g);
        Hsum.fill(0.0);
        nsum = 0;
        restart_at *= 2;
      }
      axpy(Usum.m, 1.0, Uhat.m);
      if (g.dim == 2) axpy(Usum.n, 1.0, Uhat.n);
      axpy(Usum.rho, 1.0, Uhat.rho);
      axpy(Hsum, 1.0, Hhat);
      ++nsum;

      const CenteredState Ii = interpolate(Uhat);
      const double sumJ = sum_J(Ii, Hhat, pp, Asp);
      const double obj = vol * sumJ + wsec * S_new;
      const CenteredField resf = constraint_apply(Uhat, Hhat, plan);
      const double res = inf_norm(resf);
      rep.objective_log.push_back(obj);
      rep.secondary_log.push_back(wsec * S_new);
      rep.residual_log.push_back(res);
      rep.iterations = it;
      S_last = S_new;
      sumJ_last = sumJ;

      if (!(obj <= guard)) {  // NaN or blow-up
        diverged = true;
        break;
      }
      if (it > cfg.stop_window) {
        const double prev = rep.objective_log[static_cast<size_t>(it) - 1 - cfg.stop_window];
        if (std::abs(obj - prev) <= cfg.stop_tol * std::max(1.0, std::abs(obj)) &&
            res <= cfg.residual_tol) {
          rep.converged = true;
          break;
        }
      }
    }
    if (diverged) {
      tau *= 0.5;
      sigma = 0.99 * 0.99 / (tau * st.knorm * st.knorm);
      ++rep.step_shrinks;
    }
  } while (diverged && rep.step_shrinks <= 8);

  rep.U = Uhat;
  rep.H = Hhat;
  rep.primary_objective = vol * sumJ_last;
  rep.secondary_value = S_last;
  rep.objective = rep.primary_objective + wsec * S_last;
  rep.final_residual = rep.residual_log.empty() ? 0.0 : rep.residual_log.back();

  // adopt a tail mean when it is feasible (the constraint set is affine, so means of
  // projected iterates stay on it), clean of vacuum violations, and strictly better
  if (!diverged) {
    const double res_accept = std::max(cfg.residual_tol, 1e-9);
    auto consider = [&](const StaggeredField& Us, const CenteredField& Hs, long n) {
      if (n < 16) return;
      StaggeredField Uc = Us;
      CenteredField Hc = Hs;
      const double inv = 1.0 / static_cast<double>(n);
      for (double& x : Uc.m.v) x *= inv;
      if (g.dim == 2)
        for (double& x : Uc.n.v) x *= inv;
      for (double& x : Uc.rho.v) x *= inv;
      for (double& x : Hc.v) x *= inv;
      int viol = 0;
      const CenteredState Ic = interpolate(Uc);
      const double sumJ = sum_J(Ic, Hc, pp, Asp, &viol);
      if (viol > 0) return;
      const double res = inf_norm(constraint_apply(Uc, Hc, plan));
      if (res > res_accept) return;
      const double S = yan ? secondary_action(g, Uc.rho, *kernel, ws) : 0.0;
      const double obj = vol * sumJ + wsec * S;
      if (!(obj < rep.objective)) return;
      rep.U = Uc;
      rep.H = Hc;
      rep.primary_objective = vol * sumJ;
      rep.secondary_value = S;
      rep.objective = obj;
      rep.final_residual = res;
    };
    consider(Uwin, Hwin, nwin);
    consider(Usum, Hsum, nsum);
  }

  rep.mass = slice_masses(g, rep.U.rho);
  if (hscale > 0)
    for (double& x : rep.H.v) x /= hscale;
  rep.tau = tau;
  rep.sigma = sigma;
  rep.knorm = st.knorm;
  rep.lipschitz = st.lipschitz;
  rep.hk_sweeps = ws.total_sweeps;
  if (diverged) rep.converged = false;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

}  // namespace

SolveReport solve_chambolle_pock(const BoundaryData& b, const MetricField* metric,
                                 const SolveConfig& cfg) {
  return run_primal_dual(b, cfg, metric, nullptr);
}

SolveReport solve_yan(const BoundaryData& b, const MarkovKernel& kernel, const SolveConfig& cfg) {
  return run_primal_dual(b, cfg, nullptr, &kernel);
}

}  // namespace usot
