#include "usot/hk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace usot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

double vsum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

HkCost hk_cost(const std::vector<double>& x, int nx, const std::vector<double>& y, int ny, int dim,
               double alpha, double beta) {
  if (dim < 1 || (int)x.size() != nx * dim || (int)y.size() != ny * dim)
    throw std::invalid_argument("hk_cost: point array size mismatch");
  if (!(alpha > 0) || !(beta > 0)) throw std::invalid_argument("hk_cost: alpha, beta must be positive");
  HkCost cost;
  cost.rows = nx;
  cost.cols = ny;
  cost.lambda = 4.0 / beta;
  cost.exclude_above = 2e9 * cost.lambda;
  const double sentinel = 2e12 * cost.lambda;
  const double rate = std::sqrt(beta / (4.0 * alpha));
  cost.C.resize((size_t)nx * ny);
  for (int i = 0; i < nx; ++i) {
    const double* xi = x.data() + (size_t)i * dim;
    double* row = cost.C.data() + (size_t)i * ny;
    for (int j = 0; j < ny; ++j) {
      const double* yj = y.data() + (size_t)j * dim;
      double d2 = 0;
      for (int a = 0; a < dim; ++a) {
        const double t = xi[a] - yj[a];
        d2 += t * t;
      }
      const double s = rate * std::sqrt(d2);
      row[j] = (s >= kPi / 2) ? sentinel : -2.0 * cost.lambda * std::log(std::cos(s));
    }
  }
  return cost;
}

double hk_default_epsilon(const HkCost& cost, double scale) {
  std::vector<double> finite;
  finite.reserve(cost.C.size());
  for (double c : cost.C)
    if (c <= cost.exclude_above) finite.push_back(c);
  if (finite.empty()) return scale * std::max(cost.lambda, 1.0);
  const size_t mid = finite.size() / 2;
  std::nth_element(finite.begin(), finite.begin() + mid, finite.end());
  double med = finite[mid];
  if (!(med > 0)) {
    // degenerate clouds (mostly coincident points): fall back to the mean positive cost
    med = vsum(finite) / finite.size();
    if (!(med > 0)) med = std::max(cost.lambda, 1.0);
  }
  return scale * med;
}

HkSolution hk_solve(const HkCost& cost, const std::vector<double>& mu, const std::vector<double>& nu,
                    const HkOptions& opts, const std::vector<double>* warm_f,
                    const std::vector<double>* warm_g) {
  const int R = cost.rows, S = cost.cols;
  if ((int)mu.size() != R || (int)nu.size() != S)
    throw std::invalid_argument("hk_solve: marginal size does not match the cost matrix");
  if (!(opts.epsilon > 0)) throw std::invalid_argument("hk_solve: epsilon must be positive");
  const double lambda = cost.lambda;
  const double cut = cost.exclude_above;
  const double* C = cost.C.data();

  HkSolution sol;
  sol.f.assign(R, 0.0);
  sol.g.assign(S, 0.0);
  const double mass = vsum(mu) + vsum(nu);
  if (!(mass > 0)) {
    sol.converged = true;
    return sol;
  }

  bool warm = warm_f && warm_g && (int)warm_f->size() == R && (int)warm_g->size() == S;
  if (warm) {
    sol.f = *warm_f;
    sol.g = *warm_g;
  }

  std::vector<double> logmu(R), lognu(S);
  for (int i = 0; i < R; ++i) logmu[i] = mu[i] > 0 ? std::log(mu[i]) : -kInf;
  for (int j = 0; j < S; ++j) lognu[j] = nu[j] > 0 ? std::log(nu[j]) : -kInf;

  std::vector<double> fnew(R), vbuf(S), gbuf(S), colmax(S), colsum(S);
  // attempt 0 honors warm duals (single level, no annealing); if they turn out to be a bad
  // guess, attempt 1 falls back to a cold annealed start
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) {
      warm = false;
      std::fill(sol.f.begin(), sol.f.end(), 0.0);
      std::fill(sol.g.begin(), sol.g.end(), 0.0);
    }
    bool bail = false;
    std::vector<double> levels;
    if (warm) {
      levels.push_back(opts.epsilon);
    } else {
      for (int a = std::max(opts.anneal, 0); a >= 0; --a)
        levels.push_back(opts.epsilon * std::ldexp(1.0, a));
    }

    for (size_t lev = 0; lev < levels.size() && !bail; ++lev) {
      const double eps = levels[lev];
      const double inv_eps = 1.0 / eps;
      const double scale = lambda * eps / (lambda + eps);
      const bool final_level = lev + 1 == levels.size();
      const double tol_here = opts.tol * (final_level ? 1.0 : opts.coarse_tol_factor) * mass;
      bool level_done = false;
      double plateau_err = kInf;

      for (int sweep = 1; sweep <= opts.max_sweeps && !level_done; ++sweep) {
        ++sol.sweeps;
        // f pass: L_i = LSE_j[(g_j - C_ij)/eps + log nu_j]; the same pass yields the row sums
        // under the incoming duals, hence the marginal violation of the previous sweep for free.
        for (int j = 0; j < S; ++j) {
          const double v = sol.g[j] * inv_eps + lognu[j];
          gbuf[j] = std::isfinite(v) ? v : -kInf;
        }
        double err = 0;
        for (int i = 0; i < R; ++i) {
          const double* Ci = C + (size_t)i * S;
          double m = -kInf;
          for (int j = 0; j < S; ++j) {
            const double v = Ci[j] > cut ? -kInf : gbuf[j] - Ci[j] * inv_eps;
            vbuf[j] = v;
            if (v > m) m = v;
          }
          double L;
          if (m == -kInf) {
            L = -kInf;
          } else {
            double acc = 0;
            for (int j = 0; j < S; ++j)
              if (vbuf[j] != -kInf) acc += std::exp(vbuf[j] - m);
            L = m + std::log(acc);
          }
          const double fi_new = L == -kInf ? kInf : -scale * L;
          if (mu[i] > 0 && sol.f[i] < kInf) {
            // |row mass - relaxed target| = mu e^{-f/lambda} |expm1((f - f_new)/scale)|; the
            // direct form exp(f/eps + L) - exp(-f/lambda) loses everything to cancellation
            // near the fixed point, this one is exact down to the last few ulps
            const double d = fi_new < kInf ? (sol.f[i] - fi_new) / scale : -kInf;
            err += mu[i] * std::exp(-sol.f[i] / lambda) * std::abs(std::expm1(d));
          }
          fnew[i] = fi_new;
        }
        sol.marginal_err = err;
        // certify only from sweep 2, so every call advances the duals by at least one full
        // contraction step.  Certifying warm duals untouched would freeze the potentials of
        // low mass rows (they barely register in the mass weighted violation), and a caller
        // iterating on the marginals would then be differentiating a stale linearization.
        if (sweep > 1 && err <= tol_here) {
          // keep the previous sweep's duals: their column condition is exact
          level_done = true;
          if (final_level) sol.converged = true;
          break;
        }
        if (sweep % 64 == 0) {
          // warm duals that are still far off after a fair chance: restart cold with annealing.
          // A cold annealed run costs a few hundred sweeps, so bailing only pays once the
          // violation is a sizable fraction of the total mass, not merely far from tol.
          if (warm && attempt == 0 && err > 0.05 * mass && err > 1e4 * tol_here) {
            bail = true;
            break;
          }
          // geometric decay, however slow, decreases err over a whole window; only the
          // floating-point floor is non monotone, so stop on the first window without progress
          if (!(err < plateau_err)) {
            level_done = true;
            break;
          }
          plateau_err = err;
        }
        sol.f = fnew;

        // g pass, streamed over the row-major cost: L_j = LSE_i[(f_i - C_ij)/eps + log mu_i]
        std::fill(colmax.begin(), colmax.end(), -kInf);
        std::fill(colsum.begin(), colsum.end(), 0.0);
        for (int i = 0; i < R; ++i) {
          if (!(mu[i] > 0) || !(sol.f[i] < kInf)) continue;
          const double base = sol.f[i] * inv_eps + logmu[i];
          const double* Ci = C + (size_t)i * S;
          for (int j = 0; j < S; ++j) {
            if (Ci[j] > cut) continue;
            const double v = base - Ci[j] * inv_eps;
            if (v <= colmax[j]) {
              colsum[j] += std::exp(v - colmax[j]);
            } else {
              colsum[j] = colsum[j] * std::exp(colmax[j] - v) + 1.0;
              colmax[j] = v;
            }
          }
        }
        for (int j = 0; j < S; ++j)
          sol.g[j] = colmax[j] == -kInf ? kInf : -scale * (colmax[j] + std::log(colsum[j]));

        // translation shift f += t, g -= t: exact maximizer of the dual along the direction the
        // plain iteration contracts slowest, and invariant for the entropic term
        double P = 0, N = 0;
        for (int i = 0; i < R; ++i)
          if (mu[i] > 0 && sol.f[i] < kInf) P += mu[i] * std::exp(-sol.f[i] / lambda);
        for (int j = 0; j < S; ++j)
          if (nu[j] > 0 && sol.g[j] < kInf) N += nu[j] * std::exp(-sol.g[j] / lambda);
        if (P > 0 && N > 0) {
          const double t = 0.5 * lambda * std::log(P / N);
          if (std::isfinite(t) && t != 0) {
            for (int i = 0; i < R; ++i) sol.f[i] += t;
            for (int j = 0; j < S; ++j) sol.g[j] -= t;
          }
        }
      }
    }
    if (!bail) break;
  }

  // two readings of the result at the final epsilon:
  //  - value: the plan's unregularized cost <C,pi> + lambda KL(a|mu) + lambda KL(b|nu),
  //    the sharper HK^2 estimate for reporting;
  //  - value_dual: the entropic dual objective
  //      lambda<mu, 1-e^{-f/lambda}> + lambda<nu, 1-e^{-g/lambda}> - eps (mass(pi) - mass(mu) mass(nu)),
  //    the smooth function of (mu, nu) whose exact gradient hk_marginal_gradient returns.
  const double eps = opts.epsilon;
  const double inv_eps = 1.0 / eps;
  std::vector<double> a(R, 0.0), b(S, 0.0);
  double cost_term = 0, plan_mass = 0;
  for (int j = 0; j < S; ++j) {
    const double v = sol.g[j] * inv_eps + lognu[j];
    gbuf[j] = std::isfinite(v) ? v : -kInf;
  }
  for (int i = 0; i < R; ++i) {
    if (!(mu[i] > 0) || !(sol.f[i] < kInf)) continue;
    const double base = sol.f[i] * inv_eps + logmu[i];
    const double* Ci = C + (size_t)i * S;
    for (int j = 0; j < S; ++j) {
      if (Ci[j] > cut || gbuf[j] == -kInf) continue;
      const double p = std::exp(base + gbuf[j] - Ci[j] * inv_eps);
      cost_term += Ci[j] * p;
      plan_mass += p;
      a[i] += p;
      b[j] += p;
    }
  }
  double kl = 0;
  for (int i = 0; i < R; ++i) {
    if (!(mu[i] > 0)) continue;
    kl += a[i] > 0 ? a[i] * std::log(a[i] / mu[i]) - a[i] + mu[i] : mu[i];
  }
  for (int j = 0; j < S; ++j) {
    if (!(nu[j] > 0)) continue;
    kl += b[j] > 0 ? b[j] * std::log(b[j] / nu[j]) - b[j] + nu[j] : nu[j];
  }
  sol.value = cost_term + lambda * kl;

  double linear = 0, mass_mu = 0, mass_nu = 0;
  for (int i = 0; i < R; ++i) {
    mass_mu += mu[i];
    linear += lambda * mu[i] * (1.0 - (sol.f[i] < kInf ? std::exp(-sol.f[i] / lambda) : 0.0));
  }
  for (int j = 0; j < S; ++j) {
    mass_nu += nu[j];
    linear += lambda * nu[j] * (1.0 - (sol.g[j] < kInf ? std::exp(-sol.g[j] / lambda) : 0.0));
  }
  sol.value_dual = linear - eps * (plan_mass - mass_mu * mass_nu);
  return sol;
}

std::vector<double> hk_marginal_gradient(const std::vector<double>& potential, double lambda,
                                         double eps, double other_mass) {
  std::vector<double> grad(potential.size());
  for (size_t i = 0; i < potential.size(); ++i) {
    const double ai = potential[i] < kInf ? std::exp(-potential[i] / lambda) : 0.0;
    grad[i] = lambda * (1.0 - ai) + eps * (other_mass - ai);
  }
  return grad;
}

SecondaryWorkspace make_secondary_workspace(const MarkovKernel& kernel, double alpha, double beta,
                                            int pairs, const HkOptions& inner) {
  SecondaryWorkspace ws;
  const int S = kernel.cols;
  std::vector<double> pts((size_t)S * std::max(kernel.n_out, 1), 0.0);
  for (int j = 0; j < S; ++j)
    for (int a = 0; a < std::max(kernel.n_out, 1); ++a)
      pts[(size_t)j * std::max(kernel.n_out, 1) + a] = a < 3 ? kernel.support[j][a] : 0.0;
  ws.cost = hk_cost(pts, S, pts, S, std::max(kernel.n_out, 1), alpha, beta);
  ws.opts = inner;
  if (!(ws.opts.epsilon > 0)) {
    const double scale = inner.epsilon_scale > 0 ? inner.epsilon_scale : 1e-2;
    ws.opts.epsilon = hk_default_epsilon(ws.cost, scale);
  }
  ws.warm_f.assign(pairs, {});
  ws.warm_g.assign(pairs, {});
  ws.warm_ok.assign(pairs, 0);
  return ws;
}

namespace {

// shared core: push the Q+1 time slices through the kernel and charge HK^2 / dt per pair;
// when grad != nullptr, also chains d HK^2 / d xi back through the kernel (with the
// cell_volume factor of the pushforward) into the interior time slices.
double secondary_action_impl(const GridSpec& grid, const Field3& rho_s, const MarkovKernel& kernel,
                             SecondaryWorkspace& ws, Field3* grad) {
  const int Q = grid.Q;
  const int cells = grid.spatial_cells();
  if ((int)ws.warm_ok.size() != Q)
    throw std::invalid_argument("secondary_action: workspace sized for a different pair count");
  if (rho_s.nx != grid.M || rho_s.ny != grid.N || rho_s.nz != Q + 1)
    throw std::invalid_argument("secondary_action: rho_s has the wrong shape");

  // kernel_apply consumes a contiguous spatial slice; rho_s is (i*N+j)*(Q+1)+k indexed, so gather.
  // Mid-run iterates may dip below zero: clamp the pushed masses (Sinkhorn needs mu >= 0) and
  // remember where, since the chain rule through the clamp zeroes those gradient entries.
  std::vector<std::vector<double>> xi(Q + 1);
  std::vector<std::vector<char>> clamped(Q + 1);
  std::vector<double> xi_mass(Q + 1, 0.0);
  std::vector<double> slice(cells);
  for (int k = 0; k <= Q; ++k) {
    for (int c = 0; c < cells; ++c) slice[c] = rho_s.v[(size_t)c * (Q + 1) + k];
    xi[k] = kernel_apply(kernel, slice.data());
    clamped[k].assign(xi[k].size(), 0);
    for (size_t j = 0; j < xi[k].size(); ++j) {
      if (xi[k][j] < 0) {
        xi[k][j] = 0;
        clamped[k][j] = 1;
      }
      xi_mass[k] += xi[k][j];
    }
  }

  if (grad) {
    *grad = rho_s;
    grad->fill(0.0);
  }
  const double inv_dt = 1.0 / grid.dt();
  const double lambda = ws.cost.lambda;
  double action = 0;
  for (int k = 0; k < Q; ++k) {
    const std::vector<double>* wf = ws.warm_ok[k] ? &ws.warm_f[k] : nullptr;
    const std::vector<double>* wg = ws.warm_ok[k] ? &ws.warm_g[k] : nullptr;
    HkSolution sol = hk_solve(ws.cost, xi[k], xi[k + 1], ws.opts, wf, wg);
    ws.warm_f[k] = sol.f;
    ws.warm_g[k] = sol.g;
    ws.warm_ok[k] = 1;
    ws.total_sweeps += sol.sweeps;
    action += sol.value_dual * inv_dt;
    if (grad) {
      const double eps = ws.opts.epsilon;
      std::vector<double> dmu = hk_marginal_gradient(sol.f, lambda, eps, xi_mass[k + 1]);
      std::vector<double> dnu = hk_marginal_gradient(sol.g, lambda, eps, xi_mass[k]);
      for (size_t j = 0; j < dmu.size(); ++j)
        if (clamped[k][j]) dmu[j] = 0;
      for (size_t j = 0; j < dnu.size(); ++j)
        if (clamped[k + 1][j]) dnu[j] = 0;
      const std::vector<double> back_mu = kernel_adjoint_apply(kernel, dmu.data());
      const std::vector<double> back_nu = kernel_adjoint_apply(kernel, dnu.data());
      // xi_j = sum_i rho_i P_ij * vol, so d/d rho picks up the volume factor
      const double w = inv_dt * kernel.cell_volume;
      if (k > 0)
        for (int c = 0; c < cells; ++c) grad->v[(size_t)c * (Q + 1) + k] += w * back_mu[c];
      if (k + 1 < Q)
        for (int c = 0; c < cells; ++c) grad->v[(size_t)c * (Q + 1) + k + 1] += w * back_nu[c];
    }
  }
  ++ws.evaluations;
  return action;
}

}  // namespace

double secondary_action(const GridSpec& grid, const Field3& rho_s, const MarkovKernel& kernel,
                        SecondaryWorkspace& ws) {
  return secondary_action_impl(grid, rho_s, kernel, ws, nullptr);
}

double secondary_action_gradient(const GridSpec& grid, const Field3& rho_s,
                                 const MarkovKernel& kernel, SecondaryWorkspace& ws, Field3& grad) {
  return secondary_action_impl(grid, rho_s, kernel, ws, &grad);
}

}  // namespace usot
