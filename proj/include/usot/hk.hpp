#pragma once

#include <limits>
#include <vector>

#include "usot/geometry.hpp"
#include "usot/grid.hpp"

namespace usot {

// Hellinger-Kantorovich (entropic, unbalanced) solver on discrete measures.
//
// Cost convention: C_ij = -2*lambda*log(cos(delta_ij)) with delta = min(sqrt(beta/(4 alpha)) d, pi/2)
// and lambda = 4/beta.  Pairs at or beyond the cutoff get a huge sentinel and are excluded from
// all log-sum-exps; mass that cannot reach any partner is destroyed at cost lambda per unit.

struct HkCost {
  int rows = 0;
  int cols = 0;
  std::vector<double> C;       // rows x cols, row-major
  double lambda = 0.0;         // 4/beta
  double exclude_above = 0.0;  // entries above this are treated as +infinity
};

// Pairwise cone cost between two point clouds (dim coordinates per point, row-major).
HkCost hk_cost(const std::vector<double>& x, int nx, const std::vector<double>& y, int ny, int dim,
               double alpha, double beta);

// 1e-3 * median of the finite cost entries; falls back to lambda scale for disjoint problems.
double hk_default_epsilon(const HkCost& cost, double scale = 1e-3);

struct HkOptions {
  double epsilon = 0.0;      // final entropic regularization (absolute); must be > 0
  double epsilon_scale = 0;  // used by make_secondary_workspace when epsilon <= 0 (default 1e-2)
  int anneal = 4;            // cold starts begin at epsilon * 2^anneal and halve down
  double tol = 1e-8;        // stop when L1 marginal violation <= tol * (mass(mu) + mass(nu))
  int max_sweeps = 5000;    // per annealing level
  double coarse_tol_factor = 100.0;  // looser tolerance on non-final levels
};

struct HkSolution {
  double value = 0.0;       // <C,pi> + lambda KL(pi1|mu) + lambda KL(pi2|nu), the HK^2 estimate
  double value_dual = 0.0;  // entropic dual objective; smooth in (mu, nu), value_dual -> value as
                            // eps -> 0, and hk_marginal_gradient is its exact gradient
  std::vector<double> f;    // row potentials; +inf marks fully destroyed rows
  std::vector<double> g;    // column potentials
  bool converged = false;
  int sweeps = 0;            // total across annealing levels
  double marginal_err = 0.0; // final L1 row violation (columns are exact by construction)
};

// Log-domain Sinkhorn with a translation-invariance shift after every sweep.  When warm duals
// are supplied the annealing schedule is skipped and iteration starts at the final epsilon.
HkSolution hk_solve(const HkCost& cost, const std::vector<double>& mu, const std::vector<double>& nu,
                    const HkOptions& opts, const std::vector<double>* warm_f = nullptr,
                    const std::vector<double>* warm_g = nullptr);

// Exact gradient of value_dual: d/d mu_i = lambda (1 - a_i) + eps (mass(nu) - a_i) with
// a_i = e^{-f_i/lambda} (0 for destroyed rows); the nu side uses g and mass(mu).
std::vector<double> hk_marginal_gradient(const std::vector<double>& potential, double lambda,
                                         double eps, double other_mass);

// Trapezoidal action of a density trajectory pushed through a Markov kernel: the time slices of
// rho_s are mapped to masses on the kernel support and consecutive pairs are charged
// HK^2(xi_k, xi_{k+1}) / dt, in the value_dual reading so the action stays exactly consistent
// with its gradient.  The workspace caches the support cost matrix and per-pair duals so
// repeated evaluations along a primal-dual run only pay a couple of Sinkhorn sweeps per pair.
struct SecondaryWorkspace {
  HkCost cost;
  HkOptions opts;
  std::vector<std::vector<double>> warm_f, warm_g;
  std::vector<char> warm_ok;
  long long total_sweeps = 0;
  long long evaluations = 0;
};

SecondaryWorkspace make_secondary_workspace(const MarkovKernel& kernel, double alpha, double beta,
                                            int pairs, const HkOptions& inner);

double secondary_action(const GridSpec& grid, const Field3& rho_s, const MarkovKernel& kernel,
                        SecondaryWorkspace& ws);

// Returns the action and writes d action / d rho_s into grad (same shape as rho_s); the two
// boundary time slices are pinned by the marginals, so their gradient entries are zero.
double secondary_action_gradient(const GridSpec& grid, const Field3& rho_s,
                                 const MarkovKernel& kernel, SecondaryWorkspace& ws, Field3& grad);

}  // namespace usot
