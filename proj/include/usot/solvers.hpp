#pragma once

#include <cstdint>
#include <vector>

#include "usot/geometry.hpp"
#include "usot/grid.hpp"
#include "usot/helmholtz.hpp"
#include "usot/hk.hpp"
#include "usot/prox.hpp"

namespace usot {

enum class ProblemKind { wfr, monge, kantorovich };

struct SolveConfig {
  ProblemKind kind = ProblemKind::wfr;
  double alpha = 1.0, beta = 1.0;
  double c1 = 1.0, c2 = 0.0;       // monge: lift weights; kantorovich: smooth-term weight c2/c1
  double tau = 0.0, sigma = 0.0;   // <= 0 selects automatically (0.99/||K|| etc.)
  int max_iters = 20000;
  double stop_tol = 1e-6;          // relative objective change over stop_window iterations
  int stop_window = 50;
  double residual_tol = 1e-8;      // constraint residual gate (projection keeps this tiny)
  double grad_step_safety = 0.5;   // Yan: tau <= safety * 2/L
  ConstraintForm form = ConstraintForm::paper;
  HkOptions hk;                    // inner HK options (kantorovich); epsilon <= 0 picks a default
  uint64_t seed = 1234;            // power iteration / Lipschitz probing
  double divergence_factor = 1e3;  // watchdog: abort + halve tau when the objective blows past this
};

struct SolveReport {
  StaggeredField U;  // final primal iterate (feasible: projected)
  CenteredField H;
  std::vector<double> objective_log;  // reported (volume-scaled) objective per iteration
  std::vector<double> secondary_log;  // (c2/c1) * secondary action component, kantorovich only
  std::vector<double> residual_log;   // constraint residual per iteration
  std::vector<double> mass;           // Q+1 slice masses of the final trajectory
  double objective = 0.0;             // vol * sum J + (c2/c1) * secondary action
  double primary_objective = 0.0;     // vol * sum J
  double secondary_value = 0.0;       // secondary action (without the c2/c1 weight)
  double wall_seconds = 0.0;
  bool converged = false;
  int iterations = 0;
  double tau = 0.0, sigma = 0.0;
  double knorm = 0.0, lipschitz = 0.0;
  int step_shrinks = 0;
  double final_residual = 0.0;
  long long hk_sweeps = 0;  // total inner Sinkhorn sweeps (kantorovich)

  explicit SolveReport(const GridSpec& g) : U(g), H(make_centered(g)) {}
};

struct StepSizes {
  double tau = 0.0, sigma = 0.0;
  double knorm = 0.0;
  double lipschitz = 0.0;  // of the (c2/c1)-weighted internal gradient; 0 when absent
};

// ||K|| by power iteration; for Yan additionally probes the Lipschitz constant of the
// internal smooth gradient by symmetric secants around the initial trajectory and caps
// tau <= grad_step_safety * 2/L, keeping tau sigma ||K||^2 = 0.99^2.
StepSizes estimate_step_sizes(const SolveConfig& cfg, const GridSpec& g,
                              const BoundaryData* boundary = nullptr,
                              const MarkovKernel* kernel = nullptr,
                              SecondaryWorkspace* ws = nullptr);

// rho_s linear in t between the marginals, m = n = 0, H = (wt/beta)(nu - mu) so the source
// balances the linear drift (H = 0 when beta = 0), then one projection for feasibility.
void initialize(StaggeredField& U, CenteredField& H, const BoundaryData& b,
                const HelmholtzPlan& plan);

// Chambolle-Pock for WFR (A = I) and Monge (A = metric->A per cell).
SolveReport solve_chambolle_pock(const BoundaryData& b, const MetricField* metric,
                                 const SolveConfig& cfg);

// Yan three-operator splitting for the Kantorovich form; c2 = 0 reduces bitwise to
// Chambolle-Pock with A = I.
SolveReport solve_yan(const BoundaryData& b, const MarkovKernel& kernel, const SolveConfig& cfg);

// slice masses of a staggered trajectory: mass[k] = sum_ij rho(i,j,k) dx dy
std::vector<double> slice_masses(const GridSpec& g, const Field3& rho_s);

}  // namespace usot
