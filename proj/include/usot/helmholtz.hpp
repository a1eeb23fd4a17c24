#pragma once

#include <memory>

#include "usot/grid.hpp"

namespace usot {

enum class ConstraintForm { paper, continuity };

// (beta^2 I - sum_axis w^2 D^2) with half-sample-even Neumann closure on every axis,
// diagonalized by DCT-II/DCT-III pairs; plans and the eigenvalue symbol are cached
// per grid
class HelmholtzPlan {
 public:
  HelmholtzPlan(const GridSpec& g, double alpha, double beta,
                ConstraintForm form = ConstraintForm::paper);
  ~HelmholtzPlan();
  HelmholtzPlan(const HelmholtzPlan&) = delete;
  HelmholtzPlan& operator=(const HelmholtzPlan&) = delete;

  const GridSpec& grid() const { return g_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  ConstraintForm form() const { return form_; }
  ConstraintWeights weights() const {
    const double wt = form_ == ConstraintForm::paper ? alpha_ : 1.0;
    return ConstraintWeights{alpha_, alpha_, wt, beta_};
  }
  const std::vector<double>& symbol() const { return symbol_; }

  // unnormalized in-place transforms over an M*N*Q block
  void dct2(double* data) const;
  void dct3(double* data) const;

 private:
  GridSpec g_;
  double alpha_, beta_;
  ConstraintForm form_;
  std::vector<double> symbol_;
  struct Fftw;
  std::unique_ptr<Fftw> fftw_;
};

// solve (beta^2 - sum w^2 D^2) s = rhs; when beta == 0 the zero mode must be
// compatible (|mode| <= 1e-10 * ||rhs||_1, else throws) and the solution mean is 0
void dct_neumann_solve(const HelmholtzPlan& plan, const CenteredField& rhs,
                       CenteredField& s);

struct ProjectionStats {
  double rhs_inf = 0;  // constraint violation before projecting (after boundary write)
};

// Euclidean projection onto {constraint(U,H) = 0, boundary(U) = b0}: pins the boundary
// slabs, solves the Helmholtz problem for the multiplier, applies the staggered updates
ProjectionStats project_constraints(StaggeredField& U, CenteredField& H,
                                    const BoundaryData& b0, const HelmholtzPlan& plan);

// constraint residual field wx Dx m + wy Dy n + wt Dt rho - beta H (the projected-out
// quantity; useful for feasibility checks)
CenteredField constraint_apply(const StaggeredField& U, const CenteredField& H,
                               const HelmholtzPlan& plan);

}  // namespace usot
