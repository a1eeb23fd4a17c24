#pragma once

#include "usot/grid.hpp"

namespace usot {

// symmetric positive definite 2x2; dim==1 problems use a11 only (my stays 0)
struct SymMat2 {
  double a11 = 1, a12 = 0, a22 = 1;

  // solve (2 c alpha A + r I) w = m, r >= 0
  void shifted_solve(double s, double r, double mx, double my, double& wx, double& wy) const;
  double quad(double mx, double my) const {  // m^T A m
    return a11 * mx * mx + 2 * a12 * mx * my + a22 * my * my;
  }
  double lambda_min() const;
  double lambda_max() const;
};

struct CellState {
  double mx = 0, my = 0, rho = 0, H = 0;
};

struct ProxParams {
  int dim = 1;
  double alpha = 1, beta = 1;
  SymMat2 A{};
  double c = 1;           // prox scale: prox_{cJ}
  double fp_tol = 1e-11;  // absolute tolerance on rho~
  int fp_max = 200;
  int noncontract_max = 50;  // switch to bisection after this many non-contracting steps
};

// J(m, rho, H) = alpha m^T A m / rho + beta H^2 / rho on rho>0; 0 at the origin; +inf else
double eval_J(const CellState& x, const ProxParams& p);

// phi(r) = rho + c <(2 c alpha A + r)^{-1} m, alpha A (2 c alpha A + r)^{-1} m>
//        + c beta H^2 / (2 c beta + r)^2 ; strictly decreasing, the prox density is
// its unique fixed point
double phi(double r, const CellState& x, const ProxParams& p);

struct ProxResult {
  CellState y;
  int iters = 0;
  bool bisection = false;
};

ProxResult prox_J(const CellState& x, const ProxParams& p);

// prox_{sigma J*} via Moreau: x - sigma prox_{J/sigma}(x/sigma)
CellState prox_J_conjugate(const CellState& x, double sigma, const ProxParams& p);

// cellwise conjugate prox over centered fields; Aspatial is M*N metrics (monge) or
// nullptr for A = p.A everywhere
void prox_J_conjugate_field(CenteredState& U, CenteredField& H, double sigma,
                            const ProxParams& p, const SymMat2* Aspatial);

// total J over centered fields (volume-less sum); cells with rho <= 0 contribute 0 and
// are counted in *violations when the momentum there is not negligible
double sum_J(const CenteredState& U, const CenteredField& H, const ProxParams& p,
             const SymMat2* Aspatial, int* violations = nullptr);

}  // namespace usot
