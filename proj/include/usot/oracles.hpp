#pragma once

#include <cstdint>
#include <vector>

#include "usot/geometry.hpp"
#include "usot/grid.hpp"
#include "usot/prox.hpp"

namespace usot {

// Independent references used by tests and acceptance. Everything here is closed-form or
// brute-force and shares no iteration machinery with the solvers it checks.

// Truncated Gaussian on the unit interval / square: the pdf evaluated at cell centers,
// normalized so the discrete integral (sum * cell volume) equals `mass` exactly.
// 1D uses center.x; 2D is the product bump exp(-((x-cx)^2+(y-cy)^2)/(2 sigma^2)).
struct GaussianSpec {
  double x = 0.5, y = 0.5;
  double sigma = 0.1;
  double mass = 1.0;
};
std::vector<double> truncated_gaussian(const GridSpec& g, const GaussianSpec& spec);

double marginal_mass(const GridSpec& g, const std::vector<double>& density);

// Fisher-Rao geodesic between co-located densities: rho_t = (t sqrt(rho1) + (1-t) sqrt(rho0))^2,
// action = 4 sum (sqrt(rho1)-sqrt(rho0))^2 * vol. Throws on negative densities.
struct FrGeodesic {
  std::vector<double> density;
  double action = 0.0;
};
FrGeodesic fr_geodesic(const std::vector<double>& rho0, const std::vector<double>& rho1, double t,
                       double vol);

// m(t) = (1-t) m0 + t m1 - t(1-t) hk2, with hk2 the squared HK_{1,4} distance of the marginals.
double mass_curve(double m0, double m1, double hk2, double t);

// Squared 2-Wasserstein distance between equal-mass 1D histograms (piecewise-constant cell
// densities), by exact inverse-CDF matching. Throws if the masses differ by more than 1e-10.
double w2_1d(const GridSpec& g, const std::vector<double>& mu, const std::vector<double>& nu);

// Brute-force prox oracle: golden-section over rho with the closed-form inner minimizers,
// compared against the origin candidate. Independent of prox_J's fixed-point path.
CellState brute_prox(const CellState& cell, const ProxParams& p);

// Entropy-free two-Dirac HK^2 by scalar minimization over the single coupling mass:
// min_{p >= 0} p C(x0,x1) + lambda KL(p|a) + lambda KL(p|b), golden-section on p.
double hk2_two_dirac(double a, double b, const std::vector<double>& x0,
                     const std::vector<double>& x1, double alpha, double beta);

// Point on the cone geodesic between Diracs (a, x0) -> (b, x1): returns mass and position at
// parameter u in [0,1] of the constant-speed HK geodesic (valid below the cutoff angle).
struct ConePoint {
  double mass = 0.0;
  std::vector<double> x;
};
ConePoint cone_geodesic(double a, double b, const std::vector<double>& x0,
                        const std::vector<double>& x1, double alpha, double beta, double u);

// Deterministic synthetic stand-ins for the external datasets: a two-branch anchor cloud for
// distance-lift maps and a random row-stochastic kernel onto a 1D secondary grid.
std::vector<std::array<double, 2>> two_branch_anchors(int per_branch, uint64_t seed);
MarkovKernel random_markov_kernel(const GridSpec& primary, int secondary_cells, uint64_t seed);

}  // namespace usot
