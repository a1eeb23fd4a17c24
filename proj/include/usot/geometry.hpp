#pragma once

#include <array>

#include "usot/grid.hpp"
#include "usot/prox.hpp"

namespace usot {

// Static map T: X -> R^{n_out} from the primary domain into the secondary space.
// Builtins carry analytic Jacobians; sampled maps carry per-cell values and either
// supplied Jacobian columns or central finite differences (one-sided at the boundary).
struct MapSpec {
  enum class Kind { identity, gaussian_bump, sine, distance_lift, sampled };
  Kind kind = Kind::identity;

  // gaussian_bump: (x[,y], amp*exp(-|x-center|^2/(2 sigma^2)))
  double amp = 1.0;
  double sigma = 0.15;
  std::array<double, 2> center{0.5, 0.5};
  // distance_lift: (x[,y], lift_scale * dist((x,y), anchor points))
  double lift_scale = 10.0;
  std::vector<std::array<double, 2>> anchors;

  // sampled: values[a][cell], a < n_out, cell = i*N+j; optional jacobian
  // jac[a*dim + d][cell] = dT_a/dx_d
  int n_out = 0;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> jac;

  int output_dim(int dim) const;
};

// T at the spatial cell centers; out[cell][a], padded with 0 above n_out
std::vector<std::array<double, 3>> map_points(const MapSpec& map, const GridSpec& g);

// Jacobian channels over the spatial cells: J[a*dim + d][cell] = dT_a/dx_d
std::vector<std::vector<double>> jacobian(const MapSpec& map, const GridSpec& g);

// A = c1 I + c2 (grad T)^T (grad T) per spatial cell; (c1,c2) normalized to c1+c2=1
struct MetricField {
  GridSpec g;
  double c1 = 1, c2 = 0;
  std::vector<SymMat2> A;  // size M*N
  double lambda_min = 0, lambda_max = 0;
};
MetricField build_metric(const MapSpec& map, const GridSpec& g, double c1, double c2);

// Row-stochastic kernel from the M*N primary cells onto `cols` secondary support
// points. P is dense row-major, or empty with identity=true (applied implicitly).
struct MarkovKernel {
  int rows = 0, cols = 0;
  bool identity = false;
  std::vector<double> P;
  std::vector<std::array<double, 3>> support;
  int n_out = 0;
  double cell_volume = 1;  // spatial volume weight used by kernel_apply

  void validate_rows();  // renormalizes rows within 1e-12, throws on a zero row
};

// identity kernel; support = map(cell centers) (identity map when map == nullptr)
MarkovKernel identity_kernel(const GridSpec& g, const MapSpec* map);

// row-normalize a nonnegative coupling matrix into a kernel; throws naming the row
// if a row has zero mass
MarkovKernel kernel_from_coupling(const std::vector<double>& coupling, int rows, int cols,
                                  std::vector<std::array<double, 3>> support, int n_out,
                                  double cell_volume);

// xi_j = sum_i rho_i P_ij * cell_volume  (pushforward of the grid masses)
std::vector<double> kernel_apply(const MarkovKernel& K, const double* rho);
// (T_K^* phi)_i = sum_j P_ij phi_j
std::vector<double> kernel_adjoint_apply(const MarkovKernel& K, const double* phi);

}  // namespace usot
