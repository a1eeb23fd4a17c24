#include "usot/geometry.hpp"

#include <cmath>

namespace usot {

int MapSpec::output_dim(int dim) const {
  switch (kind) {
    case Kind::identity: return dim;
    case Kind::gaussian_bump:
    case Kind::sine:
    case Kind::distance_lift: return dim + 1;
    case Kind::sampled: return n_out;
  }
  return dim;
}

namespace {

double bump(const MapSpec& m, double x, double y, int dim) {
  double r2 = (x - m.center[0]) * (x - m.center[0]);
  if (dim == 2) r2 += (y - m.center[1]) * (y - m.center[1]);
  return m.amp * std::exp(-r2 / (2 * m.sigma * m.sigma));
}

double dist_to_anchors(const MapSpec& m, double x, double y, int dim, int* arg = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  int bi = -1;
  for (size_t a = 0; a < m.anchors.size(); ++a) {
    const double dx = x - m.anchors[a][0];
    const double dy = dim == 2 ? y - m.anchors[a][1] : 0.0;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d < best) {
      best = d;
      bi = static_cast<int>(a);
    }
  }
  if (arg) *arg = bi;
  return best;
}

}  // namespace

std::vector<std::array<double, 3>> map_points(const MapSpec& map, const GridSpec& g) {
  const int n = map.output_dim(g.dim);
  if (n > 3) throw std::invalid_argument("map_points: n_out > 3 unsupported");
  if (map.kind == MapSpec::Kind::distance_lift && map.anchors.empty())
    throw std::invalid_argument("map_points: distance_lift needs anchor points");
  std::vector<std::array<double, 3>> pts(static_cast<size_t>(g.spatial_cells()),
                                         {0.0, 0.0, 0.0});
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      const double x = g.xc(i), y = g.yc(j);
      auto& p = pts[static_cast<size_t>(i) * g.N + j];
      switch (map.kind) {
        case MapSpec::Kind::identity:
          p[0] = x;
          if (g.dim == 2) p[1] = y;
          break;
        case MapSpec::Kind::gaussian_bump:
          p[0] = x;
          if (g.dim == 2) p[1] = y;
          p[g.dim] = bump(map, x, y, g.dim);
          break;
        case MapSpec::Kind::sine:
          p[0] = x;
          if (g.dim == 2) p[1] = y;
          p[g.dim] = g.dim == 2 ? map.amp * std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y)
                                : map.amp * std::sin(2 * M_PI * x);
          break;
        case MapSpec::Kind::distance_lift:
          p[0] = x;
          if (g.dim == 2) p[1] = y;
          p[g.dim] = map.lift_scale * dist_to_anchors(map, x, y, g.dim);
          break;
        case MapSpec::Kind::sampled:
          for (int a = 0; a < n; ++a)
            p[a] = map.values.at(a)[static_cast<size_t>(i) * g.N + j];
          break;
      }
    }
  return pts;
}

std::vector<std::vector<double>> jacobian(const MapSpec& map, const GridSpec& g) {
  const int n = map.output_dim(g.dim), d = g.dim;
  const int sc = g.spatial_cells();
  std::vector<std::vector<double>> J(static_cast<size_t>(n) * d,
                                     std::vector<double>(sc, 0.0));
  auto at = [&](int a, int dd) -> std::vector<double>& { return J[a * d + dd]; };

  if (map.kind == MapSpec::Kind::sampled) {
    if (!map.jac.empty()) {
      if (static_cast<int>(map.jac.size()) != n * d)
        throw std::invalid_argument("jacobian: supplied jac has wrong channel count");
      for (int a = 0; a < n * d; ++a) J[a] = map.jac[a];
      return J;
    }
    // central differences, one-sided at the boundary, step = grid spacing
    auto val = [&](int a, int i, int j) { return map.values[a][static_cast<size_t>(i) * g.N + j]; };
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < g.M; ++i)
        for (int j = 0; j < g.N; ++j) {
          const size_t cell = static_cast<size_t>(i) * g.N + j;
          {
            const int il = std::max(i - 1, 0), ir = std::min(i + 1, g.M - 1);
            at(a, 0)[cell] = (val(a, ir, j) - val(a, il, j)) / ((ir - il) * g.dx());
          }
          if (d == 2) {
            const int jl = std::max(j - 1, 0), jr = std::min(j + 1, g.N - 1);
            at(a, 1)[cell] = (val(a, i, jr) - val(a, i, jl)) / ((jr - jl) * g.dy());
          }
        }
    return J;
  }

  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      const size_t cell = static_cast<size_t>(i) * g.N + j;
      const double x = g.xc(i), y = g.yc(j);
      // first d outputs are the identity part for every builtin
      for (int a = 0; a < d; ++a)
        for (int dd = 0; dd < d; ++dd) at(a, dd)[cell] = a == dd ? 1.0 : 0.0;
      switch (map.kind) {
        case MapSpec::Kind::identity: break;
        case MapSpec::Kind::gaussian_bump: {
          const double b = bump(map, x, y, d);
          at(d, 0)[cell] = -b * (x - map.center[0]) / (map.sigma * map.sigma);
          if (d == 2) at(d, 1)[cell] = -b * (y - map.center[1]) / (map.sigma * map.sigma);
          break;
        }
        case MapSpec::Kind::sine: {
          if (d == 2) {
            at(d, 0)[cell] = map.amp * 2 * M_PI * std::cos(2 * M_PI * x) * std::sin(2 * M_PI * y);
            at(d, 1)[cell] = map.amp * 2 * M_PI * std::sin(2 * M_PI * x) * std::cos(2 * M_PI * y);
          } else {
            at(d, 0)[cell] = map.amp * 2 * M_PI * std::cos(2 * M_PI * x);
          }
          break;
        }
        case MapSpec::Kind::distance_lift: {
          int ai = -1;
          const double dist = dist_to_anchors(map, x, y, d, &ai);
          if (dist > 0) {  // gradient of min-distance, valid a.e.
            at(d, 0)[cell] = map.lift_scale * (x - map.anchors[ai][0]) / dist;
            if (d == 2) at(d, 1)[cell] = map.lift_scale * (y - map.anchors[ai][1]) / dist;
          }
          break;
        }
        case MapSpec::Kind::sampled: break;  // handled above
      }
    }
  return J;
}

MetricField build_metric(const MapSpec& map, const GridSpec& g, double c1, double c2) {
  if (!(c1 > 0) || c2 < 0) throw std::invalid_argument("build_metric: need c1>0, c2>=0");
  const double s = c1 + c2;
  c1 /= s;
  c2 /= s;
  MetricField M;
  M.g = g;
  M.c1 = c1;
  M.c2 = c2;
  const int n = map.output_dim(g.dim), d = g.dim;
  auto J = jacobian(map, g);
  M.A.resize(g.spatial_cells());
  M.lambda_min = std::numeric_limits<double>::infinity();
  M.lambda_max = 0;
  for (int cell = 0; cell < g.spatial_cells(); ++cell) {
    // (grad T)^T (grad T), d x d with entries sum_a dT_a/dx_p dT_a/dx_q
    double g11 = 0, g12 = 0, g22 = 0;
    for (int a = 0; a < n; ++a) {
      const double jx = J[a * d + 0][cell];
      const double jy = d == 2 ? J[a * d + 1][cell] : 0.0;
      g11 += jx * jx;
      g12 += jx * jy;
      g22 += jy * jy;
    }
    SymMat2 A;
    A.a11 = c1 + c2 * g11;
    A.a12 = c2 * g12;
    A.a22 = d == 2 ? c1 + c2 * g22 : 1.0;
    M.A[cell] = A;
    const double lmin = d == 2 ? A.lambda_min() : A.a11;
    const double lmax = d == 2 ? A.lambda_max() : A.a11;
    M.lambda_min = std::min(M.lambda_min, lmin);
    M.lambda_max = std::max(M.lambda_max, lmax);
  }
  if (!(M.lambda_min >= c1 - 1e-12))
    throw std::runtime_error("build_metric: metric lost positive definiteness");
  return M;
}

void MarkovKernel::validate_rows() {
  if (identity) return;
  for (int i = 0; i < rows; ++i) {
    double s = 0;
    for (int j = 0; j < cols; ++j) s += P[static_cast<size_t>(i) * cols + j];
    if (!(s > 0))
      throw std::invalid_argument("MarkovKernel: row " + std::to_string(i) + " has zero mass");
    if (std::abs(s - 1.0) > 1e-12)
      for (int j = 0; j < cols; ++j) P[static_cast<size_t>(i) * cols + j] /= s;
  }
}

MarkovKernel identity_kernel(const GridSpec& g, const MapSpec* map) {
  MarkovKernel K;
  K.rows = K.cols = g.spatial_cells();
  K.identity = true;
  K.cell_volume = g.spatial_volume();
  MapSpec id;  // identity map fallback
  const MapSpec& m = map ? *map : id;
  K.support = map_points(m, g);
  K.n_out = m.output_dim(g.dim);
  return K;
}

MarkovKernel kernel_from_coupling(const std::vector<double>& coupling, int rows, int cols,
                                  std::vector<std::array<double, 3>> support, int n_out,
                                  double cell_volume) {
  if (static_cast<size_t>(rows) * cols != coupling.size())
    throw std::invalid_argument("kernel_from_coupling: size mismatch");
  if (static_cast<int>(support.size()) != cols)
    throw std::invalid_argument("kernel_from_coupling: support size mismatch");
  MarkovKernel K;
  K.rows = rows;
  K.cols = cols;
  K.P = coupling;
  K.support = std::move(support);
  K.n_out = n_out;
  K.cell_volume = cell_volume;
  for (int i = 0; i < rows; ++i) {
    double s = 0;
    for (int j = 0; j < cols; ++j) s += K.P[static_cast<size_t>(i) * cols + j];
    if (!(s > 0))
      throw std::invalid_argument("kernel_from_coupling: row " + std::to_string(i) +
                                  " of the coupling has zero mass");
    for (int j = 0; j < cols; ++j) K.P[static_cast<size_t>(i) * cols + j] /= s;
  }
  return K;
}

std::vector<double> kernel_apply(const MarkovKernel& K, const double* rho) {
  std::vector<double> xi(K.cols, 0.0);
  if (K.identity) {
    for (int i = 0; i < K.rows; ++i) xi[i] = rho[i] * K.cell_volume;
    return xi;
  }
  for (int i = 0; i < K.rows; ++i) {
    const double w = rho[i] * K.cell_volume;
    const double* row = &K.P[static_cast<size_t>(i) * K.cols];
    for (int j = 0; j < K.cols; ++j) xi[j] += w * row[j];
  }
  return xi;
}

std::vector<double> kernel_adjoint_apply(const MarkovKernel& K, const double* phi) {
  std::vector<double> out(K.rows, 0.0);
  if (K.identity) {
    for (int i = 0; i < K.rows; ++i) out[i] = phi[i];
    return out;
  }
  for (int i = 0; i < K.rows; ++i) {
    const double* row = &K.P[static_cast<size_t>(i) * K.cols];
    double s = 0;
    for (int j = 0; j < K.cols; ++j) s += row[j] * phi[j];
    out[i] = s;
  }
  return out;
}

}  // namespace usot
