#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "usot/grid.hpp"

namespace usot::testing {

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline double urand(std::mt19937_64& r, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(r);
}

inline void fill_random(Field3& f, std::mt19937_64& r, double lo = -1.0, double hi = 1.0) {
  for (double& v : f.v) v = urand(r, lo, hi);
}

inline GridSpec grid1(int M, int Q) {
  GridSpec g;
  g.dim = 1;
  g.M = M;
  g.N = 1;
  g.Q = Q;
  g.validate();
  return g;
}

inline GridSpec grid2(int M, int N, int Q) {
  GridSpec g;
  g.dim = 2;
  g.M = M;
  g.N = N;
  g.Q = Q;
  g.validate();
  return g;
}

// gaussian-ish bump evaluated on cell centers, strictly positive
inline std::vector<double> bump_density(const GridSpec& g, double cx, double cy, double sigma,
                                        double mass, double floor_frac = 0.0) {
  std::vector<double> rho(static_cast<size_t>(g.spatial_cells()));
  double sum = 0;
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      const double dx = g.xc(i) - cx;
      const double dy = g.dim == 2 ? g.yc(j) - cy : 0.0;
      const double v = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) + floor_frac;
      rho[static_cast<size_t>(i) * g.N + j] = v;
      sum += v;
    }
  const double scale = mass / (sum * g.spatial_volume());
  for (double& v : rho) v *= scale;
  return rho;
}

}  // namespace usot::testing
