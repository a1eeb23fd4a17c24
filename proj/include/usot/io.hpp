#pragma once

#include <string>
#include <utility>
#include <vector>

#include "usot/geometry.hpp"
#include "usot/grid.hpp"

namespace usot {

// Binary container layout (little-endian hosts): 64-byte header = magic "USOT0001",
// u32 dim, M, N, Q, channels, three reserved u32 (zero), zero padding to 64; then the
// f64 payload per channel in order rho_s, m_s, n_s (dim 2 only), H_c, each flattened
// (i * ny + j) * nz + k. A pure spatial density reuses the container with Q = 0 and a
// single channel of M*N values.

struct Trajectory {
  GridSpec g;
  Field3 rho;  // M x N x (Q+1)
  Field3 m;    // (M+1) x N x Q
  Field3 n;    // M x (N+1) x Q, dim 2 only
  Field3 H;    // M x N x Q
};

void write_trajectory(const std::string& path, const GridSpec& g, const StaggeredField& U,
                      const CenteredField& H);
Trajectory read_trajectory(const std::string& path);

void write_density(const std::string& path, int dim, int M, int N, const std::vector<double>& rho);
struct DensityFile {
  int dim = 1, M = 0, N = 1;
  std::vector<double> rho;
};
DensityFile read_density(const std::string& path);

// kernel container: magic "USOTKRN1", u32 rows, cols, n_out, identity flag, f64
// cell_volume, support points (cols x 3 f64), then P (rows x cols f64) unless identity
void write_kernel(const std::string& path, const MarkovKernel& K);
MarkovKernel read_kernel(const std::string& path);

void write_masses_csv(const std::string& path, const GridSpec& g, const std::vector<double>& mass);

// 8-bit binary PGM, per-frame min-max normalized; returns the (lo, hi) range used.
// Pixel (row r, col c) = cell (i = c, j = N-1-r) so y points up; 1d grids give height 1.
std::pair<double, double> write_pgm(const std::string& path, const GridSpec& g,
                                    const std::vector<double>& slice);

// all writes go through a temp file + rename in the target directory
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace usot
