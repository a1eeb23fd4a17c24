#include "usot/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace usot {

namespace {

void put_u32(std::string& buf, uint32_t v) {
  char b[4];
  b[0] = char(v & 0xff);
  b[1] = char((v >> 8) & 0xff);
  b[2] = char((v >> 16) & 0xff);
  b[3] = char((v >> 24) & 0xff);
  buf.append(b, 4);
}

uint32_t get_u32(const std::string& buf, size_t off) {
  if (off + 4 > buf.size()) throw std::runtime_error("container truncated");
  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data() + off);
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

void put_f64(std::string& buf, const double* v, size_t n) {
  static_assert(sizeof(double) == 8, "f64 container needs 8-byte doubles");
  buf.append(reinterpret_cast<const char*>(v), n * 8);
}

void get_f64(const std::string& buf, size_t off, double* v, size_t n) {
  if (off + 8 * n > buf.size()) throw std::runtime_error("container truncated");
  std::memcpy(v, buf.data() + off, 8 * n);
}

std::string header_usot(int dim, int M, int N, int Q, int channels) {
  std::string h = "USOT0001";
  put_u32(h, uint32_t(dim));
  put_u32(h, uint32_t(M));
  put_u32(h, uint32_t(N));
  put_u32(h, uint32_t(Q));
  put_u32(h, uint32_t(channels));
  for (int r = 0; r < 3; ++r) put_u32(h, 0);
  h.resize(64, '\0');
  return h;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out.write(content.data(), std::streamsize(content.size()));
    if (!out) throw std::runtime_error("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

void write_trajectory(const std::string& path, const GridSpec& g, const StaggeredField& U,
                      const CenteredField& H) {
  const int channels = g.dim == 2 ? 4 : 3;
  std::string buf = header_usot(g.dim, g.M, g.N, g.Q, channels);
  put_f64(buf, U.rho.data(), U.rho.size());
  put_f64(buf, U.m.data(), U.m.size());
  if (g.dim == 2) put_f64(buf, U.n.data(), U.n.size());
  put_f64(buf, H.data(), H.size());
  atomic_write(path, buf);
}

Trajectory read_trajectory(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 64 || buf.compare(0, 8, "USOT0001") != 0)
    throw std::runtime_error("not a USOT0001 container: " + path);
  Trajectory t;
  t.g.dim = int(get_u32(buf, 8));
  t.g.M = int(get_u32(buf, 12));
  t.g.N = int(get_u32(buf, 16));
  t.g.Q = int(get_u32(buf, 20));
  const int channels = int(get_u32(buf, 24));
  t.g.validate();
  if (channels != (t.g.dim == 2 ? 4 : 3))
    throw std::runtime_error("trajectory channel count mismatch: " + path);
  t.rho = Field3(t.g.M, t.g.N, t.g.Q + 1);
  t.m = Field3(t.g.M + 1, t.g.N, t.g.Q);
  if (t.g.dim == 2) t.n = Field3(t.g.M, t.g.N + 1, t.g.Q);
  t.H = Field3(t.g.M, t.g.N, t.g.Q);
  size_t off = 64;
  get_f64(buf, off, t.rho.data(), t.rho.size());
  off += 8 * t.rho.size();
  get_f64(buf, off, t.m.data(), t.m.size());
  off += 8 * t.m.size();
  if (t.g.dim == 2) {
    get_f64(buf, off, t.n.data(), t.n.size());
    off += 8 * t.n.size();
  }
  get_f64(buf, off, t.H.data(), t.H.size());
  off += 8 * t.H.size();
  if (off != buf.size()) throw std::runtime_error("trailing bytes in container: " + path);
  return t;
}

void write_density(const std::string& path, int dim, int M, int N,
                   const std::vector<double>& rho) {
  if ((int)rho.size() != M * N) throw std::runtime_error("density size mismatch: " + path);
  std::string buf = header_usot(dim, M, N, 0, 1);
  put_f64(buf, rho.data(), rho.size());
  atomic_write(path, buf);
}

DensityFile read_density(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 64 || buf.compare(0, 8, "USOT0001") != 0)
    throw std::runtime_error("not a USOT0001 container: " + path);
  DensityFile d;
  d.dim = int(get_u32(buf, 8));
  d.M = int(get_u32(buf, 12));
  d.N = int(get_u32(buf, 16));
  const int Q = int(get_u32(buf, 20));
  const int channels = int(get_u32(buf, 24));
  if (Q != 0 || channels != 1) throw std::runtime_error("not a density container: " + path);
  if (d.dim < 1 || d.dim > 2 || d.M < 1 || d.N < 1)
    throw std::runtime_error("bad density dimensions: " + path);
  d.rho.resize(size_t(d.M) * d.N);
  get_f64(buf, 64, d.rho.data(), d.rho.size());
  if (64 + 8 * d.rho.size() != buf.size())
    throw std::runtime_error("trailing bytes in container: " + path);
  return d;
}

void write_kernel(const std::string& path, const MarkovKernel& K) {
  std::string buf = "USOTKRN1";
  put_u32(buf, uint32_t(K.rows));
  put_u32(buf, uint32_t(K.cols));
  put_u32(buf, uint32_t(K.n_out));
  put_u32(buf, K.identity ? 1 : 0);
  put_f64(buf, &K.cell_volume, 1);
  for (const auto& s : K.support) put_f64(buf, s.data(), 3);
  if (!K.identity) put_f64(buf, K.P.data(), K.P.size());
  atomic_write(path, buf);
}

MarkovKernel read_kernel(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 8 || buf.compare(0, 8, "USOTKRN1") != 0)
    throw std::runtime_error("not a USOTKRN1 container: " + path);
  MarkovKernel K;
  K.rows = int(get_u32(buf, 8));
  K.cols = int(get_u32(buf, 12));
  K.n_out = int(get_u32(buf, 16));
  K.identity = get_u32(buf, 20) != 0;
  if (K.rows < 1 || K.cols < 1) throw std::runtime_error("bad kernel dimensions: " + path);
  if (K.identity && K.rows != K.cols)
    throw std::runtime_error("identity kernel must be square: " + path);
  size_t off = 24;
  get_f64(buf, off, &K.cell_volume, 1);
  off += 8;
  K.support.resize(K.cols);
  for (auto& s : K.support) {
    get_f64(buf, off, s.data(), 3);
    off += 24;
  }
  if (!K.identity) {
    K.P.resize(size_t(K.rows) * K.cols);
    get_f64(buf, off, K.P.data(), K.P.size());
    off += 8 * K.P.size();
  }
  if (off != buf.size()) throw std::runtime_error("trailing bytes in container: " + path);
  K.validate_rows();
  return K;
}

void write_masses_csv(const std::string& path, const GridSpec& g,
                      const std::vector<double>& mass) {
  std::string buf = "k,t,mass\n";
  char line[80];
  for (size_t k = 0; k < mass.size(); ++k) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", k, g.ts(int(k)), mass[k]);
    buf += line;
  }
  atomic_write(path, buf);
}

std::pair<double, double> write_pgm(const std::string& path, const GridSpec& g,
                                    const std::vector<double>& slice) {
  if ((int)slice.size() != g.spatial_cells()) throw std::runtime_error("pgm slice size mismatch");
  const double lo = *std::min_element(slice.begin(), slice.end());
  const double hi = *std::max_element(slice.begin(), slice.end());
  const double span = hi - lo;
  char head[64];
  std::snprintf(head, sizeof head, "P5\n%d %d\n255\n", g.M, g.N);
  std::string buf = head;
  for (int r = 0; r < g.N; ++r) {
    const int j = g.N - 1 - r;
    for (int i = 0; i < g.M; ++i) {
      const double v = slice[size_t(i) * g.N + j];
      const int b = span > 0 ? int(std::lround(255.0 * (v - lo) / span)) : 0;
      buf.push_back(char(std::clamp(b, 0, 255)));
    }
  }
  atomic_write(path, buf);
  return {lo, hi};
}

}  // namespace usot
