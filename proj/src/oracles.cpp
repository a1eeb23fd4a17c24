#include "usot/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace usot {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kGolden = 0.61803398874989484820;

// golden-section minimizer of a unimodal function on [lo, hi]
template <typename F>
double golden_min(F&& f, double lo, double hi, int iters = 120) {
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::vector<double> truncated_gaussian(const GridSpec& g, const GaussianSpec& spec) {
  if (!(spec.sigma > 0)) throw std::invalid_argument("truncated_gaussian: sigma must be positive");
  std::vector<double> rho(static_cast<size_t>(g.spatial_cells()), 0.0);
  const double inv2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
  double sum = 0;
  for (int i = 0; i < g.M; ++i) {
    for (int j = 0; j < g.N; ++j) {
      double r2 = (g.xc(i) - spec.x) * (g.xc(i) - spec.x);
      if (g.dim == 2) r2 += (g.yc(j) - spec.y) * (g.yc(j) - spec.y);
      const double p = std::exp(-r2 * inv2s2);
      rho[static_cast<size_t>(i) * g.N + j] = p;
      sum += p;
    }
  }
  const double scale = spec.mass / (sum * g.spatial_volume());
  for (double& r : rho) r *= scale;
  return rho;
}

double marginal_mass(const GridSpec& g, const std::vector<double>& density) {
  double s = 0;
  for (double r : density) s += r;
  return s * g.spatial_volume();
}

FrGeodesic fr_geodesic(const std::vector<double>& rho0, const std::vector<double>& rho1, double t,
                       double vol) {
  if (rho0.size() != rho1.size()) throw std::invalid_argument("fr_geodesic: size mismatch");
  FrGeodesic out;
  out.density.resize(rho0.size());
  for (size_t i = 0; i < rho0.size(); ++i) {
    if (rho0[i] < 0 || rho1[i] < 0) throw std::invalid_argument("fr_geodesic: negative density");
    const double s0 = std::sqrt(rho0[i]), s1 = std::sqrt(rho1[i]);
    const double s = t * s1 + (1.0 - t) * s0;
    out.density[i] = s * s;
    out.action += (s1 - s0) * (s1 - s0);
  }
  out.action *= 4.0 * vol;
  return out;
}

double mass_curve(double m0, double m1, double hk2, double t) {
  return (1.0 - t) * m0 + t * m1 - t * (1.0 - t) * hk2;
}

double w2_1d(const GridSpec& g, const std::vector<double>& mu, const std::vector<double>& nu) {
  if (g.dim != 1) throw std::invalid_argument("w2_1d: 1d grids only");
  if ((int)mu.size() != g.M || (int)nu.size() != g.M)
    throw std::invalid_argument("w2_1d: marginal size mismatch");
  const double dx = g.dx();
  double ma = 0, mb = 0;
  for (double r : mu) {
    if (r < 0) throw std::invalid_argument("w2_1d: negative density");
    ma += r * dx;
  }
  for (double r : nu) {
    if (r < 0) throw std::invalid_argument("w2_1d: negative density");
    mb += r * dx;
  }
  if (std::abs(ma - mb) > 1e-10) throw std::invalid_argument("w2_1d: marginals must have equal mass");
  const double total = std::min(ma, mb);
  if (total <= 0) return 0.0;

  // positive cells with their prefix masses; Q(s) is linear inside each cell
  struct Seg {
    double s0, s1;    // mass interval
    double x0, slope; // Q(s) = x0 + slope (s - s0)
  };
  auto build = [&](const std::vector<double>& r) {
    std::vector<Seg> segs;
    double acc = 0;
    for (int i = 0; i < g.M; ++i) {
      if (r[i] <= 0) continue;
      const double w = r[i] * dx;
      segs.push_back({acc, acc + w, g.xc(i) - 0.5 * dx, 1.0 / r[i]});
      acc += w;
    }
    return segs;
  };
  const std::vector<Seg> A = build(mu), B = build(nu);

  double value = 0;
  size_t ia = 0, ib = 0;
  double s = 0;
  while (s < total && ia < A.size() && ib < B.size()) {
    while (ia < A.size() && A[ia].s1 <= s) ++ia;
    while (ib < B.size() && B[ib].s1 <= s) ++ib;
    if (ia >= A.size() || ib >= B.size()) break;
    const double s1 = std::min({A[ia].s1, B[ib].s1, total});
    if (s1 > s) {
      auto q = [&](const Seg& seg, double t) { return seg.x0 + seg.slope * (t - seg.s0); };
      auto d2 = [&](double t) {
        const double d = q(A[ia], t) - q(B[ib], t);
        return d * d;
      };
      // quadratic integrand: Simpson is exact
      const double mid = 0.5 * (s + s1);
      value += (s1 - s) / 6.0 * (d2(s) + 4.0 * d2(mid) + d2(s1));
    }
    s = s1;
  }
  return value;
}

CellState brute_prox(const CellState& cell, const ProxParams& p) {
  const double c = p.c;
  auto candidate = [&](double r) {
    CellState y;
    y.rho = r;
    if (p.dim == 2) {
      p.A.shifted_solve(2.0 * c * p.alpha, r, r * cell.mx, r * cell.my, y.mx, y.my);
    } else {
      y.mx = r * cell.mx / (2.0 * c * p.alpha * p.A.a11 + r);
      y.my = 0;
    }
    y.H = r * cell.H / (2.0 * c * p.beta + r);
    return y;
  };
  auto objective = [&](double r) {
    if (r <= 0) {
      return (cell.mx * cell.mx + cell.my * cell.my + cell.rho * cell.rho + cell.H * cell.H) /
             (2.0 * c);
    }
    const CellState y = candidate(r);
    const double quad = p.dim == 2 ? p.A.quad(y.mx, y.my) : p.A.a11 * y.mx * y.mx;
    const double J = (p.alpha * quad + p.beta * y.H * y.H) / r;
    const double dmx = y.mx - cell.mx, dmy = y.my - cell.my;
    const double dr = r - cell.rho, dH = y.H - cell.H;
    return J + (dmx * dmx + dmy * dmy + dr * dr + dH * dH) / (2.0 * c);
  };

  // bracket the minimum of the (convex) reduced objective, then golden-section
  double hi = std::max(1.0, 2.0 * std::abs(cell.rho));
  for (int it = 0; it < 200 && objective(hi) < objective(0.5 * hi); ++it) hi *= 2.0;
  const double r_best = golden_min(objective, 0.0, hi, 200);

  CellState best{};  // origin candidate
  double best_val = objective(0.0);
  for (double r : {r_best, std::max(0.0, cell.rho)}) {
    if (r > 0 && objective(r) < best_val) {
      best_val = objective(r);
      best = candidate(r);
    }
  }
  return best;
}

double hk2_two_dirac(double a, double b, const std::vector<double>& x0,
                     const std::vector<double>& x1, double alpha, double beta) {
  if (a < 0 || b < 0) throw std::invalid_argument("hk2_two_dirac: negative masses");
  if (x0.size() != x1.size()) throw std::invalid_argument("hk2_two_dirac: dimension mismatch");
  const double lambda = 4.0 / beta;
  if (a == 0 || b == 0) return lambda * (a + b);
  double d2 = 0;
  for (size_t i = 0; i < x0.size(); ++i) d2 += (x0[i] - x1[i]) * (x0[i] - x1[i]);
  const double s = std::sqrt(beta / (4.0 * alpha)) * std::sqrt(d2);
  if (s >= kPi / 2) return lambda * (a + b);
  const double C = -2.0 * lambda * std::log(std::cos(s));

  auto kl = [](double q, double m) { return q > 0 ? q * std::log(q / m) - q + m : m; };
  auto F = [&](double q) { return q * C + lambda * (kl(q, a) + kl(q, b)); };
  const double q_best = golden_min(F, 0.0, std::sqrt(a * b), 200);
  return std::min(F(q_best), F(0.0));
}

ConePoint cone_geodesic(double a, double b, const std::vector<double>& x0,
                        const std::vector<double>& x1, double alpha, double beta, double u) {
  if (x0.size() != x1.size()) throw std::invalid_argument("cone_geodesic: dimension mismatch");
  double d2 = 0;
  for (size_t i = 0; i < x0.size(); ++i) d2 += (x0[i] - x1[i]) * (x0[i] - x1[i]);
  const double theta = std::sqrt(beta / (4.0 * alpha)) * std::sqrt(d2);
  if (theta >= kPi / 2)
    throw std::invalid_argument("cone_geodesic: endpoints at or beyond the cone cutoff");
  // chord in the flat cone chart: z(u) = (1-u) sqrt(a) + u sqrt(b) e^{i theta}
  const double zx = (1.0 - u) * std::sqrt(a) + u * std::sqrt(b) * std::cos(theta);
  const double zy = u * std::sqrt(b) * std::sin(theta);
  ConePoint out;
  out.mass = zx * zx + zy * zy;
  const double phi = out.mass > 0 ? std::atan2(zy, zx) : 0.0;
  const double frac = theta > 0 ? phi / theta : 0.0;
  out.x.resize(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) out.x[i] = x0[i] + frac * (x1[i] - x0[i]);
  return out;
}

std::vector<std::array<double, 2>> two_branch_anchors(int per_branch, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::vector<std::array<double, 2>> pts;
  pts.reserve(2 * static_cast<size_t>(per_branch));
  for (int br = 0; br < 2; ++br) {
    for (int i = 0; i < per_branch; ++i) {
      const double t = (i + 0.5) / per_branch;
      const double y = br == 0 ? 0.3 + 0.2 * std::sin(kPi * t) : 0.7 - 0.2 * std::sin(kPi * t);
      pts.push_back({std::clamp(t + jitter(rng), 0.0, 1.0), std::clamp(y + jitter(rng), 0.0, 1.0)});
    }
  }
  return pts;
}

MarkovKernel random_markov_kernel(const GridSpec& primary, int secondary_cells, uint64_t seed) {
  if (secondary_cells < 1) throw std::invalid_argument("random_markov_kernel: need >= 1 columns");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  MarkovKernel K;
  K.rows = primary.spatial_cells();
  K.cols = secondary_cells;
  K.n_out = 1;
  K.cell_volume = primary.spatial_volume();
  K.support.resize(secondary_cells);
  for (int j = 0; j < secondary_cells; ++j) K.support[j] = {(j + 0.5) / secondary_cells, 0.0, 0.0};
  K.P.resize(static_cast<size_t>(K.rows) * K.cols);
  for (int i = 0; i < K.rows; ++i) {
    const double x = primary.xc(i / primary.N);
    double sum = 0;
    for (int j = 0; j < K.cols; ++j) {
      const double d = x - K.support[j][0];
      // localized random rows keep the pushed curves moving instead of smearing flat
      const double w = u(rng) * std::exp(-d * d / (2.0 * 0.15 * 0.15));
      K.P[static_cast<size_t>(i) * K.cols + j] = w;
      sum += w;
    }
    for (int j = 0; j < K.cols; ++j) K.P[static_cast<size_t>(i) * K.cols + j] /= sum;
  }
  return K;
}

}  // namespace usot
