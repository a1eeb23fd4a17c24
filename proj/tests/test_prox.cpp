#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "usot/oracles.hpp"
#include "usot/prox.hpp"

using namespace usot;
using namespace usot::testing;

namespace {

CellState random_cell(std::mt19937_64& r, int dim) {
  CellState x;
  x.mx = urand(r, -3, 3);
  x.my = dim == 2 ? urand(r, -3, 3) : 0.0;
  x.rho = urand(r, -2, 3);
  x.H = urand(r, -3, 3);
  return x;
}

SymMat2 random_spd(std::mt19937_64& r) {
  // c1 I + c2 v v^T with c1 > 0: the exact structure build_metric produces
  const double c1 = urand(r, 0.2, 1.0);
  const double c2 = urand(r, 0.0, 2.0);
  const double vx = urand(r, -1, 1), vy = urand(r, -1, 1);
  return SymMat2{c1 + c2 * vx * vx, c2 * vx * vy, c1 + c2 * vy * vy};
}

ProxParams params(int dim, double c, const SymMat2& A, double alpha = 1.3, double beta = 0.7) {
  ProxParams p;
  p.dim = dim;
  p.alpha = alpha;
  p.beta = beta;
  p.A = A;
  p.c = c;
  return p;
}

double dist2(const CellState& a, const CellState& b) {
  const double dm = a.mx - b.mx, dn = a.my - b.my, dr = a.rho - b.rho, dh = a.H - b.H;
  return dm * dm + dn * dn + dr * dr + dh * dh;
}

double inner(const CellState& a, const CellState& b) {
  return a.mx * b.mx + a.my * b.my + a.rho * b.rho + a.H * b.H;
}

}  // namespace

TEST_CASE("eval_J matches the closed form and its domain") {
  ProxParams p = params(2, 1.0, SymMat2{2, 0.5, 1.5});
  CellState x{1.0, -2.0, 0.5, 3.0};
  const double expect = (p.alpha * p.A.quad(x.mx, x.my) + p.beta * x.H * x.H) / x.rho;
  CHECK(eval_J(x, p) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(eval_J(CellState{}, p) == 0.0);
  CHECK(std::isinf(eval_J(CellState{0, 0, -0.1, 0}, p)));
  CHECK(std::isinf(eval_J(CellState{1, 0, 0, 0}, p)));
}

TEST_CASE("phi is strictly decreasing in r") {
  auto r = rng(21);
  for (int t = 0; t < 50; ++t) {
    const int dim = t % 2 ? 2 : 1;
    ProxParams p = params(dim, urand(r, 0.1, 10), dim == 2 ? random_spd(r) : SymMat2{});
    const CellState x = random_cell(r, dim);
    if (x.mx == 0 && x.my == 0 && x.H == 0) continue;
    double prev = phi(0.0, x, p);
    for (double rr : {0.3, 1.0, 4.0, 20.0}) {
      const double cur = phi(rr, x, p);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("prox_J agrees with the brute-force oracle") {
  auto r = rng(99);
  for (double c : {0.1, 1.0, 10.0}) {
    for (int dim : {1, 2}) {
      for (int t = 0; t < 60; ++t) {
        ProxParams p = params(dim, c, dim == 2 ? random_spd(r) : SymMat2{});
        const CellState x = random_cell(r, dim);
        const CellState y = prox_J(x, p).y;
        const CellState yb = brute_prox(x, p);
        const double fy = eval_J(y, p) + dist2(y, x) / (2 * c);
        const double fb = eval_J(yb, p) + dist2(yb, x) / (2 * c);
        CHECK(fy <= fb + 1e-8 * (1 + std::abs(fb)));
      }
    }
  }
}

TEST_CASE("prox_J satisfies the stationarity conditions") {
  auto r = rng(123);
  int positive = 0;
  for (int t = 0; t < 300; ++t) {
    const int dim = t % 2 ? 2 : 1;
    ProxParams p = params(dim, urand(r, 0.2, 5), dim == 2 ? random_spd(r) : SymMat2{});
    const CellState x = random_cell(r, dim);
    const CellState y = prox_J(x, p).y;
    if (y.rho <= 0) {
      // origin branch: admissible iff phi(0) <= 0 (subgradient condition)
      CHECK(phi(0.0, x, p) <= 1e-9);
      continue;
    }
    ++positive;
    // grad J at y: m: 2 alpha A m / rho, rho: -(alpha m^T A m + beta H^2)/rho^2, H: 2 beta H / rho
    const double Amx = p.A.a11 * y.mx + p.A.a12 * y.my;
    const double Amy = p.A.a12 * y.mx + p.A.a22 * y.my;
    const double gm = 2 * p.alpha * Amx / y.rho;
    const double gn = dim == 2 ? 2 * p.alpha * Amy / y.rho : 0.0;
    const double gr = -(p.alpha * p.A.quad(y.mx, y.my) + p.beta * y.H * y.H) / (y.rho * y.rho);
    const double gh = 2 * p.beta * y.H / y.rho;
    const double scale = 1 + std::abs(x.mx) + std::abs(x.rho) + std::abs(x.H);
    CHECK(std::abs(y.mx - x.mx + p.c * gm) <= 1e-8 * scale);
    if (dim == 2) CHECK(std::abs(y.my - x.my + p.c * gn) <= 1e-8 * scale);
    CHECK(std::abs(y.rho - x.rho + p.c * gr) <= 1e-8 * scale);
    CHECK(std::abs(y.H - x.H + p.c * gh) <= 1e-8 * scale);
  }
  CHECK(positive > 50);
}

TEST_CASE("prox_J is firmly nonexpansive") {
  auto r = rng(77);
  for (int t = 0; t < 200; ++t) {
    const int dim = t % 2 ? 2 : 1;
    ProxParams p = params(dim, urand(r, 0.2, 5), dim == 2 ? random_spd(r) : SymMat2{});
    const CellState x = random_cell(r, dim);
    const CellState z = random_cell(r, dim);
    const CellState px = prox_J(x, p).y;
    const CellState pz = prox_J(z, p).y;
    const CellState dp{px.mx - pz.mx, px.my - pz.my, px.rho - pz.rho, px.H - pz.H};
    const CellState dx{x.mx - z.mx, x.my - z.my, x.rho - z.rho, x.H - z.H};
    CHECK(inner(dp, dp) <= inner(dp, dx) + 1e-9);
  }
}

TEST_CASE("conjugate prox projects onto a sigma-independent set") {
  // J is positively 1-homogeneous, so J* is an indicator and prox_{sigma J*} is the
  // projection onto {(a,b,c): b + <a,(4 alpha A)^{-1} a> + c^2/(4 beta) <= 0}
  auto r = rng(31);
  for (int t = 0; t < 100; ++t) {
    const int dim = t % 2 ? 2 : 1;
    const SymMat2 A = dim == 2 ? random_spd(r) : SymMat2{};
    ProxParams p = params(dim, 1.0, A);
    const CellState x = random_cell(r, dim);

    const CellState y1 = prox_J_conjugate(x, 0.37, p);
    const CellState y2 = prox_J_conjugate(x, 5.1, p);
    CHECK(std::abs(y1.mx - y2.mx) <= 1e-8);
    CHECK(std::abs(y1.my - y2.my) <= 1e-8);
    CHECK(std::abs(y1.rho - y2.rho) <= 1e-8);
    CHECK(std::abs(y1.H - y2.H) <= 1e-8);

    // membership: solve (alpha A) w = y_m / 2 => <y_m, (4 alpha A)^{-1} y_m> = <y_m, w> / 2
    double wx = 0, wy = 0;
    A.shifted_solve(2 * p.alpha, 0.0, y1.mx, y1.my, wx, wy);
    const double quad = (y1.mx * wx + y1.my * wy) / 2;
    CHECK(y1.rho + quad + y1.H * y1.H / (4 * p.beta) <= 1e-7);

    // projection is idempotent
    const CellState y3 = prox_J_conjugate(y1, 0.37, p);
    CHECK(std::abs(y3.mx - y1.mx) <= 1e-8);
    CHECK(std::abs(y3.rho - y1.rho) <= 1e-8);
    CHECK(std::abs(y3.H - y1.H) <= 1e-8);
  }
}

TEST_CASE("Moreau decomposition reconstructs the input") {
  auto r = rng(41);
  for (int t = 0; t < 100; ++t) {
    const int dim = t % 2 ? 2 : 1;
    ProxParams p = params(dim, 1.0, dim == 2 ? random_spd(r) : SymMat2{});
    const CellState x = random_cell(r, dim);
    const double sigma = urand(r, 0.2, 4);
    const CellState yc = prox_J_conjugate(x, sigma, p);
    ProxParams ps = p;
    ps.c = 1.0 / sigma;
    const CellState yp = prox_J(CellState{x.mx / sigma, x.my / sigma, x.rho / sigma, x.H / sigma}, ps).y;
    CHECK(yc.mx + sigma * yp.mx == doctest::Approx(x.mx).epsilon(1e-10));
    CHECK(yc.rho + sigma * yp.rho == doctest::Approx(x.rho).epsilon(1e-10));
    CHECK(yc.H + sigma * yp.H == doctest::Approx(x.H).epsilon(1e-10));
  }
}

TEST_CASE("field conjugate prox matches the cellwise calls") {
  const GridSpec g = grid2(4, 3, 3);
  auto r = rng(55);
  ProxParams p = params(2, 1.0, SymMat2{});
  p.c = 0.8;  // sigma for the field call

  std::vector<SymMat2> As(static_cast<size_t>(g.spatial_cells()));
  for (auto& A : As) A = random_spd(r);

  CenteredState V(g);
  CenteredField H = make_centered(g);
  fill_random(V.m, r, -2, 2);
  fill_random(V.n, r, -2, 2);
  fill_random(V.rho, r, -2, 2);
  fill_random(H, r, -2, 2);
  CenteredState Vf = V;
  CenteredField Hf = H;
  prox_J_conjugate_field(Vf, Hf, 0.8, p, As.data());

  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k < g.Q; ++k) {
        ProxParams pc = p;
        pc.A = As[static_cast<size_t>(i) * g.N + j];
        const CellState x{V.m.at(i, j, k), V.n.at(i, j, k), V.rho.at(i, j, k), H.at(i, j, k)};
        const CellState y = prox_J_conjugate(x, 0.8, pc);
        CHECK(Vf.m.at(i, j, k) == doctest::Approx(y.mx).epsilon(1e-13));
        CHECK(Vf.n.at(i, j, k) == doctest::Approx(y.my).epsilon(1e-13));
        CHECK(Vf.rho.at(i, j, k) == doctest::Approx(y.rho).epsilon(1e-13));
        CHECK(Hf.at(i, j, k) == doctest::Approx(y.H).epsilon(1e-13));
      }
}

TEST_CASE("sum_J counts violations and skips vacuum") {
  const GridSpec g = grid1(4, 2);
  ProxParams p = params(1, 1.0, SymMat2{});
  CenteredState V(g);
  CenteredField H = make_centered(g);
  V.rho.at(0, 0, 0) = 1.0;
  V.m.at(0, 0, 0) = 2.0;  // J = alpha * 4 / 1
  V.rho.at(1, 0, 0) = -0.5;
  V.m.at(1, 0, 0) = 1.0;  // violation: momentum on nonpositive density
  int violations = 0;
  const double s = sum_J(V, H, p, nullptr, &violations);
  CHECK(s == doctest::Approx(p.alpha * 4.0).epsilon(1e-14));
  CHECK(violations == 1);
}
