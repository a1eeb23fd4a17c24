#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "usot/geometry.hpp"
#include "usot/oracles.hpp"

using namespace usot;
using namespace usot::testing;

TEST_CASE("builtin jacobians match finite differences of sampled values") {
  const GridSpec g = grid2(48, 48, 2);

  MapSpec bump;
  bump.kind = MapSpec::Kind::gaussian_bump;
  bump.amp = 0.5;
  bump.sigma = 0.2;
  bump.center = {0.45, 0.55};

  MapSpec sine;
  sine.kind = MapSpec::Kind::sine;
  sine.amp = 0.3;

  for (const MapSpec& map : {bump, sine}) {
    const auto pts = map_points(map, g);
    const int n_out = map.output_dim(g.dim);

    MapSpec smp;
    smp.kind = MapSpec::Kind::sampled;
    smp.n_out = n_out;
    smp.values.assign(n_out, std::vector<double>(static_cast<size_t>(g.spatial_cells())));
    for (int c = 0; c < g.spatial_cells(); ++c)
      for (int a = 0; a < n_out; ++a) smp.values[a][c] = pts[c][a];

    const auto Ja = jacobian(map, g);
    const auto Jf = jacobian(smp, g);
    // central differences carry O(dx^2) truncation; skip the one-sided boundary ring
    for (int i = 1; i < g.M - 1; ++i)
      for (int j = 1; j < g.N - 1; ++j) {
        const size_t c = static_cast<size_t>(i) * g.N + j;
        for (int a = 0; a < n_out; ++a)
          for (int d = 0; d < g.dim; ++d) {
            const double ref = Ja[static_cast<size_t>(a) * g.dim + d][c];
            const double fd = Jf[static_cast<size_t>(a) * g.dim + d][c];
            CHECK(std::abs(fd - ref) <= 2e-2 * std::max(1.0, std::abs(ref)));
          }
      }
  }
}

TEST_CASE("distance lift gradient has the lift magnitude away from anchors") {
  const GridSpec g = grid2(32, 32, 2);
  MapSpec lift;
  lift.kind = MapSpec::Kind::distance_lift;
  lift.lift_scale = 7.0;
  lift.anchors = {{0.1, 0.1}, {0.9, 0.2}};
  const auto J = jacobian(lift, g);
  const int a = g.dim;  // the lifted coordinate row
  int checked = 0;
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      double best = 1e300;
      for (const auto& q : lift.anchors) {
        const double dx = g.xc(i) - q[0], dy = g.yc(j) - q[1];
        best = std::min(best, std::hypot(dx, dy));
      }
      if (best < 0.15) continue;  // kink region between/near anchors
      const size_t c = static_cast<size_t>(i) * g.N + j;
      const double gx = J[static_cast<size_t>(a) * g.dim + 0][c];
      const double gy = J[static_cast<size_t>(a) * g.dim + 1][c];
      CHECK(std::hypot(gx, gy) == doctest::Approx(lift.lift_scale).epsilon(2e-2));
      ++checked;
    }
  CHECK(checked > 500);
}

TEST_CASE("identity map gives the identity metric after weight normalization") {
  const GridSpec g = grid2(8, 8, 2);
  MapSpec id;
  const MetricField M = build_metric(id, g, 3.0, 0.0);
  CHECK(M.c1 == doctest::Approx(1.0));
  CHECK(M.c2 == doctest::Approx(0.0));
  for (const SymMat2& A : M.A) {
    CHECK(A.a11 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(A.a12 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(A.a22 == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(M.lambda_min == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(M.lambda_max == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("build_metric assembles c1 I + c2 J^T J from the jacobian") {
  const GridSpec g = grid2(12, 10, 2);
  MapSpec bump;
  bump.kind = MapSpec::Kind::gaussian_bump;
  bump.amp = 0.8;
  bump.sigma = 0.15;
  const double c1 = 1.0, c2 = 4.0;
  const MetricField M = build_metric(bump, g, c1, c2);
  const double n1 = c1 / (c1 + c2), n2 = c2 / (c1 + c2);
  CHECK(M.c1 == doctest::Approx(n1).epsilon(1e-14));

  const auto J = jacobian(bump, g);
  const int n_out = bump.output_dim(g.dim);
  double lmin = 1e300, lmax = 0;
  for (int c = 0; c < g.spatial_cells(); ++c) {
    double a11 = n1, a12 = 0, a22 = n1;
    for (int a = 0; a < n_out; ++a) {
      const double jx = J[static_cast<size_t>(a) * g.dim + 0][c];
      const double jy = J[static_cast<size_t>(a) * g.dim + 1][c];
      a11 += n2 * jx * jx;
      a12 += n2 * jx * jy;
      a22 += n2 * jy * jy;
    }
    CHECK(M.A[c].a11 == doctest::Approx(a11).epsilon(1e-12));
    CHECK(M.A[c].a12 == doctest::Approx(a12).epsilon(1e-12));
    CHECK(M.A[c].a22 == doctest::Approx(a22).epsilon(1e-12));
    lmin = std::min(lmin, M.A[c].lambda_min());
    lmax = std::max(lmax, M.A[c].lambda_max());
  }
  CHECK(M.lambda_min == doctest::Approx(lmin).epsilon(1e-12));
  CHECK(M.lambda_max == doctest::Approx(lmax).epsilon(1e-12));
  // the metric never dips below the normalized c1 floor
  CHECK(M.lambda_min >= n1 - 1e-12);
}

TEST_CASE("random kernels are row-stochastic and apply/adjoint are consistent") {
  const GridSpec g = grid2(6, 5, 2);
  const MarkovKernel K = random_markov_kernel(g, 17, 2024);
  REQUIRE(K.rows == g.spatial_cells());
  REQUIRE(K.cols == 17);
  for (int i = 0; i < K.rows; ++i) {
    double s = 0;
    for (int j = 0; j < K.cols; ++j) {
      const double p = K.P[static_cast<size_t>(i) * K.cols + j];
      CHECK(p >= 0);
      s += p;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  auto r = rng(8);
  std::vector<double> rho(static_cast<size_t>(K.rows)), phi(static_cast<size_t>(K.cols));
  for (auto& v : rho) v = urand(r);
  for (auto& v : phi) v = urand(r, -1, 1);
  const auto xi = kernel_apply(K, rho.data());
  const auto Tphi = kernel_adjoint_apply(K, phi.data());
  double lhs = 0, rhs = 0;
  for (int j = 0; j < K.cols; ++j) lhs += xi[j] * phi[j];
  for (int i = 0; i < K.rows; ++i) rhs += rho[i] * Tphi[i] * K.cell_volume;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  // pushforward preserves total mass
  double mrho = 0, mxi = 0;
  for (double v : rho) mrho += v * K.cell_volume;
  for (double v : xi) mxi += v;
  CHECK(mxi == doctest::Approx(mrho).epsilon(1e-12));
}

TEST_CASE("identity kernel pushes densities to per-cell masses on mapped support") {
  const GridSpec g = grid2(5, 4, 2);
  MapSpec bump;
  bump.kind = MapSpec::Kind::gaussian_bump;
  const MarkovKernel K = identity_kernel(g, &bump);
  CHECK(K.identity);
  CHECK(K.n_out == 3);
  const auto pts = map_points(bump, g);
  for (int c = 0; c < g.spatial_cells(); ++c)
    for (int a = 0; a < 3; ++a) CHECK(K.support[c][a] == pts[c][a]);

  auto r = rng(4);
  std::vector<double> rho(static_cast<size_t>(K.rows));
  for (auto& v : rho) v = urand(r);
  const auto xi = kernel_apply(K, rho.data());
  for (int c = 0; c < K.rows; ++c)
    CHECK(xi[c] == doctest::Approx(rho[c] * g.spatial_volume()).epsilon(1e-15));
}

TEST_CASE("kernel_from_coupling normalizes rows and rejects empty ones") {
  std::vector<std::array<double, 3>> sup = {{0, 0, 0}, {1, 0, 0}};
  const MarkovKernel K =
      kernel_from_coupling({2.0, 6.0, 1.0, 1.0}, 2, 2, sup, 1, 0.25);
  CHECK(K.P[0] == doctest::Approx(0.25));
  CHECK(K.P[1] == doctest::Approx(0.75));
  CHECK(K.P[2] == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(kernel_from_coupling({1.0, 1.0, 0.0, 0.0}, 2, 2, sup, 1, 0.25),
                       doctest::Contains("row 1"), std::invalid_argument);
}

TEST_CASE("pushforward contracts the Fisher-Rao distance") {
  auto r = rng(314);
  for (int t = 0; t < 50; ++t) {
    const GridSpec g = grid1(4 + (t % 13), 2);
    const MarkovKernel K = random_markov_kernel(g, 2 + (t % 7), 1000 + t);
    std::vector<double> r0(static_cast<size_t>(g.spatial_cells())),
        r1(static_cast<size_t>(g.spatial_cells()));
    for (auto& v : r0) v = urand(r, 0.0, 3.0);
    for (auto& v : r1) v = urand(r, 0.0, 3.0);
    const auto xi0 = kernel_apply(K, r0.data());
    const auto xi1 = kernel_apply(K, r1.data());

    std::vector<double> m0(r0.size()), m1(r1.size());
    for (size_t i = 0; i < r0.size(); ++i) {
      m0[i] = r0[i] * K.cell_volume;
      m1[i] = r1[i] * K.cell_volume;
    }
    const double fr_x = fr_geodesic(m0, m1, 0.5, 1.0).action;
    const double fr_y = fr_geodesic(xi0, xi1, 0.5, 1.0).action;
    CHECK(fr_y <= fr_x + 1e-12 * (1 + fr_x));
  }
}
