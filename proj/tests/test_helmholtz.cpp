#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "usot/helmholtz.hpp"

using namespace usot;
using namespace usot::testing;

namespace {

// direct stencil of (beta^2 I - sum_axis w^2 D^2) with half-sample-even Neumann closure
CenteredField apply_operator(const GridSpec& g, const ConstraintWeights& w,
                             const CenteredField& s) {
  CenteredField out = make_centered(g);
  const double cx = w.wx * w.wx / (g.dx() * g.dx());
  const double cy = w.wy * w.wy / (g.dy() * g.dy());
  const double ct = w.wt * w.wt / (g.dt() * g.dt());
  auto ref = [](int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j)
      for (int k = 0; k < g.Q; ++k) {
        double acc = w.beta * w.beta * s.at(i, j, k);
        acc += cx * (2 * s.at(i, j, k) - s.at(ref(i - 1, g.M), j, k) - s.at(ref(i + 1, g.M), j, k));
        if (g.dim == 2)
          acc += cy * (2 * s.at(i, j, k) - s.at(i, ref(j - 1, g.N), k) - s.at(i, ref(j + 1, g.N), k));
        acc += ct * (2 * s.at(i, j, k) - s.at(i, j, ref(k - 1, g.Q)) - s.at(i, j, ref(k + 1, g.Q)));
        out.at(i, j, k) = acc;
      }
  return out;
}

double linf(const CenteredField& a) {
  double m = 0;
  for (double v : a.v) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("dct solve inverts the Neumann stencil") {
  for (const GridSpec& g : {grid1(9, 7), grid2(6, 5, 8)}) {
    for (ConstraintForm form : {ConstraintForm::paper, ConstraintForm::continuity}) {
      HelmholtzPlan plan(g, 1.4, 2.3, form);
      auto r = rng(17 + g.dim + (form == ConstraintForm::paper));
      CenteredField rhs = make_centered(g);
      fill_random(rhs, r);
      CenteredField s = make_centered(g);
      dct_neumann_solve(plan, rhs, s);
      const CenteredField back = apply_operator(g, plan.weights(), s);
      double err = 0;
      for (size_t a = 0; a < rhs.size(); ++a) err = std::max(err, std::abs(back.v[a] - rhs.v[a]));
      CHECK(err <= 1e-10 * (1 + linf(rhs)));
    }
  }
}

TEST_CASE("beta = 0 needs a compatible rhs and solves it to zero mean") {
  const GridSpec g = grid2(5, 4, 6);
  HelmholtzPlan plan(g, 1.0, 0.0);
  auto r = rng(23);
  CenteredField rhs = make_centered(g);
  fill_random(rhs, r);
  double mean = 0;
  for (double v : rhs.v) mean += v;
  mean /= rhs.size();
  CenteredField scratch = make_centered(g);
  CHECK_THROWS_AS(dct_neumann_solve(plan, rhs, scratch), std::runtime_error);

  for (double& v : rhs.v) v -= mean;
  CenteredField s = make_centered(g);
  dct_neumann_solve(plan, rhs, s);
  const CenteredField back = apply_operator(g, plan.weights(), s);
  double err = 0, smean = 0;
  for (size_t a = 0; a < rhs.size(); ++a) {
    err = std::max(err, std::abs(back.v[a] - rhs.v[a]));
    smean += s.v[a];
  }
  CHECK(err <= 1e-10 * (1 + linf(rhs)));
  CHECK(std::abs(smean / s.size()) <= 1e-12);
}

TEST_CASE("projection restores feasibility, pins the boundary, and is idempotent") {
  auto r = rng(71);
  for (const GridSpec& g : {grid1(12, 9), grid2(7, 6, 9)}) {
    for (ConstraintForm form : {ConstraintForm::paper, ConstraintForm::continuity}) {
      HelmholtzPlan plan(g, 1.2, 3.0, form);
      BoundaryData b(g);
      for (auto& x : b.mu) x = urand(r);
      for (auto& x : b.nu) x = urand(r);

      StaggeredField U(g);
      CenteredField H = make_centered(g);
      fill_random(U.m, r);
      fill_random(U.rho, r);
      if (g.dim == 2) fill_random(U.n, r);
      fill_random(H, r);

      const ProjectionStats st = project_constraints(U, H, b, plan);
      const CenteredField res = constraint_apply(U, H, plan);
      CHECK(linf(res) <= 1e-10 * (1 + st.rhs_inf));

      const BoundaryData back = boundary_read(U);
      for (size_t a = 0; a < b.mu.size(); ++a) {
        CHECK(back.mu[a] == b.mu[a]);
        CHECK(back.nu[a] == b.nu[a]);
      }
      for (int j = 0; j < g.N; ++j)
        for (int k = 0; k < g.Q; ++k) {
          CHECK(U.m.at(0, j, k) == 0.0);
          CHECK(U.m.at(g.M, j, k) == 0.0);
        }

      StaggeredField U2 = U;
      CenteredField H2 = H;
      project_constraints(U2, H2, b, plan);
      double drift = 0;
      for (size_t a = 0; a < U.m.size(); ++a) drift = std::max(drift, std::abs(U2.m.v[a] - U.m.v[a]));
      for (size_t a = 0; a < U.rho.size(); ++a)
        drift = std::max(drift, std::abs(U2.rho.v[a] - U.rho.v[a]));
      for (size_t a = 0; a < H.size(); ++a) drift = std::max(drift, std::abs(H2.v[a] - H.v[a]));
      CHECK(drift <= 1e-11);
    }
  }
}

TEST_CASE("projection displacement is orthogonal to the feasible directions") {
  const GridSpec g = grid2(5, 4, 5);
  HelmholtzPlan plan(g, 1.0, 2.0);
  auto r = rng(13);
  BoundaryData b(g);
  for (auto& x : b.mu) x = urand(r);
  for (auto& x : b.nu) x = urand(r);

  auto random_state = [&](StaggeredField& U, CenteredField& H) {
    fill_random(U.m, r);
    fill_random(U.n, r);
    fill_random(U.rho, r);
    fill_random(H, r);
  };

  // two projections with the same boundary differ by a homogeneous feasible direction
  StaggeredField W1(g), W2(g);
  CenteredField G1 = make_centered(g), G2 = make_centered(g);
  random_state(W1, G1);
  random_state(W2, G2);
  project_constraints(W1, G1, b, plan);
  project_constraints(W2, G2, b, plan);

  StaggeredField X(g);
  CenteredField HX = make_centered(g);
  random_state(X, HX);
  StaggeredField PX = X;
  CenteredField PH = HX;
  project_constraints(PX, PH, b, plan);

  double ip = 0, nd = 0, nw = 0;
  auto acc = [&](const Field3& d, const Field3& w) {
    for (size_t a = 0; a < d.size(); ++a) {
      ip += d.v[a] * w.v[a];
      nd += d.v[a] * d.v[a];
      nw += w.v[a] * w.v[a];
    }
  };
  // displacement of X restricted to the non-pinned coordinates (the projection moves
  // boundary slabs by assignment, which is not part of the Euclidean projection)
  StaggeredField D(g);
  CenteredField DH = make_centered(g);
  for (size_t a = 0; a < D.m.size(); ++a) D.m.v[a] = X.m.v[a] - PX.m.v[a];
  for (size_t a = 0; a < D.n.size(); ++a) D.n.v[a] = X.n.v[a] - PX.n.v[a];
  for (size_t a = 0; a < D.rho.size(); ++a) D.rho.v[a] = X.rho.v[a] - PX.rho.v[a];
  for (size_t a = 0; a < DH.size(); ++a) DH.v[a] = HX.v[a] - PH.v[a];
  boundary_write(D, BoundaryData(g));

  StaggeredField W(g);
  CenteredField GW = make_centered(g);
  for (size_t a = 0; a < W.m.size(); ++a) W.m.v[a] = W1.m.v[a] - W2.m.v[a];
  for (size_t a = 0; a < W.n.size(); ++a) W.n.v[a] = W1.n.v[a] - W2.n.v[a];
  for (size_t a = 0; a < W.rho.size(); ++a) W.rho.v[a] = W1.rho.v[a] - W2.rho.v[a];
  for (size_t a = 0; a < GW.size(); ++a) GW.v[a] = G1.v[a] - G2.v[a];

  acc(D.m, W.m);
  acc(D.n, W.n);
  acc(D.rho, W.rho);
  acc(DH, GW);
  CHECK(std::abs(ip) <= 1e-9 * std::sqrt(nd * nw));
}

TEST_CASE("projection balances slice masses against the source") {
  for (ConstraintForm form : {ConstraintForm::paper, ConstraintForm::continuity}) {
    const GridSpec g = grid2(6, 5, 7);
    const double alpha = 1.7, beta = 2.2;
    HelmholtzPlan plan(g, alpha, beta, form);
    auto r = rng(29 + (form == ConstraintForm::paper));
    BoundaryData b(g);
    for (auto& x : b.mu) x = urand(r);
    for (auto& x : b.nu) x = urand(r);
    StaggeredField U(g);
    CenteredField H = make_centered(g);
    fill_random(U.m, r);
    fill_random(U.n, r);
    fill_random(U.rho, r);
    fill_random(H, r);
    project_constraints(U, H, b, plan);

    // sum the constraint over space: fluxes telescope, so for every slab
    // wt (sum rho_{k+1} - sum rho_k)/dt = beta sum H_k
    const double wt = form == ConstraintForm::paper ? alpha : 1.0;
    for (int k = 0; k < g.Q; ++k) {
      double mk = 0, mk1 = 0, hk = 0;
      for (int i = 0; i < g.M; ++i)
        for (int j = 0; j < g.N; ++j) {
          mk += U.rho.at(i, j, k);
          mk1 += U.rho.at(i, j, k + 1);
          hk += H.at(i, j, k);
        }
      CHECK(wt * (mk1 - mk) / g.dt() == doctest::Approx(beta * hk).epsilon(1e-9));
    }
  }
}
