#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "usot/config.hpp"
#include "usot/hk.hpp"
#include "usot/io.hpp"
#include "usot/oracles.hpp"
#include "usot/solvers.hpp"

namespace py = pybind11;
using namespace usot;

namespace {

py::dict solve_json(const std::string& config_text, const std::string& base_dir) {
  const ExperimentConfig c = parse_config(config_text);
  const GridSpec& g = c.grid;
  BoundaryData b(g);
  b.mu = build_marginal(c.mu, g, base_dir);
  b.nu = build_marginal(c.nu, g, base_dir);
  b.validate();

  SolveReport rep(g);
  if (c.kind == ProblemKind::wfr) {
    rep = solve_chambolle_pock(b, nullptr, c.solver);
  } else if (c.kind == ProblemKind::monge) {
    const MetricField metric = build_metric(c.map, g, c.c1, c.c2);
    rep = solve_chambolle_pock(b, &metric, c.solver);
  } else {
    const MarkovKernel kernel = build_kernel(c, base_dir);
    rep = solve_yan(b, kernel, c.solver);
  }

  py::dict out;
  out["objective"] = rep.objective;
  out["primary_objective"] = rep.primary_objective;
  out["secondary_value"] = rep.secondary_value;
  out["converged"] = rep.converged;
  out["iterations"] = rep.iterations;
  out["final_residual"] = rep.final_residual;
  out["mass"] = rep.mass;
  out["objective_log"] = rep.objective_log;
  out["residual_log"] = rep.residual_log;
  out["rho"] = rep.U.rho.v;
  out["tau"] = rep.tau;
  out["sigma"] = rep.sigma;
  return out;
}

py::dict hk_json(const std::string& config_text, const std::string& base_dir) {
  const ExperimentConfig c = parse_config(config_text);
  const GridSpec& g = c.grid;
  const std::vector<double> rho_mu = build_marginal(c.mu, g, base_dir);
  const std::vector<double> rho_nu = build_marginal(c.nu, g, base_dir);
  const double vol = g.spatial_volume();
  std::vector<double> mu(rho_mu.size()), nu(rho_nu.size());
  for (size_t i = 0; i < mu.size(); ++i) mu[i] = rho_mu[i] * vol;
  for (size_t i = 0; i < nu.size(); ++i) nu[i] = rho_nu[i] * vol;

  std::vector<double> pts(mu.size() * g.dim);
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      const size_t cell = static_cast<size_t>(i) * g.N + j;
      pts[cell * g.dim] = g.xc(i);
      if (g.dim == 2) pts[cell * g.dim + 1] = g.yc(j);
    }
  const int n = g.spatial_cells();
  const HkCost cost = hk_cost(pts, n, pts, n, g.dim, c.alpha, c.beta);
  HkOptions opts;
  opts.anneal = c.hk.anneal;
  opts.tol = c.hk.tol;
  opts.max_sweeps = c.hk.max_sweeps;
  opts.epsilon = c.hk.epsilon > 0
                     ? c.hk.epsilon
                     : hk_default_epsilon(cost, c.hk.epsilon_scale > 0 ? c.hk.epsilon_scale : 1e-3);
  const HkSolution sol = hk_solve(cost, mu, nu, opts);

  py::dict out;
  out["value"] = sol.value;
  out["converged"] = sol.converged;
  out["sweeps"] = sol.sweeps;
  out["marginal_err"] = sol.marginal_err;
  out["epsilon"] = opts.epsilon;
  return out;
}

double fr_action_py(const std::vector<double>& mu, const std::vector<double>& nu, double vol) {
  return fr_geodesic(mu, nu, 0.5, vol).action;
}

}  // namespace

PYBIND11_MODULE(_usot, m) {
  m.doc() = "dynamic unbalanced optimal transport with synchronized secondary mass";
  m.def("solve_json", &solve_json, py::arg("config_text"), py::arg("base_dir") = std::string("."),
        "run a solve from a JSON config string; returns a result dict");
  m.def("hk_json", &hk_json, py::arg("config_text"), py::arg("base_dir") = std::string("."),
        "static HK^2 between the configured marginals");
  m.def("resolved_config", [](const std::string& text) {
    return resolved_config_json(parse_config(text));
  });
  m.def("mass_curve", &mass_curve, py::arg("m0"), py::arg("m1"), py::arg("hk2"), py::arg("t"));
  m.def("fr_action", &fr_action_py, py::arg("mu"), py::arg("nu"), py::arg("cell_volume"));
  m.def("hk2_two_dirac", &hk2_two_dirac, py::arg("a"), py::arg("b"), py::arg("x0"), py::arg("x1"),
        py::arg("alpha"), py::arg("beta"));
}
