#include <cstdio>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "usot/config.hpp"
#include "usot/hk.hpp"
#include "usot/io.hpp"
#include "usot/oracles.hpp"
#include "usot/solvers.hpp"

using nlohmann::json;
using namespace usot;

namespace {

// exit codes: 0 ok, 2 config error, 3 unconverged (artifacts still written), 4 I/O error
void error_record(int code, const std::string& msg) {
  std::cerr << json{{"error", msg}, {"exit", code}}.dump() << "\n";
}

std::string base_dir_of(const std::string& path) {
  const auto p = std::filesystem::path(path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

struct CommonArgs {
  std::string config;
  std::string out;
  bool quiet = false;
  bool emit_frames = false;
  uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool config_required) {
  auto* opt = cmd->add_option("--config", a.config, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", a.out, "output directory (overrides config)");
  cmd->add_flag("--quiet", a.quiet, "suppress the human-readable summary");
  cmd->add_flag("--emit-frames", a.emit_frames, "write one PGM heatmap per time slice");
  cmd->add_option("--seed", a.seed, "RNG seed (overrides config)");
}

ExperimentConfig load_config(const CLI::App* cmd, const CommonArgs& a) {
  ExperimentConfig c = parse_config(read_file(a.config));
  if (cmd->count("--out")) c.output.dir = a.out;
  if (cmd->count("--seed")) {
    c.seed = a.seed;
    c.solver.seed = a.seed != 0 ? a.seed : 1234;
  }
  if (a.emit_frames) c.output.emit_frames = true;
  return c;
}

std::vector<double> grid_centers(const GridSpec& g) {
  std::vector<double> pts(static_cast<size_t>(g.spatial_cells()) * g.dim);
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.N; ++j) {
      const size_t c = static_cast<size_t>(i) * g.N + j;
      pts[c * g.dim] = g.xc(i);
      if (g.dim == 2) pts[c * g.dim + 1] = g.yc(j);
    }
  return pts;
}

int run_solve(const CLI::App* cmd, const CommonArgs& a) {
  const ExperimentConfig c = load_config(cmd, a);
  const std::string base = base_dir_of(a.config);
  const GridSpec& g = c.grid;

  BoundaryData b(g);
  b.mu = build_marginal(c.mu, g, base);
  b.nu = build_marginal(c.nu, g, base);
  b.validate();

  SolveReport rep(g);
  if (c.kind == ProblemKind::wfr) {
    rep = solve_chambolle_pock(b, nullptr, c.solver);
  } else if (c.kind == ProblemKind::monge) {
    const MetricField metric = build_metric(c.map, g, c.c1, c.c2);
    rep = solve_chambolle_pock(b, &metric, c.solver);
  } else {
    const MarkovKernel kernel = build_kernel(c, base);
    rep = solve_yan(b, kernel, c.solver);
  }

  std::filesystem::create_directories(c.output.dir);
  const auto out = [&](const std::string& name) { return c.output.dir + "/" + name; };
  write_trajectory(out("trajectory.f64"), g, rep.U, rep.H);
  write_masses_csv(out("masses.csv"), g, rep.mass);

  json frames = json::array();
  if (c.output.emit_frames) {
    std::vector<double> slice(static_cast<size_t>(g.spatial_cells()));
    for (int k = 0; k <= g.Q; ++k) {
      for (int cidx = 0; cidx < g.spatial_cells(); ++cidx)
        slice[cidx] = rep.U.rho.v[static_cast<size_t>(cidx) * (g.Q + 1) + k];
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04d.pgm", k);
      const auto [lo, hi] = write_pgm(out(name), g, slice);
      frames.push_back({{"file", name}, {"lo", lo}, {"hi", hi}});
    }
  }

  json report;
  report["config"] = json::parse(resolved_config_json(c));
  report["converged"] = rep.converged;
  report["iterations"] = rep.iterations;
  report["objective"] = rep.objective;
  report["primary_objective"] = rep.primary_objective;
  report["secondary_value"] = rep.secondary_value;
  report["final_residual"] = rep.final_residual;
  report["tau"] = rep.tau;
  report["sigma"] = rep.sigma;
  report["knorm"] = rep.knorm;
  report["lipschitz"] = rep.lipschitz;
  report["step_shrinks"] = rep.step_shrinks;
  report["hk_sweeps"] = rep.hk_sweeps;
  report["mass"] = rep.mass;
  report["objective_log"] = rep.objective_log;
  report["residual_log"] = rep.residual_log;
  if (!rep.secondary_log.empty()) report["secondary_log"] = rep.secondary_log;
  if (c.output.emit_frames) report["frames"] = frames;
  report["timings"] = {{"wall_seconds", rep.wall_seconds}};
  atomic_write(out("report.json"), report.dump(2) + "\n");

  if (!a.quiet)
    std::fprintf(stderr,
                 "objective %.12g (primary %.12g, secondary %.12g) iters %d residual %.3g %s\n",
                 rep.objective, rep.primary_objective, rep.secondary_value, rep.iterations,
                 rep.final_residual, rep.converged ? "converged" : "NOT converged");
  std::printf("%.17g\n", rep.objective);
  if (!rep.converged) {
    error_record(3, "solver did not converge; artifacts written to " + c.output.dir);
    return 3;
  }
  return 0;
}

int run_hk(const CLI::App* cmd, const CommonArgs& a) {
  const ExperimentConfig c = load_config(cmd, a);
  const std::string base = base_dir_of(a.config);
  const GridSpec& g = c.grid;

  const std::vector<double> rho_mu = build_marginal(c.mu, g, base);
  const std::vector<double> rho_nu = build_marginal(c.nu, g, base);
  const double vol = g.spatial_volume();
  std::vector<double> mu(rho_mu.size()), nu(rho_nu.size());
  for (size_t i = 0; i < mu.size(); ++i) mu[i] = rho_mu[i] * vol;
  for (size_t i = 0; i < nu.size(); ++i) nu[i] = rho_nu[i] * vol;

  const std::vector<double> pts = grid_centers(g);
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

  if (cmd->count("--out")) {
    std::filesystem::create_directories(c.output.dir);
    std::string duals = "i,f,g\n";
    char line[96];
    for (size_t i = 0; i < sol.f.size(); ++i) {
      std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", i, sol.f[i], sol.g[i]);
      duals += line;
    }
    atomic_write(c.output.dir + "/duals.csv", duals);
  }
  if (!a.quiet)
    std::fprintf(stderr, "epsilon %.6g sweeps %d marginal_err %.3g %s\n", opts.epsilon, sol.sweeps,
                 sol.marginal_err, sol.converged ? "converged" : "NOT converged");
  std::printf("%.17g\n", sol.value);
  if (!sol.converged) {
    error_record(3, "sinkhorn did not reach tolerance");
    return 3;
  }
  return 0;
}

int run_oracle(const CLI::App* cmd, const CommonArgs& a, const std::string& kind,
               const std::vector<double>& args) {
  if (kind == "mass_curve") {
    if (args.size() < 3) throw std::invalid_argument("oracle mass_curve needs m0 m1 hk2 [steps]");
    const double m0 = args[0], m1 = args[1], hk2 = args[2];
    const int steps = args.size() > 3 ? int(args[3]) : 32;
    if (steps < 1) throw std::invalid_argument("oracle mass_curve needs steps >= 1");
    std::printf("k,t,mass\n");
    for (int k = 0; k <= steps; ++k) {
      const double t = double(k) / steps;
      std::printf("%d,%.17g,%.17g\n", k, t, mass_curve(m0, m1, hk2, t));
    }
    return 0;
  }
  const ExperimentConfig c = load_config(cmd, a);
  const std::string base = base_dir_of(a.config);
  const GridSpec& g = c.grid;
  const std::vector<double> mu = build_marginal(c.mu, g, base);
  const std::vector<double> nu = build_marginal(c.nu, g, base);
  if (kind == "fr") {
    const double t = args.empty() ? 0.5 : args[0];
    const FrGeodesic fr = fr_geodesic(mu, nu, t, g.spatial_volume());
    std::printf("%.17g\n", fr.action);
    return 0;
  }
  if (kind == "w2") {
    std::printf("%.17g\n", w2_1d(g, mu, nu));
    return 0;
  }
  throw std::invalid_argument("oracle kind must be fr|mass_curve|w2");
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    error_record(2, e.what());
    return 2;
  } catch (const std::exception& e) {
    error_record(4, e.what());
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic unbalanced optimal transport with synchronized secondary mass"};
  app.require_subcommand(1);

  CommonArgs solve_args, hk_args, oracle_args;
  std::string oracle_kind;
  std::vector<double> oracle_numbers;

  CLI::App* solve = app.add_subcommand("solve", "run a dynamic solve and write artifacts");
  add_common(solve, solve_args, true);

  CLI::App* hk = app.add_subcommand("hk", "static HK^2 between the configured marginals");
  add_common(hk, hk_args, true);

  CLI::App* oracle = app.add_subcommand("oracle", "closed-form reference values");
  oracle->add_option("kind", oracle_kind, "fr | mass_curve | w2")->required();
  oracle->add_option("args", oracle_numbers, "mass_curve: m0 m1 hk2 [steps]; fr: [t]");
  add_common(oracle, oracle_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (solve->parsed()) return guarded([&] { return run_solve(solve, solve_args); });
  if (hk->parsed()) return guarded([&] { return run_hk(hk, hk_args); });
  if (oracle->parsed()) {
    return guarded([&] {
      if (oracle_kind != "mass_curve" && oracle_args.config.empty())
        throw std::invalid_argument("oracle " + oracle_kind + " needs --config");
      return run_oracle(oracle, oracle_args, oracle_kind, oracle_numbers);
    });
  }
  return 2;
}
