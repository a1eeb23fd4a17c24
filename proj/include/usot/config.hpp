#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "usot/geometry.hpp"
#include "usot/oracles.hpp"
#include "usot/solvers.hpp"

namespace usot {

// JSON experiment configs, schema "usot-config/1". Unknown keys are rejected at every
// level; the resolved form (all defaults filled in) is emitted into report.json so a
// run is reproducible from its report alone.

struct MarginalConfig {
  std::string file;  // density container path; empty -> generated from gaussians
  std::vector<GaussianSpec> gaussians;
};

struct HkConfig {
  double epsilon = 0.0;        // absolute; 0 -> epsilon_scale * median(finite cost)
  double epsilon_scale = 0.0;  // 0 -> 1e-3 for the hk command, 1e-2 for solver-internal use
  int anneal = 4;
  double tol = 1e-8;
  int max_sweeps = 5000;
};

struct OutputConfig {
  std::string dir = "out";
  bool emit_frames = false;
};

struct ExperimentConfig {
  GridSpec grid;
  ProblemKind kind = ProblemKind::wfr;
  double alpha = 1.0, beta = 1.0, c1 = 1.0, c2 = 0.0;
  MarginalConfig mu, nu;
  bool has_map = false;
  MapSpec map;
  enum class KernelSource { none, identity, file };
  KernelSource kernel_source = KernelSource::none;
  std::string kernel_file;
  SolveConfig solver;  // fully wired: kind/alpha/beta/c1/c2/hk copied from the fields above
  HkConfig hk;
  OutputConfig output;
  uint64_t seed = 0;
};

ExperimentConfig parse_config(const std::string& json_text);
std::string resolved_config_json(const ExperimentConfig& c);

// file paths in the config resolve relative to base_dir (the config file's directory)
std::vector<double> build_marginal(const MarginalConfig& m, const GridSpec& g,
                                   const std::string& base_dir);
MarkovKernel build_kernel(const ExperimentConfig& c, const std::string& base_dir);

}  // namespace usot
