#include "usot/config.hpp"

#include <stdexcept>

#include "json.hpp"
#include "usot/io.hpp"

using nlohmann::json;

namespace usot {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const char* where) {
  if (!obj.is_object()) bad(std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) bad("unknown key '" + it.key() + "' in " + where);
  }
}

double num(const json& j, const char* key, double dflt) {
  return j.contains(key) ? j.at(key).get<double>() : dflt;
}
int num_int(const json& j, const char* key, int dflt) {
  return j.contains(key) ? j.at(key).get<int>() : dflt;
}
std::string str(const json& j, const char* key, const std::string& dflt) {
  return j.contains(key) ? j.at(key).get<std::string>() : dflt;
}

GaussianSpec parse_gaussian(const json& j) {
  check_keys(j, {"x", "y", "sigma", "mass"}, "marginal gaussian");
  GaussianSpec s;
  if (!j.contains("x") || !j.contains("sigma")) bad("gaussian needs x and sigma");
  s.x = j.at("x").get<double>();
  s.y = num(j, "y", 0.5);
  s.sigma = j.at("sigma").get<double>();
  s.mass = num(j, "mass", 1.0);
  return s;
}

MarginalConfig parse_marginal(const json& j, const char* where) {
  check_keys(j, {"file", "gaussians"}, where);
  MarginalConfig m;
  if (j.contains("file")) m.file = j.at("file").get<std::string>();
  if (j.contains("gaussians"))
    for (const json& g : j.at("gaussians")) m.gaussians.push_back(parse_gaussian(g));
  if (m.file.empty() && m.gaussians.empty()) bad(std::string(where) + " needs gaussians or file");
  if (!m.file.empty() && !m.gaussians.empty()) bad(std::string(where) + ": file excludes gaussians");
  return m;
}

MapSpec parse_map(const json& j) {
  MapSpec map;
  const std::string type = str(j, "type", "");
  if (type == "identity") {
    check_keys(j, {"type"}, "map");
    map.kind = MapSpec::Kind::identity;
  } else if (type == "gaussian_bump") {
    check_keys(j, {"type", "amp", "sigma", "center"}, "map");
    map.kind = MapSpec::Kind::gaussian_bump;
    map.amp = num(j, "amp", 1.0);
    map.sigma = num(j, "sigma", 0.15);
    if (j.contains("center")) {
      const auto c = j.at("center").get<std::vector<double>>();
      if (c.size() != 2) bad("map center needs two entries");
      map.center = {c[0], c[1]};
    }
  } else if (type == "sine") {
    check_keys(j, {"type", "amp"}, "map");
    map.kind = MapSpec::Kind::sine;
    map.amp = num(j, "amp", 1.0);
  } else if (type == "distance_lift") {
    check_keys(j, {"type", "lift_scale", "anchors"}, "map");
    map.kind = MapSpec::Kind::distance_lift;
    map.lift_scale = num(j, "lift_scale", 10.0);
    if (!j.contains("anchors")) bad("distance_lift map needs anchors");
    for (const json& a : j.at("anchors")) {
      const auto p = a.get<std::vector<double>>();
      if (p.size() != 2) bad("anchor needs two coordinates");
      map.anchors.push_back({p[0], p[1]});
    }
  } else if (type == "sampled") {
    check_keys(j, {"type", "values", "jacobian"}, "map");
    map.kind = MapSpec::Kind::sampled;
    if (!j.contains("values")) bad("sampled map needs values");
    for (const json& row : j.at("values")) map.values.push_back(row.get<std::vector<double>>());
    map.n_out = int(map.values.size());
    if (map.n_out == 0) bad("sampled map values are empty");
    if (j.contains("jacobian"))
      for (const json& row : j.at("jacobian")) map.jac.push_back(row.get<std::vector<double>>());
  } else {
    bad("map type must be identity|gaussian_bump|sine|distance_lift|sampled");
  }
  return map;
}

std::string resolve_path(const std::string& file, const std::string& base_dir) {
  if (file.empty() || file.front() == '/' || base_dir.empty()) return file;
  return base_dir + "/" + file;
}

json marginal_json(const MarginalConfig& m) {
  json j;
  if (!m.file.empty()) {
    j["file"] = m.file;
  } else {
    json arr = json::array();
    for (const GaussianSpec& g : m.gaussians)
      arr.push_back({{"x", g.x}, {"y", g.y}, {"sigma", g.sigma}, {"mass", g.mass}});
    j["gaussians"] = arr;
  }
  return j;
}

json map_json(const MapSpec& m) {
  json j;
  switch (m.kind) {
    case MapSpec::Kind::identity:
      j["type"] = "identity";
      break;
    case MapSpec::Kind::gaussian_bump:
      j["type"] = "gaussian_bump";
      j["amp"] = m.amp;
      j["sigma"] = m.sigma;
      j["center"] = {m.center[0], m.center[1]};
      break;
    case MapSpec::Kind::sine:
      j["type"] = "sine";
      j["amp"] = m.amp;
      break;
    case MapSpec::Kind::distance_lift: {
      j["type"] = "distance_lift";
      j["lift_scale"] = m.lift_scale;
      json arr = json::array();
      for (const auto& a : m.anchors) arr.push_back({a[0], a[1]});
      j["anchors"] = arr;
      break;
    }
    case MapSpec::Kind::sampled:
      j["type"] = "sampled";
      j["values"] = m.values;
      if (!m.jac.empty()) j["jacobian"] = m.jac;
      break;
  }
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
  try {
    check_keys(j,
               {"schema", "grid", "kind", "alpha", "beta", "c1", "c2", "marginals", "map", "kernel",
                "solver", "hk", "output", "seed"},
               "config");
    if (str(j, "schema", "") != "usot-config/1") bad("schema must be \"usot-config/1\"");
    if (!j.contains("grid")) bad("missing grid");

    ExperimentConfig c;
    const json& jg = j.at("grid");
    check_keys(jg, {"dim", "M", "N", "Q"}, "grid");
    c.grid.dim = num_int(jg, "dim", 1);
    if (!jg.contains("M") || !jg.contains("Q")) bad("grid needs M and Q");
    c.grid.M = jg.at("M").get<int>();
    c.grid.Q = jg.at("Q").get<int>();
    c.grid.N = num_int(jg, "N", c.grid.dim == 2 ? c.grid.M : 1);
    c.grid.validate();

    const std::string kind = str(j, "kind", "wfr");
    if (kind == "wfr")
      c.kind = ProblemKind::wfr;
    else if (kind == "monge")
      c.kind = ProblemKind::monge;
    else if (kind == "kantorovich")
      c.kind = ProblemKind::kantorovich;
    else
      bad("kind must be wfr|monge|kantorovich");

    c.alpha = num(j, "alpha", 1.0);
    c.beta = num(j, "beta", 1.0);
    c.c1 = num(j, "c1", 1.0);
    c.c2 = num(j, "c2", 0.0);

    if (j.contains("marginals")) {
      const json& jm = j.at("marginals");
      check_keys(jm, {"mu", "nu"}, "marginals");
      if (!jm.contains("mu") || !jm.contains("nu")) bad("marginals need mu and nu");
      c.mu = parse_marginal(jm.at("mu"), "marginals.mu");
      c.nu = parse_marginal(jm.at("nu"), "marginals.nu");
    } else {
      bad("missing marginals");
    }

    if (j.contains("map")) {
      c.map = parse_map(j.at("map"));
      c.has_map = true;
    }
    if (j.contains("kernel")) {
      const json& jk = j.at("kernel");
      check_keys(jk, {"type", "file"}, "kernel");
      const std::string type = str(jk, "type", jk.contains("file") ? "file" : "");
      if (type == "identity") {
        c.kernel_source = ExperimentConfig::KernelSource::identity;
      } else if (type == "file") {
        if (!jk.contains("file")) bad("kernel type file needs a path");
        c.kernel_source = ExperimentConfig::KernelSource::file;
        c.kernel_file = jk.at("file").get<std::string>();
      } else {
        bad("kernel type must be identity|file");
      }
    }

    if (j.contains("solver")) {
      const json& js = j.at("solver");
      check_keys(js,
                 {"tau", "sigma", "max_iters", "stop_tol", "stop_window", "residual_tol",
                  "grad_step_safety", "constraint_form", "divergence_factor"},
                 "solver");
      c.solver.tau = num(js, "tau", 0.0);
      c.solver.sigma = num(js, "sigma", 0.0);
      c.solver.max_iters = num_int(js, "max_iters", 20000);
      c.solver.stop_tol = num(js, "stop_tol", 1e-6);
      c.solver.stop_window = num_int(js, "stop_window", 50);
      c.solver.residual_tol = num(js, "residual_tol", 1e-8);
      c.solver.grad_step_safety = num(js, "grad_step_safety", 0.5);
      c.solver.divergence_factor = num(js, "divergence_factor", 1e3);
      const std::string form = str(js, "constraint_form", "paper");
      if (form == "paper")
        c.solver.form = ConstraintForm::paper;
      else if (form == "continuity")
        c.solver.form = ConstraintForm::continuity;
      else
        bad("constraint_form must be paper|continuity");
    }

    c.hk.tol = 1e-6;
    if (j.contains("hk")) {
      const json& jh = j.at("hk");
      check_keys(jh, {"epsilon", "epsilon_scale", "anneal", "tol", "max_sweeps"}, "hk");
      c.hk.epsilon = num(jh, "epsilon", 0.0);
      c.hk.epsilon_scale = num(jh, "epsilon_scale", 0.0);
      c.hk.anneal = num_int(jh, "anneal", 4);
      // value error is quadratic in the certified marginal violation, so 1e-6 already gives
      // sub-nano values; inner solves inside solve_yan would burn most of the wall time at 1e-8
      c.hk.tol = num(jh, "tol", 1e-6);
      c.hk.max_sweeps = num_int(jh, "max_sweeps", 5000);
    }

    if (j.contains("output")) {
      const json& jo = j.at("output");
      check_keys(jo, {"dir", "emit_frames"}, "output");
      c.output.dir = str(jo, "dir", "out");
      if (jo.contains("emit_frames")) c.output.emit_frames = jo.at("emit_frames").get<bool>();
    }
    c.seed = j.contains("seed") ? j.at("seed").get<uint64_t>() : 0;

    if (c.kind == ProblemKind::monge && !c.has_map) bad("monge needs a map");
    if (c.kind == ProblemKind::kantorovich &&
        c.kernel_source == ExperimentConfig::KernelSource::none)
      bad("kantorovich needs a kernel");

    // wire the ready-to-run solver config
    c.solver.kind = c.kind;
    c.solver.alpha = c.alpha;
    c.solver.beta = c.beta;
    c.solver.c1 = c.c1;
    c.solver.c2 = c.c2;
    c.solver.seed = c.seed != 0 ? c.seed : 1234;
    c.solver.hk.epsilon = c.hk.epsilon;
    c.solver.hk.epsilon_scale = c.hk.epsilon_scale > 0 ? c.hk.epsilon_scale : 1e-2;
    c.solver.hk.anneal = c.hk.anneal;
    c.solver.hk.tol = c.hk.tol;
    c.solver.hk.max_sweeps = c.hk.max_sweeps;
    return c;
  } catch (const json::exception& e) {
    bad(std::string("invalid value: ") + e.what());
  }
}

std::string resolved_config_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = "usot-config/1";
  j["grid"] = {{"dim", c.grid.dim}, {"M", c.grid.M}, {"N", c.grid.N}, {"Q", c.grid.Q}};
  j["kind"] = c.kind == ProblemKind::wfr      ? "wfr"
              : c.kind == ProblemKind::monge ? "monge"
                                             : "kantorovich";
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["marginals"] = {{"mu", marginal_json(c.mu)}, {"nu", marginal_json(c.nu)}};
  if (c.has_map) j["map"] = map_json(c.map);
  if (c.kernel_source == ExperimentConfig::KernelSource::identity) {
    j["kernel"] = {{"type", "identity"}};
  } else if (c.kernel_source == ExperimentConfig::KernelSource::file) {
    j["kernel"] = {{"type", "file"}, {"file", c.kernel_file}};
  }
  j["solver"] = {{"tau", c.solver.tau},
                 {"sigma", c.solver.sigma},
                 {"max_iters", c.solver.max_iters},
                 {"stop_tol", c.solver.stop_tol},
                 {"stop_window", c.solver.stop_window},
                 {"residual_tol", c.solver.residual_tol},
                 {"grad_step_safety", c.solver.grad_step_safety},
                 {"constraint_form",
                  c.solver.form == ConstraintForm::paper ? "paper" : "continuity"},
                 {"divergence_factor", c.solver.divergence_factor}};
  j["hk"] = {{"epsilon", c.hk.epsilon},
             {"epsilon_scale", c.hk.epsilon_scale},
             {"anneal", c.hk.anneal},
             {"tol", c.hk.tol},
             {"max_sweeps", c.hk.max_sweeps}};
  j["output"] = {{"dir", c.output.dir}, {"emit_frames", c.output.emit_frames}};
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

std::vector<double> build_marginal(const MarginalConfig& m, const GridSpec& g,
                                   const std::string& base_dir) {
  if (!m.file.empty()) {
    const DensityFile d = read_density(resolve_path(m.file, base_dir));
    if (d.dim != g.dim || d.M != g.M || d.N != g.N)
      bad("density file does not match the grid: " + m.file);
    for (double v : d.rho)
      if (v < 0) bad("density file has negative entries: " + m.file);
    return d.rho;
  }
  std::vector<double> rho(static_cast<size_t>(g.spatial_cells()), 0.0);
  for (const GaussianSpec& spec : m.gaussians) {
    const std::vector<double> one = truncated_gaussian(g, spec);
    for (size_t i = 0; i < rho.size(); ++i) rho[i] += one[i];
  }
  return rho;
}

MarkovKernel build_kernel(const ExperimentConfig& c, const std::string& base_dir) {
  if (c.kernel_source == ExperimentConfig::KernelSource::identity)
    return identity_kernel(c.grid, c.has_map ? &c.map : nullptr);
  if (c.kernel_source == ExperimentConfig::KernelSource::file) {
    MarkovKernel K = read_kernel(resolve_path(c.kernel_file, base_dir));
    if (K.rows != c.grid.spatial_cells()) bad("kernel rows do not match the grid");
    if (std::abs(K.cell_volume - c.grid.spatial_volume()) >
        1e-12 * std::max(1.0, c.grid.spatial_volume()))
      bad("kernel cell_volume was built for a different grid");
    return K;
  }
  bad("no kernel configured");
}

}  // namespace usot
