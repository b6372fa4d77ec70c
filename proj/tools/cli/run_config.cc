#include "run_config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace safete::cli {
namespace {

using nlohmann::json;

void CheckObject(const json& j, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected a JSON object");
}

void CheckKeys(const json& j, const std::set<std::string>& allowed,
               const std::string& where) {
  CheckObject(j, where);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw InputError("unknown key '" + key + "' in " + where);
    }
  }
}

double GetNumber(const json& j, const std::string& key,
                 const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw InputError(where + "." + key + ": expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw InputError(where + "." + key + ": not finite");
  return d;
}

int GetInt(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw InputError(where + "." + key + ": expected an integer");
  }
  return v.get<int>();
}

bool GetBool(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_boolean()) throw InputError(where + "." + key + ": expected a boolean");
  return v.get<bool>();
}

std::string GetString(const json& j, const std::string& key,
                      const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_string()) throw InputError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> GetNumbers(const json& j, const std::string& key,
                               const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_array()) throw InputError(where + "." + key + ": expected an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) {
      throw InputError(where + "." + key + ": expected an array of numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

fs::path Resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

DemandSource ParseDemands(const json& j, const fs::path& base) {
  const std::string where = "demands";
  CheckKeys(j, {"file", "gravity", "history"}, where);
  if (j.size() != 1) {
    throw InputError("demands: exactly one of file, gravity, history");
  }
  DemandSource d;
  if (j.contains("file")) {
    d.kind = DemandSource::Kind::kFile;
    d.file = Resolve(base, GetString(j, "file", where));
  } else if (j.contains("history")) {
    d.kind = DemandSource::Kind::kHistory;
    d.history_dir = Resolve(base, GetString(j, "history", where));
  } else {
    d.kind = DemandSource::Kind::kGravity;
    const json& g = j.at("gravity");
    CheckKeys(g, {"masses", "total_gbps"}, "demands.gravity");
    if (g.contains("masses")) d.masses = GetNumbers(g, "masses", "demands.gravity");
    if (g.contains("total_gbps")) {
      d.total_gbps = GetNumber(g, "total_gbps", "demands.gravity");
    }
    if (!(d.total_gbps >= 0.0)) {
      throw InputError("demands.gravity.total_gbps must be >= 0");
    }
  }
  return d;
}

PerturbationConfig ParsePerturbation(const json& j, const fs::path& base) {
  const std::string where = "perturbation";
  CheckKeys(j, {"model", "sigma", "deviations", "shared"}, where);
  PerturbationConfig p;
  if (j.contains("model")) {
    const std::string m = GetString(j, "model", where);
    if (m == "parametric") {
      p.kind = PerturbationConfig::Kind::kParametric;
    } else if (m == "empirical") {
      p.kind = PerturbationConfig::Kind::kEmpirical;
    } else if (m == "none") {
      p.kind = PerturbationConfig::Kind::kNone;
    } else {
      throw InputError("perturbation.model: unknown model '" + m + "'");
    }
  }
  if (j.contains("sigma")) p.sigma = GetNumber(j, "sigma", where);
  if (j.contains("deviations")) {
    p.deviations = Resolve(base, GetString(j, "deviations", where));
  }
  if (j.contains("shared")) p.shared = GetBool(j, "shared", where);
  if (p.kind == PerturbationConfig::Kind::kParametric &&
      !(p.sigma > 0.0 && p.sigma <= 1.0)) {
    throw InputError("perturbation.sigma must be in (0, 1]");
  }
  if (p.kind == PerturbationConfig::Kind::kEmpirical && p.deviations.empty()) {
    throw InputError("perturbation: empirical model needs a deviations file");
  }
  return p;
}

SlicingSource ParseSlicing(const json& j, const fs::path& base) {
  const std::string where = "slicing";
  CheckKeys(j,
            {"slices", "file", "index", "k", "sizes", "epsilon", "max_retries",
             "candidates", "max_runs", "weights"},
            where);
  SlicingSource s;
  if (j.contains("slices")) {
    const json& v = j.at("slices");
    if (!v.is_array()) throw InputError("slicing.slices: expected an array");
    for (const auto& slice : v) {
      if (!slice.is_array()) {
        throw InputError("slicing.slices: expected arrays of node ids");
      }
      std::vector<NodeId> nodes;
      for (const auto& n : slice) {
        if (!n.is_number_integer()) {
          throw InputError("slicing.slices: node ids must be integers");
        }
        nodes.push_back(n.get<NodeId>());
      }
      s.slices.push_back(std::move(nodes));
    }
  }
  if (j.contains("file")) s.file = Resolve(base, GetString(j, "file", where));
  if (j.contains("index")) s.index = GetInt(j, "index", where);
  if (j.contains("k")) s.k = GetInt(j, "k", where);
  if (!s.slices.empty() && s.k == 0) s.k = static_cast<int>(s.slices.size());
  if (j.contains("sizes")) {
    for (double v : GetNumbers(j, "sizes", where)) {
      if (v != std::floor(v)) throw InputError("slicing.sizes must be integers");
      s.sizes.push_back(static_cast<int>(v));
    }
  }
  if (j.contains("epsilon")) s.epsilon = GetNumber(j, "epsilon", where);
  if (j.contains("max_retries")) s.max_retries = GetInt(j, "max_retries", where);
  if (j.contains("candidates")) s.candidates = GetInt(j, "candidates", where);
  if (j.contains("max_runs")) s.max_runs = GetInt(j, "max_runs", where);
  if (j.contains("weights")) {
    s.weights = ParseWeightMode(GetString(j, "weights", where));
  }
  if (s.k != 0 && s.k < 2) throw InputError("slicing.k must be >= 2");
  if (!s.slices.empty() && s.k != static_cast<int>(s.slices.size())) {
    throw InputError("slicing.k does not match the number of slices given");
  }
  if (s.index < 0) throw InputError("slicing.index must be >= 0");
  if (s.candidates < 1) throw InputError("slicing.candidates must be >= 1");
  if (!(s.epsilon >= 0.0)) throw InputError("slicing.epsilon must be >= 0");
  if (s.max_retries < 1) throw InputError("slicing.max_retries must be >= 1");
  return s;
}

PathConfig ParsePaths(const json& j, const fs::path& base) {
  const std::string where = "te.paths";
  CheckKeys(j, {"strategy", "k", "cache"}, where);
  PathConfig p;
  if (j.contains("strategy")) {
    const std::string s = GetString(j, "strategy", where);
    if (s == "k_shortest") {
      p.strategy = PathStrategy::kKShortest;
    } else if (s == "edge_disjoint") {
      p.strategy = PathStrategy::kEdgeDisjoint;
    } else {
      throw InputError("te.paths.strategy: unknown strategy '" + s + "'");
    }
  }
  if (j.contains("k")) p.k = GetInt(j, "k", where);
  if (p.k < 1) throw InputError("te.paths.k must be >= 1");
  if (j.contains("cache")) p.cache = Resolve(base, GetString(j, "cache", where));
  return p;
}

TeConfig ParseTe(const json& j, const fs::path& base) {
  const std::string where = "te";
  CheckKeys(j,
            {"objective", "lambda", "paths", "pruning", "normalize_capacity",
             "phantom"},
            where);
  TeConfig t;
  if (j.contains("objective")) {
    t.objective = ParseObjective(GetString(j, "objective", where));
  }
  t.lambda = j.contains("lambda") ? GetNumber(j, "lambda", where)
                                  : DefaultLambda(t.objective);
  if (t.lambda < 0.0) throw InputError("te.lambda must be >= 0");
  if (j.contains("paths")) t.paths = ParsePaths(j.at("paths"), base);
  if (j.contains("pruning")) {
    const json& p = j.at("pruning");
    CheckKeys(p, {"divergence_free", "beta"}, "te.pruning");
    if (p.contains("divergence_free")) {
      t.divergence_free = GetBool(p, "divergence_free", "te.pruning");
    }
    if (p.contains("beta") && !p.at("beta").is_null()) {
      t.beta = GetNumber(p, "beta", "te.pruning");
      if (*t.beta < 0.0) throw InputError("te.pruning.beta must be >= 0");
    }
  }
  if (j.contains("normalize_capacity")) {
    t.normalize_capacity = GetBool(j, "normalize_capacity", where);
  }
  if (j.contains("phantom")) {
    const json& p = j.at("phantom");
    CheckKeys(p, {"enabled", "lambda_prime", "capacity_gbps"}, "te.phantom");
    if (p.contains("enabled")) t.phantom.enabled = GetBool(p, "enabled", "te.phantom");
    if (p.contains("lambda_prime")) {
      t.phantom.lambda_prime = GetNumber(p, "lambda_prime", "te.phantom");
    }
    if (p.contains("capacity_gbps")) {
      t.phantom.capacity_gbps = GetNumber(p, "capacity_gbps", "te.phantom");
      if (!(t.phantom.capacity_gbps > 0.0)) {
        throw InputError("te.phantom.capacity_gbps must be > 0");
      }
    }
  }
  return t;
}

TESolveOptions ParseSolver(const json& j) {
  const std::string where = "solver";
  CheckKeys(j,
            {"kind", "eps_abs", "eps_rel", "eps_prim_inf", "eps_dual_inf",
             "max_iterations", "rho", "sigma", "alpha", "adaptive_rho",
             "adaptive_rho_interval", "scaling_iterations", "polish",
             "polish_interval", "polish_rounds", "simplex_max_iterations"},
            where);
  TESolveOptions s;
  QpOptions& q = s.qp;
  if (j.contains("kind")) {
    const std::string k = GetString(j, "kind", where);
    if (k == "auto") {
      s.kind = SolverKind::kAuto;
    } else if (k == "simplex") {
      s.kind = SolverKind::kSimplex;
    } else if (k == "qp") {
      s.kind = SolverKind::kQp;
    } else {
      throw InputError("solver.kind: unknown kind '" + k + "'");
    }
  }
  auto positive = [&](const char* key, double* out) {
    if (!j.contains(key)) return;
    *out = GetNumber(j, key, where);
    if (!(*out > 0.0)) throw InputError(std::string("solver.") + key + " must be > 0");
  };
  auto positive_int = [&](const char* key, int* out) {
    if (!j.contains(key)) return;
    *out = GetInt(j, key, where);
    if (*out < 0) throw InputError(std::string("solver.") + key + " must be >= 0");
  };
  positive("eps_abs", &q.eps_abs);
  positive("eps_rel", &q.eps_rel);
  positive("eps_prim_inf", &q.eps_prim_inf);
  positive("eps_dual_inf", &q.eps_dual_inf);
  positive("rho", &q.rho);
  positive("sigma", &q.sigma);
  positive("alpha", &q.alpha);
  if (q.alpha >= 2.0) throw InputError("solver.alpha must be in (0, 2)");
  positive_int("max_iterations", &q.max_iterations);
  positive_int("adaptive_rho_interval", &q.adaptive_rho_interval);
  positive_int("scaling_iterations", &q.scaling_iterations);
  positive_int("polish_interval", &q.polish_interval);
  positive_int("polish_rounds", &q.polish_rounds);
  positive_int("simplex_max_iterations", &s.simplex.max_iterations);
  if (q.max_iterations < 1) throw InputError("solver.max_iterations must be >= 1");
  if (q.adaptive_rho_interval < 1) {
    throw InputError("solver.adaptive_rho_interval must be >= 1");
  }
  if (j.contains("adaptive_rho")) q.adaptive_rho = GetBool(j, "adaptive_rho", where);
  if (j.contains("polish")) q.polish = GetBool(j, "polish", where);
  return s;
}

}  // namespace

RunConfig ParseRunConfig(const json& root, const fs::path& base_dir) {
  CheckKeys(root,
            {"topology", "demands", "perturbation", "slicing", "te", "solver",
             "iterations", "seed", "output", "lambdas", "permutation_cap"},
            "config");
  RunConfig c;
  if (!root.contains("topology")) throw InputError("config: missing 'topology'");
  c.topology = Resolve(base_dir, GetString(root, "topology", "config"));
  if (!root.contains("demands")) throw InputError("config: missing 'demands'");
  c.demands = ParseDemands(root.at("demands"), base_dir);
  if (root.contains("perturbation")) {
    c.perturbation = ParsePerturbation(root.at("perturbation"), base_dir);
  }
  if (root.contains("slicing")) c.slicing = ParseSlicing(root.at("slicing"), base_dir);
  if (root.contains("te")) c.te = ParseTe(root.at("te"), base_dir);
  if (root.contains("solver")) c.solve = ParseSolver(root.at("solver"));
  if (root.contains("iterations")) c.iterations = GetInt(root, "iterations", "config");
  if (c.iterations < 1) throw InputError("config.iterations must be >= 1");
  if (root.contains("seed")) {
    const json& v = root.at("seed");
    if (!v.is_number_unsigned()) {
      throw InputError("config.seed: expected a non-negative integer");
    }
    c.seed = v.get<uint64_t>();
  }
  if (root.contains("output")) {
    c.output = Resolve(base_dir, GetString(root, "output", "config"));
  } else {
    c.output = base_dir / "out";
  }
  if (root.contains("lambdas")) {
    c.lambdas = GetNumbers(root, "lambdas", "config");
    for (double l : c.lambdas) {
      if (!(l >= 0.0)) throw InputError("config.lambdas must be >= 0");
    }
  }
  if (root.contains("permutation_cap")) {
    c.permutation_cap = GetInt(root, "permutation_cap", "config");
    if (c.permutation_cap < 1) throw InputError("config.permutation_cap must be >= 1");
  }
  return c;
}

RunConfig LoadRunConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json root;
  try {
    root = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  fs::path base = path.parent_path();
  if (base.empty()) base = ".";
  return ParseRunConfig(root, base);
}

}  // namespace safete::cli
