#include "safete/formulation.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace safete {
namespace {

std::string Num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Incidence restricted to the included w variables, as path flows:
// column k carries 1/c_e on the links of path_of_var[k].
SparseMatrix FlowIncidence(const TEInstance& inst) {
  std::vector<Eigen::Triplet<double>> trip;
  const auto& topo = *inst.topology;
  for (Eigen::Index k = 0; k < inst.num_w(); ++k) {
    const Path& path = inst.paths->paths()[inst.path_of_var[k]];
    for (LinkId e : path.links) {
      trip.emplace_back(e, static_cast<int>(k), 1.0 / topo.link(e).capacity_gbps);
    }
  }
  SparseMatrix a(inst.num_links(), inst.num_w());
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

void ComputePhantoms(TEInstance* inst) {
  inst->phantom_count = 0;
  inst->phantom_vars.clear();
  inst->lambda_prime = 0.0;
  if (!inst->phantom.enabled || inst->num_w() == 0) return;
  inst->lambda_prime = inst->phantom.lambda_prime >= 0.0
                           ? inst->phantom.lambda_prime
                           : inst->lambda * 1e-6;
  PhantomAugmentation aug = AddPhantomEdges(
      FlowIncidence(*inst), inst->lambda_prime, inst->phantom.capacity_gbps);
  inst->phantom_count = aug.phantom_count;
  inst->phantom_vars = aug.phantom_columns;
}

// Builds the StandardProblem from the instance metadata.
void Assemble(TEInstance* inst) {
  const auto& topo = *inst->topology;
  const Eigen::Index nw = inst->num_w();
  const Eigen::Index ne = inst->num_links();
  const Eigen::Index nc = static_cast<Eigen::Index>(inst->commodities.size());
  const bool mt = inst->objective == TEObjective::kMt;
  const bool mcf = inst->objective == TEObjective::kMcf;
  const bool mmlu = inst->objective == TEObjective::kMmlu;
  const Eigen::Index extra = inst->extra_var();
  const Eigen::Index ph = inst->phantom_count;
  const Eigen::Index n = inst->phantom_offset() + ph;
  const bool capacity_rows = !mmlu && !inst->normalize_capacity;

  Eigen::Index rows = nc + ne;
  const Eigen::Index cap_row0 = rows;
  if (capacity_rows) rows += ne;
  const Eigen::Index z_row0 = rows;
  if (mmlu) rows += ne;
  const Eigen::Index ph_row0 = rows;
  rows += ph;

  StandardProblem& p = inst->problem;
  p = StandardProblem{};
  p.q = Vector::Zero(n);
  p.var_lower = Vector::Constant(n, -kInf);
  p.var_upper = Vector::Constant(n, kInf);
  p.row_lower = Vector::Constant(rows, -kInf);
  p.row_upper = Vector::Constant(rows, kInf);

  std::vector<Eigen::Triplet<double>> g;
  std::vector<int> commodity_of_var(nw);
  // w variables are grouped per commodity in path_of_var order.
  {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < nc; ++i) {
      auto [first, last] = inst->paths->PathRange(inst->commodity_index[i]);
      for (int pidx = first; pidx < last; ++pidx, ++k) {
        commodity_of_var[k] = static_cast<int>(i);
      }
    }
  }
  for (Eigen::Index k = 0; k < nw; ++k) {
    const int i = commodity_of_var[k];
    const double d = inst->demands[i];
    p.var_lower(k) = 0.0;
    g.emplace_back(i, static_cast<int>(k), 1.0);
    const Path& path = inst->paths->paths()[inst->path_of_var[k]];
    for (LinkId e : path.links) {
      const double c = topo.link(e).capacity_gbps;
      g.emplace_back(static_cast<int>(nc + e), static_cast<int>(k), d / c);
      if (capacity_rows) {
        g.emplace_back(static_cast<int>(cap_row0 + e), static_cast<int>(k), d);
      }
    }
    if (mt) p.q(k) = -d;
  }
  // Demand rows.
  for (Eigen::Index i = 0; i < nc; ++i) {
    if (mt) {
      p.row_upper(i) = 1.0;
    } else if (mcf) {
      g.emplace_back(static_cast<int>(i), static_cast<int>(extra), -1.0);
      p.row_lower(i) = 0.0;
      p.row_upper(i) = 0.0;
    } else {
      p.row_lower(i) = 1.0;
      p.row_upper(i) = 1.0;
    }
  }
  if (mt) {
    double total = 0.0;
    for (double d : inst->demands) total += d;
    p.objective_offset = total;
  }
  // u definitions and capacity / max rows.
  for (Eigen::Index e = 0; e < ne; ++e) {
    const int u = static_cast<int>(nw + e);
    g.emplace_back(static_cast<int>(nc + e), u, -1.0);
    p.row_lower(nc + e) = 0.0;
    p.row_upper(nc + e) = 0.0;
    if (capacity_rows) p.row_upper(cap_row0 + e) = topo.link(e).capacity_gbps;
    if (!mmlu && inst->normalize_capacity) p.var_upper(u) = 1.0;
    if (mmlu) {
      g.emplace_back(static_cast<int>(z_row0 + e), static_cast<int>(extra), 1.0);
      g.emplace_back(static_cast<int>(z_row0 + e), u, -1.0);
      p.row_lower(z_row0 + e) = 0.0;
    }
  }
  if (mcf) {
    p.q(extra) = -1.0;
    p.var_lower(extra) = 0.0;
    p.var_upper(extra) = 1.0;
  } else if (mmlu) {
    p.q(extra) = 1.0;
  }
  // Phantom rows: u'_h = (d_i / capacity) w_k.
  for (Eigen::Index h = 0; h < ph; ++h) {
    const int k = inst->phantom_vars[h];
    const double d = inst->demands[commodity_of_var[k]];
    const int row = static_cast<int>(ph_row0 + h);
    const int var = static_cast<int>(inst->phantom_offset() + h);
    g.emplace_back(row, k, d / inst->phantom.capacity_gbps);
    g.emplace_back(row, var, -1.0);
    p.row_lower(row) = 0.0;
    p.row_upper(row) = 0.0;
  }
  p.G.resize(rows, n);
  p.G.setFromTriplets(g.begin(), g.end());
  p.G.makeCompressed();

  std::vector<Eigen::Triplet<double>> quad;
  if (inst->lambda > 0.0) {
    for (Eigen::Index e = 0; e < ne; ++e) {
      if (inst->mask[e]) {
        quad.emplace_back(static_cast<int>(nw + e), static_cast<int>(nw + e),
                          2.0 * inst->lambda);
      }
    }
  }
  if (inst->lambda_prime > 0.0) {
    for (Eigen::Index h = 0; h < ph; ++h) {
      const int var = static_cast<int>(inst->phantom_offset() + h);
      quad.emplace_back(var, var, 2.0 * inst->lambda_prime);
    }
  }
  p.P.resize(n, n);
  p.P.setFromTriplets(quad.begin(), quad.end());
  p.P.makeCompressed();
}

}  // namespace

const char* ToString(TEObjective objective) {
  switch (objective) {
    case TEObjective::kMt:
      return "mt";
    case TEObjective::kMcf:
      return "mcf";
    case TEObjective::kMmlu:
      return "mmlu";
  }
  return "unknown";
}

TEObjective ParseObjective(const std::string& text) {
  std::string s;
  for (char c : text) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "mt") return TEObjective::kMt;
  if (s == "mcf") return TEObjective::kMcf;
  if (s == "mmlu") return TEObjective::kMmlu;
  throw InputError("unknown TE objective '" + text + "'");
}

double DefaultLambda(TEObjective objective) {
  return objective == TEObjective::kMt ? 1.0 : 1e-4;
}

size_t TEInstance::mask_size() const {
  return static_cast<size_t>(std::count(mask.begin(), mask.end(), true));
}

TEInstance BuildInstance(std::shared_ptr<const Topology> topology,
                         std::shared_ptr<const PathSet> paths,
                         const DemandMatrix& demands,
                         const FormulationOptions& options) {
  if (!topology || !paths) throw InputError("instance needs topology and paths");
  if (!(options.lambda >= 0.0) || !std::isfinite(options.lambda)) {
    throw InputError("lambda must be finite and >= 0");
  }
  TEInstance inst;
  inst.objective = options.objective;
  inst.lambda = options.lambda;
  inst.normalize_capacity =
      options.normalize_capacity && options.objective != TEObjective::kMmlu;
  inst.mask.assign(topology->num_links(), true);
  for (LinkId e : options.pruned) {
    if (e < 0 || static_cast<size_t>(e) >= topology->num_links()) {
      throw InputError("pruned link " + std::to_string(e) + " out of range");
    }
    inst.mask[e] = false;
  }
  inst.topology = topology;
  inst.paths = paths;
  inst.phantom = options.phantom;

  for (const auto& [c, d] : demands.entries()) {
    if (d <= 0.0) continue;
    const int ci = paths->CommodityIndex(c);
    if (ci < 0) {
      inst.disconnected.push_back(c);
      continue;
    }
    auto [first, last] = paths->PathRange(ci);
    if (first == last) {
      inst.disconnected.push_back(c);
      continue;
    }
    inst.commodities.push_back(c);
    inst.demands.push_back(d);
    inst.commodity_index.push_back(ci);
    for (int p = first; p < last; ++p) inst.path_of_var.push_back(p);
  }
  ComputePhantoms(&inst);
  Assemble(&inst);
  return inst;
}

TEInstance BuildMt(std::shared_ptr<const Topology> topology,
                   std::shared_ptr<const PathSet> paths,
                   const DemandMatrix& demands, double lambda, LinkSet pruned,
                   bool normalize) {
  FormulationOptions o;
  o.objective = TEObjective::kMt;
  o.lambda = lambda;
  o.pruned = std::move(pruned);
  o.normalize_capacity = normalize;
  return BuildInstance(std::move(topology), std::move(paths), demands, o);
}

TEInstance BuildMcf(std::shared_ptr<const Topology> topology,
                    std::shared_ptr<const PathSet> paths,
                    const DemandMatrix& demands, double lambda, LinkSet pruned,
                    bool normalize) {
  FormulationOptions o;
  o.objective = TEObjective::kMcf;
  o.lambda = lambda;
  o.pruned = std::move(pruned);
  o.normalize_capacity = normalize;
  return BuildInstance(std::move(topology), std::move(paths), demands, o);
}

TEInstance BuildMmlu(std::shared_ptr<const Topology> topology,
                     std::shared_ptr<const PathSet> paths,
                     const DemandMatrix& demands, double lambda,
                     LinkSet pruned) {
  FormulationOptions o;
  o.objective = TEObjective::kMmlu;
  o.lambda = lambda;
  o.pruned = std::move(pruned);
  return BuildInstance(std::move(topology), std::move(paths), demands, o);
}

TEInstance ApplyPruning(const TEInstance& instance, const LinkSet& prune) {
  TEInstance out = instance;
  for (LinkId e : prune) {
    if (e < 0 || e >= out.num_links()) {
      throw InputError("pruned link " + std::to_string(e) + " out of range");
    }
    out.mask[e] = false;
  }
  Assemble(&out);
  return out;
}

TEInstance NormalizeCapacity(const TEInstance& instance) {
  if (instance.objective == TEObjective::kMmlu || instance.normalize_capacity) {
    return instance;
  }
  TEInstance out = instance;
  out.normalize_capacity = true;
  Assemble(&out);
  return out;
}

LinkSet DivergenceFreeLinks(const Topology& topology, const PathSet& paths,
                            const SlicingConfig& slicing) {
  std::vector<int> slice_of_link(topology.num_links(), -1);
  std::vector<bool> mixed(topology.num_links(), false);
  for (const Path& path : paths.paths()) {
    const int s = slicing.SliceOf(path.src());
    for (LinkId e : path.links) {
      if (slice_of_link[e] < 0) {
        slice_of_link[e] = s;
      } else if (slice_of_link[e] != s) {
        mixed[e] = true;
      }
    }
  }
  LinkSet out;
  for (size_t e = 0; e < topology.num_links(); ++e) {
    if (!mixed[e]) out.insert(static_cast<LinkId>(e));
  }
  return out;
}

LinkSet BetaConstrainedLinks(const Topology& topology,
                             const DemandHistory& history,
                             const PathSet& paths, double beta) {
  if (history.empty()) throw InputError("beta pruning needs a demand history");
  if (!(beta > 0.0)) throw InputError("beta must be positive");
  DemandMatrix peak = history.MaxMatrix();
  std::vector<double> bound(topology.num_links(), 0.0);
  for (size_t ci = 0; ci < paths.num_commodities(); ++ci) {
    const double d = peak.Get(paths.commodities()[ci]);
    if (d <= 0.0) continue;
    auto [first, last] = paths.PathRange(static_cast<int>(ci));
    std::set<LinkId> used;
    for (int p = first; p < last; ++p) {
      for (LinkId e : paths.paths()[p].links) used.insert(e);
    }
    for (LinkId e : used) bound[e] += d;
  }
  LinkSet out;
  for (size_t e = 0; e < topology.num_links(); ++e) {
    if (bound[e] / topology.link(e).capacity_gbps <= beta) {
      out.insert(static_cast<LinkId>(e));
    }
  }
  return out;
}

TESolution SolveInstance(const TEInstance& instance,
                         const TESolveOptions& options) {
  TESolution sol;
  const bool quadratic = instance.problem.HasQuadratic();
  SolverKind kind = options.kind;
  if (kind == SolverKind::kAuto) {
    kind = quadratic ? SolverKind::kQp : SolverKind::kSimplex;
  }
  if (kind == SolverKind::kSimplex && quadratic) {
    throw InputError("simplex cannot solve a regularized instance");
  }
  sol.raw = kind == SolverKind::kSimplex
                ? SolveLpSimplex(instance.problem, options.simplex)
                : SolveQp(instance.problem, options.qp);
  sol.status = sol.raw.status;
  const auto& topo = *instance.topology;
  const size_t np = instance.paths->num_paths();
  sol.weights.assign(np, 0.0);
  sol.path_flows.assign(np, 0.0);
  sol.link_loads.assign(topo.num_links(), 0.0);
  sol.utilization.assign(topo.num_links(), 0.0);
  if (sol.raw.x.size() != instance.problem.num_vars()) return sol;
  sol.objective_value = sol.raw.objective_value;
  Eigen::Index k = 0;
  for (size_t i = 0; i < instance.commodities.size(); ++i) {
    auto [first, last] = instance.paths->PathRange(instance.commodity_index[i]);
    const double d = instance.demands[i];
    for (int p = first; p < last; ++p, ++k) {
      const double w = std::max(0.0, sol.raw.x(k));
      sol.weights[p] = w;
      sol.path_flows[p] = w * d;
      sol.throughput += w * d;
      for (LinkId e : instance.paths->paths()[p].links) {
        sol.link_loads[e] += w * d;
      }
    }
  }
  for (size_t e = 0; e < topo.num_links(); ++e) {
    sol.utilization[e] = sol.link_loads[e] / topo.link(e).capacity_gbps;
    sol.mlu = std::max(sol.mlu, sol.utilization[e]);
  }
  if (instance.objective == TEObjective::kMcf) {
    sol.gamma = sol.raw.x(instance.extra_var());
  }
  return sol;
}

std::string DumpInstance(const TEInstance& inst) {
  std::ostringstream out;
  const auto& topo = *inst.topology;
  const StandardProblem& p = inst.problem;
  out << "instance objective " << ToString(inst.objective) << " lambda "
      << Num(inst.lambda) << " normalize " << (inst.normalize_capacity ? 1 : 0)
      << " commodities " << inst.commodities.size() << " vars "
      << p.num_vars() << " rows " << p.num_rows() << " mask "
      << inst.mask_size() << " phantoms " << inst.phantom_count << "\n";
  for (const Commodity& c : inst.disconnected) {
    out << "disconnected " << c.src << "->" << c.dst << "\n";
  }
  auto var_name = [&](Eigen::Index j) {
    std::ostringstream s;
    if (j < inst.num_w()) {
      const Path& path = inst.paths->paths()[inst.path_of_var[j]];
      s << "w[" << inst.path_of_var[j] << ":";
      for (size_t h = 0; h < path.nodes.size(); ++h) {
        s << (h ? "-" : "") << path.nodes[h];
      }
      s << "]";
    } else if (j < inst.num_w() + inst.num_links()) {
      const auto e = static_cast<LinkId>(j - inst.num_w());
      s << "u[" << e << ":" << topo.link(e).src << "->" << topo.link(e).dst
        << "]";
    } else if (j == inst.extra_var()) {
      s << (inst.objective == TEObjective::kMcf ? "gamma" : "Z");
    } else {
      s << "phantom[" << j - inst.phantom_offset() << "]";
    }
    return s.str();
  };
  for (Eigen::Index j = 0; j < p.num_vars(); ++j) {
    out << "var " << j << " " << var_name(j) << " [" << Num(p.var_lower(j))
        << ", " << Num(p.var_upper(j)) << "]\n";
  }
  out << "objective constant " << Num(p.objective_offset) << "\n";
  for (Eigen::Index j = 0; j < p.num_vars(); ++j) {
    if (p.q(j) != 0.0) {
      out << "objective linear " << var_name(j) << " " << Num(p.q(j)) << "\n";
    }
  }
  for (int k = 0; k < p.P.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p.P, k); it; ++it) {
      out << "objective quadratic " << var_name(it.row()) << " "
          << var_name(it.col()) << " " << Num(0.5 * it.value()) << "\n";
    }
  }
  SparseMatrix gr = p.G.transpose();
  for (int i = 0; i < gr.outerSize(); ++i) {
    out << "row " << i << " [" << Num(p.row_lower(i)) << ", "
        << Num(p.row_upper(i)) << "]:";
    for (SparseMatrix::InnerIterator it(gr, i); it; ++it) {
      out << " " << Num(it.value()) << "*" << var_name(it.row());
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace safete
