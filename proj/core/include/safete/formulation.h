#ifndef SAFETE_FORMULATION_H_
#define SAFETE_FORMULATION_H_

// LP/QP instances for the three TE objectives with the squared-utilization
// regularizer, pruning of regularized links and capacity normalization.
//
// Variable layout: [w_p for every included path | u_e for every link |
// gamma (MCF) or Z (MMLU) | u'_h for phantom rows]. u_e is tied to the path
// weights by equality rows: sum_i (d_i / c_e) sum_{p in P_i, e in p} w_p - u_e
// = 0.

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "safete/netmodel.h"
#include "safete/pathing.h"
#include "safete/problem.h"
#include "safete/slicing_config.h"
#include "safete/solver.h"

namespace safete {

enum class TEObjective { kMt, kMcf, kMmlu };

const char* ToString(TEObjective objective);
// "mt", "mcf", "mmlu" (case-insensitive). Throws InputError.
TEObjective ParseObjective(const std::string& text);
// 1 for MT, 1e-4 for MCF and MMLU.
double DefaultLambda(TEObjective objective);

using LinkSet = std::set<LinkId>;

struct PhantomOptions {
  bool enabled = false;
  // Negative selects lambda * 1e-6.
  double lambda_prime = -1.0;
  double capacity_gbps = kPhantomCapacityGbps;
};

struct FormulationOptions {
  TEObjective objective = TEObjective::kMt;
  double lambda = 0.0;
  // Links whose u_e^2 term is dropped from the objective.
  LinkSet pruned;
  bool normalize_capacity = false;
  PhantomOptions phantom;
};

struct TEInstance {
  TEObjective objective = TEObjective::kMt;
  double lambda = 0.0;
  bool normalize_capacity = false;
  // mask[e] is true when u_e^2 is in the objective.
  std::vector<bool> mask;

  std::shared_ptr<const Topology> topology;
  std::shared_ptr<const PathSet> paths;

  // Included commodities (positive demand, at least one path), their demand
  // and their index into paths->commodities().
  std::vector<Commodity> commodities;
  std::vector<double> demands;
  std::vector<int> commodity_index;
  // Global path index of each w variable.
  std::vector<int> path_of_var;
  // Demanded commodities without a path.
  std::vector<Commodity> disconnected;

  // Phantom rows, if requested and A is column-rank deficient.
  PhantomOptions phantom;
  int phantom_count = 0;
  double lambda_prime = 0.0;
  std::vector<int> phantom_vars;  // w variable bundled by each phantom row

  StandardProblem problem;

  Eigen::Index num_w() const { return static_cast<Eigen::Index>(path_of_var.size()); }
  Eigen::Index num_links() const { return static_cast<Eigen::Index>(mask.size()); }
  Eigen::Index u_offset() const { return num_w(); }
  // Index of gamma / Z, or -1 for MT.
  Eigen::Index extra_var() const {
    return objective == TEObjective::kMt ? -1 : num_w() + num_links();
  }
  Eigen::Index phantom_offset() const {
    return num_w() + num_links() + (objective == TEObjective::kMt ? 0 : 1);
  }
  size_t mask_size() const;
};

// Builds the instance for `demands` over a fixed path set. Commodities of the
// path set with zero demand are dropped; demanded commodities that have no
// path are excluded and listed in `disconnected`. Throws InputError for
// lambda < 0.
TEInstance BuildInstance(std::shared_ptr<const Topology> topology,
                         std::shared_ptr<const PathSet> paths,
                         const DemandMatrix& demands,
                         const FormulationOptions& options);

TEInstance BuildMt(std::shared_ptr<const Topology> topology,
                   std::shared_ptr<const PathSet> paths,
                   const DemandMatrix& demands, double lambda,
                   LinkSet pruned = {}, bool normalize = false);
TEInstance BuildMcf(std::shared_ptr<const Topology> topology,
                    std::shared_ptr<const PathSet> paths,
                    const DemandMatrix& demands, double lambda,
                    LinkSet pruned = {}, bool normalize = false);
TEInstance BuildMmlu(std::shared_ptr<const Topology> topology,
                     std::shared_ptr<const PathSet> paths,
                     const DemandMatrix& demands, double lambda,
                     LinkSet pruned = {});

// mask := mask \ prune. Only the objective changes.
TEInstance ApplyPruning(const TEInstance& instance, const LinkSet& prune);
// Capacity rows become u_e <= 1. No-op for MMLU.
TEInstance NormalizeCapacity(const TEInstance& instance);

// Links all of whose using paths have their source in one slice.
LinkSet DivergenceFreeLinks(const Topology& topology, const PathSet& paths,
                            const SlicingConfig& slicing);

// Links with (1/c_e) sum_{i uses e} max_t d_{i,t} <= beta.
LinkSet BetaConstrainedLinks(const Topology& topology,
                             const DemandHistory& history,
                             const PathSet& paths, double beta);

enum class SolverKind { kAuto, kSimplex, kQp };

struct TESolveOptions {
  // kAuto: simplex when the instance has no quadratic term, QP otherwise.
  SolverKind kind = SolverKind::kAuto;
  SimplexOptions simplex;
  QpOptions qp;
};

struct TESolution {
  SolveStatus status = SolveStatus::kIterationLimit;
  // Indexed by global path index; zero for paths of excluded commodities.
  std::vector<double> weights;
  std::vector<double> path_flows;  // w_p * d_i
  std::vector<double> link_loads;  // Gbps
  std::vector<double> utilization;
  double objective_value = 0.0;  // minimized objective, regularizer included
  double throughput = 0.0;       // sum_i d_i sum_p w_p
  double gamma = 0.0;            // MCF only
  double mlu = 0.0;              // max_e u_e
  SolveResult raw;
};

TESolution SolveInstance(const TEInstance& instance,
                         const TESolveOptions& options = {});

// Plain-text listing of variables, objective terms and constraint rows.
std::string DumpInstance(const TEInstance& instance);

}  // namespace safete

#endif  // SAFETE_FORMULATION_H_
