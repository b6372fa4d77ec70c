#ifndef SAFETE_DECENTRAL_H_
#define SAFETE_DECENTRAL_H_

// k slice controllers each solve the global TE instance on their own demand
// estimate; traffic follows the controller of its source (source routing).
// Metrics compare the composed loads against an oracle that solves once on
// the mixed matrix.

#include <memory>
#include <vector>

#include "safete/formulation.h"
#include "safete/slicing_config.h"

namespace safete {

struct DecentralOptions {
  FormulationOptions formulation;
  TESolveOptions solve;
  // Workers for the per-slice solves (0 = WorkerCount()).
  int threads = 0;
};

struct SliceRun {
  TEObjective objective = TEObjective::kMt;
  double lambda = 0.0;
  size_t mask_size = 0;
  std::vector<DemandMatrix> demands;
  std::vector<TESolution> solutions;
  std::vector<SolveStatus> statuses;
  bool ok = false;
};

SliceRun RunDecentralized(std::shared_ptr<const Topology> topology,
                          std::shared_ptr<const PathSet> paths,
                          const SlicingConfig& slicing,
                          const std::vector<DemandMatrix>& demands,
                          const DecentralOptions& options);

struct RealizedTraffic {
  std::vector<double> loads;  // Gbps per link
  double total_sent = 0.0;    // sum over flows of the realized sending rate
};

// L_e = sum_i sum_p w_p^(j_i) d_i^(j_i) I(p,e), j_i the slice of src(i).
RealizedTraffic RealizedLoads(const SliceRun& run, const PathSet& paths,
                              const SlicingConfig& slicing, size_t num_links);

// d_mix(i) = d^(j_i)(i).
DemandMatrix MixedDemands(const std::vector<DemandMatrix>& demands,
                          const SlicingConfig& slicing);

// One global solve on the mixed matrix (lambda 0 solves the LP by simplex).
TESolution OracleSolution(std::shared_ptr<const Topology> topology,
                          std::shared_ptr<const PathSet> paths,
                          const SlicingConfig& slicing,
                          const std::vector<DemandMatrix>& demands,
                          TEObjective objective, double lambda = 0.0,
                          const TESolveOptions& solve = {});

// sum_e max(0, L_e - c_e) in Gbps.
double ExcessGbps(const std::vector<double>& loads, const Topology& topology);
// 100 * excess / total_sent; 0 when nothing is sent.
double ExcessFlowPercent(const std::vector<double>& loads,
                         const Topology& topology, double total_sent);
// (total_sent - excess) / oracle throughput; 1 when the oracle carries nothing.
double EffectiveThroughput(const RealizedTraffic& traffic,
                           const Topology& topology, double oracle_throughput);

struct CongestionStats {
  double fraction = 0.0;
  // Normalized utilization of each congested link, in link order.
  std::vector<double> congested;
  // Largest normalized utilization over all links.
  double max_normalized = 0.0;
};

// Utilization threshold 1 for MT/MCF and the oracle MLU for MMLU (where
// utilizations are divided by the oracle MLU). A relative slack of 1e-6
// absorbs solver round-off. With MMLU and oracle MLU 0 the result is empty.
CongestionStats CongestedLinks(const std::vector<double>& loads,
                               const Topology& topology, TEObjective objective,
                               double oracle_mlu);
inline constexpr double kCongestionSlack = 1e-6;

// Per path, max over controller pairs of |x - x'| / max(x, x', 1e-9) on path
// flows x = w d.
std::vector<double> PathDivergence(const SliceRun& run);

struct DivergenceReport {
  std::vector<double> loads;
  std::vector<double> utilization;
  double total_sent = 0.0;
  double excess_gbps = 0.0;
  double excess_flow_pct = 0.0;
  double effective_throughput = 1.0;
  CongestionStats congestion;
  std::vector<double> path_divergence;
  double mean_path_divergence_pct = 0.0;
  double oracle_throughput = 0.0;
  double oracle_mlu = 0.0;
  double oracle_excess_gbps = 0.0;
  double oracle_excess_flow_pct = 0.0;
};

DivergenceReport ComputeReport(const Topology& topology, const PathSet& paths,
                               const SlicingConfig& slicing,
                               const SliceRun& run, const TESolution& oracle);

}  // namespace safete

#endif  // SAFETE_DECENTRAL_H_
