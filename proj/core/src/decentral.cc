#include "safete/decentral.h"

#include <algorithm>
#include <cmath>

#include "safete/parallel.h"

namespace safete {

SliceRun RunDecentralized(std::shared_ptr<const Topology> topology,
                          std::shared_ptr<const PathSet> paths,
                          const SlicingConfig& slicing,
                          const std::vector<DemandMatrix>& demands,
                          const DecentralOptions& options) {
  if (demands.size() != slicing.num_slices()) {
    throw InputError("need one demand matrix per slice: got " +
                     std::to_string(demands.size()) + " for " +
                     std::to_string(slicing.num_slices()) + " slices");
  }
  SliceRun run;
  run.objective = options.formulation.objective;
  run.lambda = options.formulation.lambda;
  run.demands = demands;
  run.solutions.resize(demands.size());
  run.statuses.resize(demands.size());
  std::vector<size_t> mask_sizes(demands.size());
  ParallelFor(demands.size(), options.threads, [&](size_t j) {
    TEInstance inst =
        BuildInstance(topology, paths, demands[j], options.formulation);
    mask_sizes[j] = inst.mask_size();
    run.solutions[j] = SolveInstance(inst, options.solve);
    run.statuses[j] = run.solutions[j].status;
  });
  run.mask_size = mask_sizes.empty() ? 0 : mask_sizes.front();
  run.ok = std::all_of(run.statuses.begin(), run.statuses.end(),
                       [](SolveStatus s) { return s == SolveStatus::kOptimal; });
  return run;
}

RealizedTraffic RealizedLoads(const SliceRun& run, const PathSet& paths,
                              const SlicingConfig& slicing, size_t num_links) {
  RealizedTraffic t;
  t.loads.assign(num_links, 0.0);
  for (size_t ci = 0; ci < paths.num_commodities(); ++ci) {
    const Commodity c = paths.commodities()[ci];
    const TESolution& sol = run.solutions.at(slicing.SliceOf(c.src));
    if (sol.path_flows.empty()) continue;
    auto [first, last] = paths.PathRange(static_cast<int>(ci));
    for (int p = first; p < last; ++p) {
      const double x = sol.path_flows[p];
      if (x == 0.0) continue;
      t.total_sent += x;
      for (LinkId e : paths.paths()[p].links) t.loads[e] += x;
    }
  }
  return t;
}

DemandMatrix MixedDemands(const std::vector<DemandMatrix>& demands,
                          const SlicingConfig& slicing) {
  if (demands.size() != slicing.num_slices()) {
    throw InputError("need one demand matrix per slice");
  }
  DemandMatrix mix;
  std::set<Commodity> keys;
  for (const auto& d : demands) {
    for (const auto& [c, v] : d.entries()) keys.insert(c);
  }
  for (const Commodity& c : keys) {
    mix.Set(c, demands[slicing.SliceOf(c.src)].Get(c));
  }
  return mix;
}

TESolution OracleSolution(std::shared_ptr<const Topology> topology,
                          std::shared_ptr<const PathSet> paths,
                          const SlicingConfig& slicing,
                          const std::vector<DemandMatrix>& demands,
                          TEObjective objective, double lambda,
                          const TESolveOptions& solve) {
  FormulationOptions f;
  f.objective = objective;
  f.lambda = lambda;
  TEInstance inst =
      BuildInstance(topology, paths, MixedDemands(demands, slicing), f);
  return SolveInstance(inst, solve);
}

double ExcessGbps(const std::vector<double>& loads, const Topology& topology) {
  double excess = 0.0;
  for (size_t e = 0; e < loads.size(); ++e) {
    excess += std::max(0.0, loads[e] - topology.link(e).capacity_gbps);
  }
  return excess;
}

double ExcessFlowPercent(const std::vector<double>& loads,
                         const Topology& topology, double total_sent) {
  if (total_sent <= 0.0) return 0.0;
  return 100.0 * ExcessGbps(loads, topology) / total_sent;
}

double EffectiveThroughput(const RealizedTraffic& traffic,
                           const Topology& topology, double oracle_throughput) {
  if (oracle_throughput <= 0.0) return 1.0;
  return (traffic.total_sent - ExcessGbps(traffic.loads, topology)) /
         oracle_throughput;
}

CongestionStats CongestedLinks(const std::vector<double>& loads,
                               const Topology& topology, TEObjective objective,
                               double oracle_mlu) {
  CongestionStats stats;
  if (loads.empty()) return stats;
  const bool mmlu = objective == TEObjective::kMmlu;
  if (mmlu && oracle_mlu <= 0.0) return stats;
  const double scale = mmlu ? oracle_mlu : 1.0;
  size_t count = 0;
  for (size_t e = 0; e < loads.size(); ++e) {
    const double norm = loads[e] / topology.link(e).capacity_gbps / scale;
    stats.max_normalized = std::max(stats.max_normalized, norm);
    if (norm > 1.0 + kCongestionSlack) {
      ++count;
      stats.congested.push_back(norm);
    }
  }
  stats.fraction = static_cast<double>(count) / static_cast<double>(loads.size());
  return stats;
}

std::vector<double> PathDivergence(const SliceRun& run) {
  std::vector<double> out;
  if (run.solutions.empty()) return out;
  const size_t np = run.solutions.front().path_flows.size();
  out.assign(np, 0.0);
  for (size_t p = 0; p < np; ++p) {
    double best = 0.0;
    for (size_t a = 0; a < run.solutions.size(); ++a) {
      for (size_t b = a + 1; b < run.solutions.size(); ++b) {
        const double x = run.solutions[a].path_flows[p];
        const double y = run.solutions[b].path_flows[p];
        best = std::max(best,
                        std::abs(x - y) / std::max({x, y, 1e-9}));
      }
    }
    out[p] = best;
  }
  return out;
}

DivergenceReport ComputeReport(const Topology& topology, const PathSet& paths,
                               const SlicingConfig& slicing,
                               const SliceRun& run, const TESolution& oracle) {
  DivergenceReport r;
  RealizedTraffic t = RealizedLoads(run, paths, slicing, topology.num_links());
  r.loads = t.loads;
  r.utilization.resize(t.loads.size());
  for (size_t e = 0; e < t.loads.size(); ++e) {
    r.utilization[e] = t.loads[e] / topology.link(e).capacity_gbps;
  }
  r.total_sent = t.total_sent;
  r.excess_gbps = ExcessGbps(t.loads, topology);
  r.excess_flow_pct = ExcessFlowPercent(t.loads, topology, t.total_sent);
  r.oracle_throughput = oracle.throughput;
  r.oracle_mlu = oracle.mlu;
  r.effective_throughput = EffectiveThroughput(t, topology, oracle.throughput);
  r.congestion = CongestedLinks(t.loads, topology, run.objective, oracle.mlu);
  r.path_divergence = PathDivergence(run);
  if (!r.path_divergence.empty()) {
    double sum = 0.0;
    for (double v : r.path_divergence) sum += v;
    r.mean_path_divergence_pct =
        100.0 * sum / static_cast<double>(r.path_divergence.size());
  }
  r.oracle_excess_gbps = ExcessGbps(oracle.link_loads, topology);
  r.oracle_excess_flow_pct =
      ExcessFlowPercent(oracle.link_loads, topology, oracle.throughput);
  return r;
}

}  // namespace safete
