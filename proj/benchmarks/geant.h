#ifndef SAFETE_BENCHMARKS_GEANT_H_
#define SAFETE_BENCHMARKS_GEANT_H_

#include <filesystem>
#include <memory>
#include <vector>

#include "safete/netmodel.h"
#include "safete/pathing.h"

namespace safete::bench {

inline std::shared_ptr<const Topology> Geant() {
  static auto t = std::make_shared<const Topology>(LoadTopology(
      std::filesystem::path(SAFETE_SOURCE_DIR) / "data/geant/topology.json"));
  return t;
}

inline DemandMatrix GeantDemands(double total_gbps = 120) {
  return GravityDemands(*Geant(), std::vector<double>(Geant()->num_nodes(), 1.0),
                        total_gbps);
}

inline std::shared_ptr<const PathSet> GeantPaths(int k = 4) {
  return std::make_shared<const PathSet>(
      ComputePathSet(*Geant(), GeantDemands(), PathStrategy::kKShortest, k));
}

}  // namespace safete::bench

#endif  // SAFETE_BENCHMARKS_GEANT_H_
