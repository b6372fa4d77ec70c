#ifndef SAFETE_SLICING_H_
#define SAFETE_SLICING_H_

// Randomized fault-tolerant partitioning of the WAN into controller slices
// and the two blast-radius metrics.

#include <cstdint>
#include <string>
#include <vector>

#include "safete/netmodel.h"
#include "safete/pathing.h"
#include "safete/slicing_config.h"

namespace safete {

enum class WeightMode { kMean, kMax };

WeightMode ParseWeightMode(const std::string& text);

struct NodeWeights {
  WeightMode mode = WeightMode::kMean;
  std::vector<double> phi;  // indexed by node id

  double Total() const;
};

// phi_v = sum over flows leaving v of the mean (or max) historical rate.
NodeWeights ComputeNodeWeights(const DemandHistory& history, size_t num_nodes,
                               WeightMode mode);
// Egress totals of a single matrix.
NodeWeights NodeWeightsFromDemands(const DemandMatrix& demands,
                                   size_t num_nodes);

// The k heaviest nodes, ties by ascending id. Throws InputError if k > |V|.
std::vector<NodeId> ElephantSources(const NodeWeights& weights, int k);

// The most even split: the first n mod k slices get one extra node.
std::vector<int> DefaultSliceSizes(size_t num_nodes, int k);

struct SliceSpec {
  int k = 2;
  std::vector<int> sizes;  // empty selects DefaultSliceSizes
  double epsilon = 0.2;
  int max_retries = 1000;
  uint64_t seed = 1;

  // Resolves the default sizes and validates. Throws InputError.
  SliceSpec Resolved(size_t num_nodes) const;
};

struct PartitionResult {
  bool ok = false;
  SlicingConfig config;
  int attempts = 0;
};

// Elephant j seeds slice j; slices then grow round-robin from their
// candidate frontiers. A slice that is weight-deficient and within two nodes
// of its size takes the heaviest candidate that keeps it under T(1+eps);
// otherwise it takes a uniformly random candidate. Dead ends and window
// violations restart from scratch, up to max_retries attempts.
PartitionResult RandomizedPartition(const Topology& topology,
                                    const NodeWeights& weights,
                                    const SliceSpec& spec);

struct CandidateSet {
  std::vector<SlicingConfig> configs;  // canonical, in discovery order
  int attempts = 0;
  int failures = 0;
  int duplicates = 0;
};

// Up to n distinct configurations from independent partition runs (one
// restart budget of spec.max_retries each, seeds derived from spec.seed),
// stopping after max_runs runs. Deterministic for a fixed seed regardless of
// the worker count.
CandidateSet GenerateCandidates(const Topology& topology,
                                const NodeWeights& weights,
                                const SliceSpec& spec, int n, int max_runs = 0,
                                int threads = 0);

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> errors;
};

// Checks partition, coverage, sizes, connectivity of every induced subgraph
// and the weight window directly from the raw node lists.
ValidationResult ValidateSlicing(const Topology& topology,
                                 const std::vector<std::vector<NodeId>>& slices,
                                 const NodeWeights& weights,
                                 const SliceSpec& spec);

std::vector<double> SliceWeights(const SlicingConfig& config,
                                 const NodeWeights& weights);

// max_j (weight of slice j) / total weight.
double BlastRadiusSource(const SlicingConfig& config,
                         const NodeWeights& weights);
double BlastRadiusSource(const SlicingConfig& config,
                         const DemandMatrix& demands);

// max_j (demand of flows with a source in S_j or any candidate path touching
// S_j) / total demand.
double BlastRadiusTransit(const SlicingConfig& config,
                          const DemandMatrix& demands, const PathSet& paths);

struct Candidate {
  SlicingConfig config;
  std::vector<double> weight_per_slice;
  double blast_radius_source = 0.0;
  double blast_radius_transit = 0.0;
};

// JSON list of {slices, weight_per_slice, blast_radius_source,
// blast_radius_transit}.
std::string CandidatesToJson(const std::vector<Candidate>& candidates);
// Raw node lists of every entry, unvalidated.
std::vector<std::vector<std::vector<NodeId>>> SlicesFromCandidatesJson(
    const std::string& text);

}  // namespace safete

#endif  // SAFETE_SLICING_H_
