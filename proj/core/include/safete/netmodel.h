#ifndef SAFETE_NETMODEL_H_
#define SAFETE_NETMODEL_H_

// Topology and demand data model: WAN graphs, demand matrices, demand
// histories, gravity-model generation and the demand-perturbation model that
// emulates noisy per-slice demand prediction.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace safete {

using NodeId = int;
using LinkId = int;

// Raised for malformed or invariant-violating inputs (files, configs, args).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node {
  NodeId id = 0;
  std::string name;
};

struct Link {
  NodeId src = 0;
  NodeId dst = 0;
  double capacity_gbps = 0.0;
};

// Directed capacitated graph. Node ids are dense 0..n-1, links are indexed in
// declaration order. Immutable after construction.
class Topology {
 public:
  Topology() = default;

  // Validates and builds. Throws InputError on self-loops, duplicate links,
  // non-positive capacities, undeclared endpoints or non-dense node ids.
  static Topology Create(std::vector<Node> nodes, std::vector<Link> links);

  size_t num_nodes() const { return nodes_.size(); }
  size_t num_links() const { return links_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Link& link(LinkId id) const { return links_.at(id); }
  const std::string& name(NodeId id) const { return nodes_.at(id).name; }

  std::optional<LinkId> FindLink(NodeId src, NodeId dst) const;
  const std::vector<LinkId>& out_links(NodeId id) const {
    return out_links_.at(id);
  }
  const std::vector<LinkId>& in_links(NodeId id) const {
    return in_links_.at(id);
  }
  // Sorted neighbours ignoring link direction.
  const std::vector<NodeId>& undirected_neighbors(NodeId id) const {
    return neighbors_.at(id);
  }
  std::optional<NodeId> FindNode(const std::string& name) const;

  // True if the underlying undirected graph is connected.
  bool IsConnected() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::map<std::pair<NodeId, NodeId>, LinkId> link_index_;
  std::vector<std::vector<LinkId>> out_links_;
  std::vector<std::vector<LinkId>> in_links_;
  std::vector<std::vector<NodeId>> neighbors_;
};

// JSON: {"nodes":[{"id":..,"name":..}], "links":[{"src":..,"dst":..,
// "capacity_gbps":..}]}.
Topology LoadTopology(const std::filesystem::path& path);
Topology ParseTopologyJson(const std::string& text);
std::string TopologyToJson(const Topology& topology);

struct Commodity {
  NodeId src = 0;
  NodeId dst = 0;
  auto operator<=>(const Commodity&) const = default;
};

// Per-commodity rates in Gbps. Iteration order (src, dst) ascending defines
// the commodity index used for tie-breaking.
class DemandMatrix {
 public:
  DemandMatrix() = default;

  // Throws InputError for src == dst, negative or non-finite rates.
  void Set(Commodity c, double gbps);
  double Get(Commodity c) const;
  bool Contains(Commodity c) const { return rates_.count(c) > 0; }
  size_t size() const { return rates_.size(); }
  bool empty() const { return rates_.empty(); }
  double Total() const;
  const std::map<Commodity, double>& entries() const { return rates_; }

  bool operator==(const DemandMatrix&) const = default;

 private:
  std::map<Commodity, double> rates_;
};

// CSV with header "src,dst,gbps"; ids must resolve against `topology`.
DemandMatrix LoadDemandCsv(const std::filesystem::path& path,
                           const Topology& topology);
DemandMatrix ParseDemandCsv(const std::string& text, const Topology& topology);
std::string DemandToCsv(const DemandMatrix& demands);

struct DemandSnapshot {
  int64_t timestamp = 0;
  DemandMatrix matrix;
};

class DemandHistory {
 public:
  DemandHistory() = default;
  // Throws unless timestamps are strictly increasing.
  explicit DemandHistory(std::vector<DemandSnapshot> snapshots);

  const std::vector<DemandSnapshot>& snapshots() const { return snapshots_; }
  size_t size() const { return snapshots_.size(); }
  bool empty() const { return snapshots_.empty(); }

  // Per-commodity maximum over all snapshots.
  DemandMatrix MaxMatrix() const;
  // Per-commodity mean over all snapshots (absent entries count as zero).
  DemandMatrix MeanMatrix() const;

 private:
  std::vector<DemandSnapshot> snapshots_;
};

// Directory of "<epoch-seconds>.csv" files.
DemandHistory LoadDemandHistory(const std::filesystem::path& dir,
                                const Topology& topology);

// d(i,j) = total * m_i m_j / sum_{a != b} m_a m_b. `masses` is indexed by node
// id. Requires at least two strictly positive masses.
DemandMatrix GravityDemands(const Topology& topology,
                            const std::vector<double>& masses,
                            double total_volume_gbps);

struct PerturbationModel {
  enum class Kind { kParametric, kEmpirical };
  Kind kind = Kind::kParametric;
  double sigma = 0.087;
  std::vector<double> deviations;
  uint64_t seed = 0;

  static PerturbationModel Parametric(double sigma, uint64_t seed);
  static PerturbationModel Empirical(std::vector<double> deviations,
                                     uint64_t seed);
  void Validate() const;
};

// One relative deviation per line.
std::vector<double> LoadDeviations(const std::filesystem::path& path);

// Relative deviation drawn for (model.seed, slice, commodity). Streams are
// keyed, not sequential, so the value does not depend on which other
// commodities are present.
double DrawDeviation(const PerturbationModel& model, int slice, Commodity c);

// k matrices with d' = max(0, d (1 + delta)), delta independent per slice and
// commodity.
std::vector<DemandMatrix> Perturb(const DemandMatrix& base,
                                  const PerturbationModel& model, int count);

// Keeps the ceil(fraction * size) largest entries, ties by commodity index.
DemandMatrix TopFraction(const DemandMatrix& base, double fraction);

// SplitMix64-based mixing, used to derive independent seeds.
uint64_t MixSeed(uint64_t a, uint64_t b);

}  // namespace safete

#endif  // SAFETE_NETMODEL_H_
