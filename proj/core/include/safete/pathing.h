#ifndef SAFETE_PATHING_H_
#define SAFETE_PATHING_H_

// Candidate paths per commodity and the normalized edge-path incidence matrix
// that the utilization regularizer is built on.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "safete/netmodel.h"

namespace safete {

struct Path {
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;

  NodeId src() const { return nodes.front(); }
  NodeId dst() const { return nodes.back(); }
  size_t hops() const { return links.size(); }
  bool operator==(const Path&) const = default;
};

// Builds a Path from a node sequence, resolving links. Throws InputError if a
// hop is missing or the sequence repeats a node.
Path MakePath(const Topology& topology, const std::vector<NodeId>& nodes);

// Up to k loop-free paths ordered by (hop count, node sequence). Empty when the
// commodity is disconnected.
std::vector<Path> KShortestPaths(const Topology& topology, Commodity commodity,
                                 int k);

// Greedy: take the shortest path, delete its links, repeat up to k times.
std::vector<Path> EdgeDisjointPaths(const Topology& topology,
                                    Commodity commodity, int k);

enum class PathStrategy { kKShortest, kEdgeDisjoint };

// Candidate paths for every commodity, with a dense global path numbering.
// Commodity order is ascending (src, dst); path indices are contiguous per
// commodity.
class PathSet {
 public:
  PathSet() = default;

  void Add(Commodity commodity, std::vector<Path> paths);

  const std::vector<Commodity>& commodities() const { return commodities_; }
  const std::vector<Commodity>& disconnected() const { return disconnected_; }
  const std::vector<Path>& paths() const { return paths_; }
  size_t num_paths() const { return paths_.size(); }
  size_t num_commodities() const { return commodities_.size(); }

  // Index into commodities(), or -1.
  int CommodityIndex(Commodity c) const;
  // Global path indices [first, last) of commodity index ci.
  std::pair<int, int> PathRange(int commodity_index) const {
    return {offsets_[commodity_index], offsets_[commodity_index + 1]};
  }
  // Commodity index owning global path p.
  int PathCommodity(int path_index) const { return path_owner_[path_index]; }

 private:
  std::vector<Commodity> commodities_;
  std::vector<Commodity> disconnected_;
  std::map<Commodity, int> index_;
  std::vector<Path> paths_;
  std::vector<int> offsets_{0};
  std::vector<int> path_owner_;
};

// Paths for every commodity with positive demand.
PathSet ComputePathSet(const Topology& topology, const DemandMatrix& demands,
                       PathStrategy strategy, int k);

// Path cache: JSON object "src-dst" -> [[node ids...], ...].
std::string PathSetToJson(const PathSet& paths);
PathSet PathSetFromJson(const std::string& text, const Topology& topology);
void SavePathCache(const std::filesystem::path& path, const PathSet& paths);
PathSet LoadPathCache(const std::filesystem::path& path,
                      const Topology& topology);

// A[e, p] = I(p, e) / c_e.
class IncidenceMatrix {
 public:
  IncidenceMatrix() = default;
  explicit IncidenceMatrix(Eigen::SparseMatrix<double> a) : a_(std::move(a)) {}

  const Eigen::SparseMatrix<double>& matrix() const { return a_; }
  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index cols() const { return a_.cols(); }
  Eigen::Index nonzeros() const { return a_.nonZeros(); }

  // Numerical column rank, cached after the first call.
  int ColumnRank() const;

 private:
  Eigen::SparseMatrix<double> a_;
  mutable int rank_ = -1;
};

IncidenceMatrix BuildIncidence(const Topology& topology, const PathSet& paths);

struct RankInfo {
  int rank = 0;
  bool full = false;
};

// Rank from singular values with tolerance 1e-10 * sigma_max.
RankInfo ColumnRank(const Eigen::SparseMatrix<double>& a);

inline constexpr double kPhantomCapacityGbps = 1e9;

struct PhantomAugmentation {
  Eigen::SparseMatrix<double> matrix;  // original rows followed by phantoms
  int phantom_count = 0;
  double lambda_prime = 0.0;
  double phantom_capacity = kPhantomCapacityGbps;
  // Column bundled by each phantom row.
  std::vector<int> phantom_columns;
};

// Appends one phantom row per dependent column (cols - rank rows, each
// touching one distinct column, entry 1/capacity) so the result has full
// column rank. No-op on full-rank input.
PhantomAugmentation AddPhantomEdges(
    const Eigen::SparseMatrix<double>& a, double lambda_prime,
    double phantom_capacity = kPhantomCapacityGbps);

}  // namespace safete

#endif  // SAFETE_PATHING_H_
