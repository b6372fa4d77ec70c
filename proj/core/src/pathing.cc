#include "safete/pathing.h"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "json.hpp"

namespace safete {
namespace {

constexpr int kUnreachable = std::numeric_limits<int>::max();

// Lexicographically smallest shortest (by hops) path from `src` to `dst` that
// avoids `blocked_nodes` and `blocked_links`. Empty if none.
std::vector<NodeId> LexShortestPath(const Topology& topology, NodeId src,
                                    NodeId dst,
                                    const std::vector<bool>& blocked_nodes,
                                    const std::vector<bool>& blocked_links) {
  const size_t n = topology.num_nodes();
  // Reverse BFS from dst gives hop distance to dst.
  std::vector<int> dist(n, kUnreachable);
  std::deque<NodeId> q;
  dist[dst] = 0;
  q.push_back(dst);
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop_front();
    for (LinkId l : topology.in_links(v)) {
      if (blocked_links[l]) continue;
      NodeId u = topology.link(l).src;
      if (blocked_nodes[u] || dist[u] != kUnreachable) continue;
      dist[u] = dist[v] + 1;
      q.push_back(u);
    }
  }
  if (blocked_nodes[src] || dist[src] == kUnreachable) return {};
  std::vector<NodeId> path{src};
  NodeId cur = src;
  while (cur != dst) {
    NodeId best = -1;
    for (LinkId l : topology.out_links(cur)) {
      if (blocked_links[l]) continue;
      NodeId w = topology.link(l).dst;
      if (blocked_nodes[w] || dist[w] != dist[cur] - 1) continue;
      if (best < 0 || w < best) best = w;
    }
    cur = best;
    path.push_back(cur);
  }
  return path;
}

bool PathLess(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

void CheckCommodity(const Topology& topology, Commodity c) {
  const auto n = static_cast<NodeId>(topology.num_nodes());
  if (c.src < 0 || c.src >= n || c.dst < 0 || c.dst >= n) {
    throw InputError("commodity references unknown node");
  }
  if (c.src == c.dst) throw InputError("commodity with src == dst");
}

}  // namespace

Path MakePath(const Topology& topology, const std::vector<NodeId>& nodes) {
  if (nodes.size() < 2) throw InputError("path needs at least two nodes");
  std::set<NodeId> seen;
  Path p;
  p.nodes = nodes;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (!seen.insert(nodes[i]).second) {
      throw InputError("path repeats node " + std::to_string(nodes[i]));
    }
    if (i + 1 < nodes.size()) {
      auto l = topology.FindLink(nodes[i], nodes[i + 1]);
      if (!l) {
        throw InputError("path hop " + std::to_string(nodes[i]) + "->" +
                         std::to_string(nodes[i + 1]) + " is not a link");
      }
      p.links.push_back(*l);
    }
  }
  return p;
}

// Yen's algorithm with unit weights. Each spur is the lexicographically
// smallest shortest path in its restricted graph, so candidates come out in
// (hops, node sequence) order.
std::vector<Path> KShortestPaths(const Topology& topology, Commodity commodity,
                                 int k) {
  CheckCommodity(topology, commodity);
  if (k < 1) throw InputError("k must be >= 1");
  const size_t n = topology.num_nodes();
  const size_t m = topology.num_links();
  std::vector<bool> blocked_nodes(n, false), blocked_links(m, false);

  std::vector<std::vector<NodeId>> found;
  auto first = LexShortestPath(topology, commodity.src, commodity.dst,
                               blocked_nodes, blocked_links);
  if (first.empty()) return {};
  found.push_back(first);

  auto cmp = [](const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    return PathLess(a, b);
  };
  std::set<std::vector<NodeId>, decltype(cmp)> candidates(cmp);

  while (static_cast<int>(found.size()) < k) {
    const auto& last = found.back();
    for (size_t i = 0; i + 1 < last.size(); ++i) {
      std::vector<NodeId> root(last.begin(), last.begin() + i + 1);
      std::fill(blocked_nodes.begin(), blocked_nodes.end(), false);
      std::fill(blocked_links.begin(), blocked_links.end(), false);
      for (const auto& p : found) {
        if (p.size() > i + 1 && std::equal(root.begin(), root.end(), p.begin())) {
          if (auto l = topology.FindLink(p[i], p[i + 1])) blocked_links[*l] = true;
        }
      }
      for (size_t r = 0; r < i; ++r) blocked_nodes[root[r]] = true;
      auto spur = LexShortestPath(topology, root.back(), commodity.dst,
                                  blocked_nodes, blocked_links);
      if (spur.empty()) continue;
      std::vector<NodeId> total = root;
      total.insert(total.end(), spur.begin() + 1, spur.end());
      if (std::find(found.begin(), found.end(), total) == found.end()) {
        candidates.insert(std::move(total));
      }
    }
    if (candidates.empty()) break;
    found.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }

  std::vector<Path> out;
  out.reserve(found.size());
  for (const auto& nodes : found) out.push_back(MakePath(topology, nodes));
  return out;
}

std::vector<Path> EdgeDisjointPaths(const Topology& topology,
                                    Commodity commodity, int k) {
  CheckCommodity(topology, commodity);
  if (k < 1) throw InputError("k must be >= 1");
  std::vector<bool> blocked_nodes(topology.num_nodes(), false);
  std::vector<bool> blocked_links(topology.num_links(), false);
  std::vector<Path> out;
  while (static_cast<int>(out.size()) < k) {
    auto nodes = LexShortestPath(topology, commodity.src, commodity.dst,
                                 blocked_nodes, blocked_links);
    if (nodes.empty()) break;
    Path p = MakePath(topology, nodes);
    for (LinkId l : p.links) blocked_links[l] = true;
    out.push_back(std::move(p));
  }
  return out;
}

void PathSet::Add(Commodity commodity, std::vector<Path> paths) {
  if (index_.count(commodity) ||
      std::find(disconnected_.begin(), disconnected_.end(), commodity) !=
          disconnected_.end()) {
    throw InputError("commodity added twice to path set");
  }
  if (!commodities_.empty() && !(commodities_.back() < commodity)) {
    throw InputError("commodities must be added in ascending order");
  }
  if (paths.empty()) {
    disconnected_.push_back(commodity);
    return;
  }
  for (const Path& p : paths) {
    if (p.src() != commodity.src || p.dst() != commodity.dst) {
      throw InputError("path endpoints do not match commodity");
    }
  }
  int ci = static_cast<int>(commodities_.size());
  index_[commodity] = ci;
  commodities_.push_back(commodity);
  for (auto& p : paths) {
    paths_.push_back(std::move(p));
    path_owner_.push_back(ci);
  }
  offsets_.push_back(static_cast<int>(paths_.size()));
}

int PathSet::CommodityIndex(Commodity c) const {
  auto it = index_.find(c);
  return it == index_.end() ? -1 : it->second;
}

PathSet ComputePathSet(const Topology& topology, const DemandMatrix& demands,
                       PathStrategy strategy, int k) {
  PathSet ps;
  for (const auto& [c, rate] : demands.entries()) {
    if (rate <= 0.0) continue;
    auto paths = strategy == PathStrategy::kKShortest
                     ? KShortestPaths(topology, c, k)
                     : EdgeDisjointPaths(topology, c, k);
    ps.Add(c, std::move(paths));
  }
  return ps;
}

std::string PathSetToJson(const PathSet& paths) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (size_t ci = 0; ci < paths.num_commodities(); ++ci) {
    Commodity c = paths.commodities()[ci];
    auto [b, e] = paths.PathRange(static_cast<int>(ci));
    auto arr = nlohmann::ordered_json::array();
    for (int p = b; p < e; ++p) arr.push_back(paths.paths()[p].nodes);
    j[std::to_string(c.src) + "-" + std::to_string(c.dst)] = arr;
  }
  for (Commodity c : paths.disconnected()) {
    j[std::to_string(c.src) + "-" + std::to_string(c.dst)] =
        nlohmann::ordered_json::array();
  }
  return j.dump();
}

PathSet PathSetFromJson(const std::string& text, const Topology& topology) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("path cache parse failure: ") + e.what());
  }
  std::map<Commodity, std::vector<Path>> by_commodity;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    auto dash = key.find('-');
    if (dash == std::string::npos) throw InputError("bad path cache key " + key);
    Commodity c{std::stoi(key.substr(0, dash)), std::stoi(key.substr(dash + 1))};
    CheckCommodity(topology, c);
    std::vector<Path> paths;
    for (const auto& jp : it.value()) {
      paths.push_back(MakePath(topology, jp.get<std::vector<NodeId>>()));
    }
    by_commodity[c] = std::move(paths);
  }
  PathSet ps;
  for (auto& [c, paths] : by_commodity) ps.Add(c, std::move(paths));
  return ps;
}

void SavePathCache(const std::filesystem::path& path, const PathSet& paths) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << PathSetToJson(paths) << "\n";
}

PathSet LoadPathCache(const std::filesystem::path& path,
                      const Topology& topology) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return PathSetFromJson(ss.str(), topology);
}

IncidenceMatrix BuildIncidence(const Topology& topology, const PathSet& paths) {
  std::vector<Eigen::Triplet<double>> trip;
  for (size_t p = 0; p < paths.num_paths(); ++p) {
    for (LinkId l : paths.paths()[p].links) {
      trip.emplace_back(l, static_cast<int>(p),
                        1.0 / topology.link(l).capacity_gbps);
    }
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(topology.num_links()),
                                static_cast<Eigen::Index>(paths.num_paths()));
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return IncidenceMatrix(std::move(a));
}

int IncidenceMatrix::ColumnRank() const {
  if (rank_ < 0) rank_ = safete::ColumnRank(a_).rank;
  return rank_;
}

RankInfo ColumnRank(const Eigen::SparseMatrix<double>& a) {
  if (a.rows() == 0 || a.cols() == 0) return {0, a.cols() == 0};
  Eigen::MatrixXd dense(a);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense);
  const auto& s = svd.singularValues();
  double tol = 1e-10 * (s.size() > 0 ? s(0) : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) ++rank;
  }
  return {rank, rank == a.cols()};
}

PhantomAugmentation AddPhantomEdges(const Eigen::SparseMatrix<double>& a,
                                    double lambda_prime,
                                    double phantom_capacity) {
  if (!(lambda_prime > 0.0)) throw InputError("lambda_prime must be positive");
  if (!(phantom_capacity > 0.0)) {
    throw InputError("phantom capacity must be positive");
  }
  PhantomAugmentation out;
  out.lambda_prime = lambda_prime;
  out.phantom_capacity = phantom_capacity;
  out.matrix = a;
  RankInfo info = ColumnRank(a);
  if (info.full) return out;

  // Pivoted QR orders columns so the trailing cols - rank are dependent on
  // the leading ones.
  Eigen::MatrixXd dense(a);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dense);
  qr.setThreshold(1e-10);
  const auto& perm = qr.colsPermutation().indices();
  std::vector<int> dependent;
  for (Eigen::Index i = info.rank; i < a.cols(); ++i) {
    dependent.push_back(perm(i));
  }
  std::sort(dependent.begin(), dependent.end());

  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
    }
  }
  const auto base_rows = static_cast<int>(a.rows());
  for (size_t r = 0; r < dependent.size(); ++r) {
    trip.emplace_back(base_rows + static_cast<int>(r), dependent[r],
                      1.0 / phantom_capacity);
  }
  out.matrix.resize(a.rows() + static_cast<Eigen::Index>(dependent.size()),
                    a.cols());
  out.matrix.setFromTriplets(trip.begin(), trip.end());
  out.matrix.makeCompressed();
  out.phantom_count = static_cast<int>(dependent.size());
  out.phantom_columns = std::move(dependent);
  return out;
}

}  // namespace safete
