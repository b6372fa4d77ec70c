#include "safete/slicing.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include "json.hpp"
#include "safete/parallel.h"

namespace safete {

SlicingConfig::SlicingConfig(std::vector<std::vector<NodeId>> slices,
                             size_t num_nodes)
    : slices_(std::move(slices)), owner_(num_nodes, -1) {
  if (slices_.size() < 2) throw InputError("slicing needs at least 2 slices");
  for (size_t j = 0; j < slices_.size(); ++j) {
    if (slices_[j].empty()) {
      throw InputError("slice " + std::to_string(j) + " is empty");
    }
    for (NodeId v : slices_[j]) {
      if (v < 0 || static_cast<size_t>(v) >= num_nodes) {
        throw InputError("slice " + std::to_string(j) + " has unknown node " +
                         std::to_string(v));
      }
      if (owner_[v] >= 0) {
        throw InputError("node " + std::to_string(v) + " is in slices " +
                         std::to_string(owner_[v]) + " and " +
                         std::to_string(j));
      }
      owner_[v] = static_cast<int>(j);
    }
  }
  for (size_t v = 0; v < num_nodes; ++v) {
    if (owner_[v] < 0) {
      throw InputError("node " + std::to_string(v) + " is in no slice");
    }
  }
}

SlicingConfig SlicingConfig::Canonical() const {
  std::vector<std::vector<NodeId>> s = slices_;
  for (auto& slice : s) std::sort(slice.begin(), slice.end());
  std::sort(s.begin(), s.end());
  return SlicingConfig(std::move(s), owner_.size());
}

WeightMode ParseWeightMode(const std::string& text) {
  std::string s;
  for (char c : text) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "mean") return WeightMode::kMean;
  if (s == "max") return WeightMode::kMax;
  throw InputError("unknown weight mode '" + text + "'");
}

double NodeWeights::Total() const {
  return std::accumulate(phi.begin(), phi.end(), 0.0);
}

NodeWeights NodeWeightsFromDemands(const DemandMatrix& demands,
                                   size_t num_nodes) {
  NodeWeights w;
  w.phi.assign(num_nodes, 0.0);
  for (const auto& [c, d] : demands.entries()) {
    if (static_cast<size_t>(c.src) >= num_nodes) {
      throw InputError("demand source " + std::to_string(c.src) +
                       " outside topology");
    }
    w.phi[c.src] += d;
  }
  return w;
}

NodeWeights ComputeNodeWeights(const DemandHistory& history, size_t num_nodes,
                               WeightMode mode) {
  if (history.empty()) throw InputError("node weights need a demand history");
  NodeWeights w = NodeWeightsFromDemands(
      mode == WeightMode::kMean ? history.MeanMatrix() : history.MaxMatrix(),
      num_nodes);
  w.mode = mode;
  return w;
}

std::vector<NodeId> ElephantSources(const NodeWeights& weights, int k) {
  if (k < 1 || static_cast<size_t>(k) > weights.phi.size()) {
    throw InputError("cannot pick " + std::to_string(k) +
                     " elephant sources from " +
                     std::to_string(weights.phi.size()) + " nodes");
  }
  // Weights are compared after rounding to ~1e-10 of the largest one, so
  // equal masses tie (and fall back to the id) regardless of round-off.
  double top = 0.0;
  for (double w : weights.phi) top = std::max(top, w);
  std::vector<long long> key(weights.phi.size(), 0);
  if (top > 0.0) {
    for (size_t v = 0; v < key.size(); ++v) {
      key[v] = std::llround(weights.phi[v] / top * 1e10);
    }
  }
  std::vector<NodeId> order(weights.phi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return key[a] > key[b]; });
  order.resize(k);
  return order;
}

std::vector<int> DefaultSliceSizes(size_t num_nodes, int k) {
  if (k < 1) throw InputError("k must be positive");
  std::vector<int> sizes(k, static_cast<int>(num_nodes / k));
  for (size_t j = 0; j < num_nodes % k; ++j) ++sizes[j];
  return sizes;
}

SliceSpec SliceSpec::Resolved(size_t num_nodes) const {
  SliceSpec s = *this;
  if (s.k < 2) throw InputError("slicing needs k >= 2");
  if (static_cast<size_t>(s.k) > num_nodes) {
    throw InputError("more slices than nodes");
  }
  if (!(s.epsilon >= 0.0 && s.epsilon <= 1.0)) {
    throw InputError("epsilon must lie in [0, 1]");
  }
  if (s.max_retries < 1) throw InputError("max_retries must be positive");
  if (s.sizes.empty()) s.sizes = DefaultSliceSizes(num_nodes, s.k);
  if (s.sizes.size() != static_cast<size_t>(s.k)) {
    throw InputError("need one size per slice");
  }
  long total = 0;
  for (int size : s.sizes) {
    if (size < 1) throw InputError("slice sizes must be positive");
    total += size;
  }
  if (total != static_cast<long>(num_nodes)) {
    throw InputError("slice sizes must sum to the node count");
  }
  return s;
}

namespace {

constexpr double kWindowSlack = 1e-9;

// One growth attempt; returns false on a dead end or window violation.
bool GrowOnce(const Topology& topology, const NodeWeights& weights,
              const SliceSpec& spec, const std::vector<NodeId>& elephants,
              std::mt19937_64& rng, std::vector<std::vector<NodeId>>* out) {
  const size_t n = topology.num_nodes();
  const int k = spec.k;
  const double target = weights.Total() / k;
  // Same relative slack as the validator, so boundary weights (common with
  // round masses) do not flip with the demand scale.
  const double slack = kWindowSlack * target;
  const double lo = target * (1.0 - spec.epsilon) - slack;
  const double hi = target * (1.0 + spec.epsilon) + slack;
  std::vector<int> owner(n, -1);
  std::vector<std::vector<NodeId>> slices(k);
  std::vector<double> theta(k, 0.0);
  std::vector<std::set<NodeId>> frontier(k);

  auto add = [&](int j, NodeId v) {
    owner[v] = j;
    slices[j].push_back(v);
    theta[j] += weights.phi[v];
    for (NodeId u : topology.undirected_neighbors(v)) {
      if (owner[u] < 0) frontier[j].insert(u);
    }
  };
  for (int j = 0; j < k; ++j) add(j, elephants[j]);

  auto unfinished = [&]() {
    for (int j = 0; j < k; ++j) {
      if (static_cast<int>(slices[j].size()) < spec.sizes[j]) return true;
    }
    return false;
  };
  while (unfinished()) {
    for (int j = 0; j < k; ++j) {
      const int size = static_cast<int>(slices[j].size());
      if (size >= spec.sizes[j]) continue;
      for (auto it = frontier[j].begin(); it != frontier[j].end();) {
        it = owner[*it] >= 0 ? frontier[j].erase(it) : std::next(it);
      }
      if (frontier[j].empty()) return false;
      NodeId pick = -1;
      if (theta[j] < lo && size >= spec.sizes[j] - 2) {
        double best = -1.0;
        for (NodeId v : frontier[j]) {
          if (theta[j] + weights.phi[v] <= hi && weights.phi[v] > best) {
            best = weights.phi[v];
            pick = v;
          }
        }
        if (pick < 0) return false;
      } else {
        std::uniform_int_distribution<size_t> dist(0, frontier[j].size() - 1);
        pick = *std::next(frontier[j].begin(),
                          static_cast<std::ptrdiff_t>(dist(rng)));
      }
      add(j, pick);
      if (theta[j] > hi) return false;
    }
  }
  for (int j = 0; j < k; ++j) {
    if (theta[j] < lo || theta[j] > hi) return false;
  }
  *out = std::move(slices);
  return true;
}

bool InducedConnected(const Topology& topology,
                      const std::vector<NodeId>& nodes) {
  if (nodes.empty()) return false;
  std::set<NodeId> members(nodes.begin(), nodes.end());
  std::set<NodeId> seen{nodes.front()};
  std::queue<NodeId> q;
  q.push(nodes.front());
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    for (NodeId u : topology.undirected_neighbors(v)) {
      if (members.count(u) && seen.insert(u).second) q.push(u);
    }
  }
  return seen.size() == members.size();
}

}  // namespace

PartitionResult RandomizedPartition(const Topology& topology,
                                    const NodeWeights& weights,
                                    const SliceSpec& raw_spec) {
  if (weights.phi.size() != topology.num_nodes()) {
    throw InputError("node weights do not match the topology");
  }
  if (!topology.IsConnected()) {
    throw InputError("slicing needs a connected topology");
  }
  const SliceSpec spec = raw_spec.Resolved(topology.num_nodes());
  const std::vector<NodeId> elephants = ElephantSources(weights, spec.k);
  std::mt19937_64 rng(MixSeed(spec.seed, 0x5c1ceULL));
  PartitionResult result;
  for (int attempt = 1; attempt <= spec.max_retries; ++attempt) {
    result.attempts = attempt;
    std::vector<std::vector<NodeId>> slices;
    if (GrowOnce(topology, weights, spec, elephants, rng, &slices)) {
      result.ok = true;
      result.config = SlicingConfig(std::move(slices), topology.num_nodes());
      return result;
    }
  }
  return result;
}

CandidateSet GenerateCandidates(const Topology& topology,
                                const NodeWeights& weights,
                                const SliceSpec& spec, int n, int max_runs,
                                int threads) {
  CandidateSet out;
  if (n <= 0) return out;
  const SliceSpec resolved = spec.Resolved(topology.num_nodes());
  if (max_runs <= 0) max_runs = 20 * n;
  std::set<std::vector<std::vector<NodeId>>> seen;
  const int batch = std::max(1, threads > 0 ? threads : WorkerCount()) * 4;
  int run = 0;
  while (run < max_runs && static_cast<int>(out.configs.size()) < n) {
    const int count = std::min(batch, max_runs - run);
    std::vector<PartitionResult> results(count);
    ParallelFor(static_cast<size_t>(count), threads, [&](size_t i) {
      SliceSpec s = resolved;
      s.seed = MixSeed(resolved.seed, static_cast<uint64_t>(run) + i);
      results[i] = RandomizedPartition(topology, weights, s);
    });
    // Merge in run order so the result does not depend on scheduling.
    for (int i = 0; i < count && static_cast<int>(out.configs.size()) < n;
         ++i) {
      ++out.attempts;
      if (!results[i].ok) {
        ++out.failures;
        continue;
      }
      SlicingConfig canon = results[i].config.Canonical();
      if (!seen.insert(canon.slices()).second) {
        ++out.duplicates;
        continue;
      }
      out.configs.push_back(std::move(canon));
    }
    run += count;
  }
  return out;
}

ValidationResult ValidateSlicing(const Topology& topology,
                                 const std::vector<std::vector<NodeId>>& slices,
                                 const NodeWeights& weights,
                                 const SliceSpec& raw_spec) {
  ValidationResult r;
  auto fail = [&](std::string msg) {
    r.ok = false;
    r.errors.push_back(std::move(msg));
  };
  const size_t n = topology.num_nodes();
  SliceSpec spec = raw_spec;
  spec.k = static_cast<int>(slices.size());
  if (spec.sizes.empty() && spec.k >= 1) spec.sizes = DefaultSliceSizes(n, spec.k);
  if (slices.size() < 2) fail("fewer than 2 slices");
  if (raw_spec.k != static_cast<int>(slices.size())) {
    fail("expected " + std::to_string(raw_spec.k) + " slices, found " +
         std::to_string(slices.size()));
  }
  std::vector<int> count(n, 0);
  for (size_t j = 0; j < slices.size(); ++j) {
    for (NodeId v : slices[j]) {
      if (v < 0 || static_cast<size_t>(v) >= n) {
        fail("slice " + std::to_string(j) + ": unknown node " +
             std::to_string(v));
        continue;
      }
      ++count[v];
    }
  }
  for (size_t v = 0; v < n; ++v) {
    if (count[v] == 0) fail("node " + std::to_string(v) + " unassigned");
    if (count[v] > 1) fail("node " + std::to_string(v) + " assigned twice");
  }
  double total = 0.0;
  for (double w : weights.phi) total += w;
  const double target = slices.empty() ? 0.0 : total / slices.size();
  const double lo = target * (1.0 - raw_spec.epsilon);
  const double hi = target * (1.0 + raw_spec.epsilon);
  const double slack = kWindowSlack * target;
  // Stored configurations are canonical (reordered), so sizes are compared
  // as a multiset.
  std::vector<int> want = spec.sizes;
  std::vector<int> have;
  for (const auto& s : slices) have.push_back(static_cast<int>(s.size()));
  std::sort(want.begin(), want.end());
  std::sort(have.begin(), have.end());
  if (want.size() == have.size() && want != have) {
    std::string got, exp;
    for (size_t i = 0; i < have.size(); ++i) {
      got += (i ? "," : "") + std::to_string(have[i]);
      exp += (i ? "," : "") + std::to_string(want[i]);
    }
    fail("slice sizes {" + got + "} do not match {" + exp + "}");
  }
  for (size_t j = 0; j < slices.size(); ++j) {
    const auto& s = slices[j];
    bool valid_ids = std::all_of(s.begin(), s.end(), [&](NodeId v) {
      return v >= 0 && static_cast<size_t>(v) < n;
    });
    if (valid_ids && !InducedConnected(topology, s)) {
      fail("slice " + std::to_string(j) + " is not connected");
    }
    double w = 0.0;
    for (NodeId v : s) {
      if (v >= 0 && static_cast<size_t>(v) < weights.phi.size()) w += weights.phi[v];
    }
    if (w < lo - slack || w > hi + slack) {
      fail("slice " + std::to_string(j) + " weight " + std::to_string(w) +
           " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
  return r;
}

std::vector<double> SliceWeights(const SlicingConfig& config,
                                 const NodeWeights& weights) {
  std::vector<double> out;
  for (const auto& s : config.slices()) {
    double w = 0.0;
    for (NodeId v : s) w += weights.phi.at(v);
    out.push_back(w);
  }
  return out;
}

double BlastRadiusSource(const SlicingConfig& config,
                         const NodeWeights& weights) {
  const double total = weights.Total();
  if (total <= 0.0) return 0.0;
  std::vector<double> w = SliceWeights(config, weights);
  return *std::max_element(w.begin(), w.end()) / total;
}

double BlastRadiusSource(const SlicingConfig& config,
                         const DemandMatrix& demands) {
  size_t n = 0;
  for (const auto& s : config.slices()) n += s.size();
  return BlastRadiusSource(config, NodeWeightsFromDemands(demands, n));
}

double BlastRadiusTransit(const SlicingConfig& config,
                          const DemandMatrix& demands, const PathSet& paths) {
  std::vector<double> hit(config.num_slices(), 0.0);
  double total = 0.0;
  for (const auto& [c, d] : demands.entries()) {
    if (d <= 0.0) continue;
    total += d;
    std::set<int> touched{config.SliceOf(c.src)};
    const int ci = paths.CommodityIndex(c);
    if (ci >= 0) {
      auto [first, last] = paths.PathRange(ci);
      for (int p = first; p < last; ++p) {
        for (NodeId v : paths.paths()[p].nodes) touched.insert(config.SliceOf(v));
      }
    }
    for (int j : touched) hit[j] += d;
  }
  if (total <= 0.0) return 0.0;
  return *std::max_element(hit.begin(), hit.end()) / total;
}

std::string CandidatesToJson(const std::vector<Candidate>& candidates) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Candidate& c : candidates) {
    nlohmann::ordered_json j;
    j["slices"] = c.config.slices();
    j["weight_per_slice"] = c.weight_per_slice;
    j["blast_radius_source"] = c.blast_radius_source;
    j["blast_radius_transit"] = c.blast_radius_transit;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<std::vector<std::vector<NodeId>>> SlicesFromCandidatesJson(
    const std::string& text) {
  std::vector<std::vector<std::vector<NodeId>>> out;
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_array()) throw InputError("candidates file must be a JSON list");
    for (const auto& entry : j) {
      if (!entry.is_object() || !entry.contains("slices")) {
        throw InputError("candidate entry without 'slices'");
      }
      out.push_back(entry.at("slices").get<std::vector<std::vector<NodeId>>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("candidates file: ") + e.what());
  }
  return out;
}

}  // namespace safete
