#include <algorithm>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "safete/pathing.h"
#include "safete/slicing.h"
#include "toys.h"

namespace safete {
namespace {

using testing::MakeTopology;
using Slices = std::vector<std::vector<NodeId>>;

NodeWeights Weights(std::vector<double> phi) {
  NodeWeights w;
  w.phi = std::move(phi);
  return w;
}

bool Connected(const Topology& t, const std::vector<NodeId>& nodes) {
  if (nodes.empty()) return false;
  std::set<NodeId> in(nodes.begin(), nodes.end()), seen{nodes[0]};
  std::vector<NodeId> stack{nodes[0]};
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    for (NodeId u : t.undirected_neighbors(v)) {
      if (in.count(u) && seen.insert(u).second) stack.push_back(u);
    }
  }
  return seen.size() == in.size();
}

// Every feasible slicing by brute force over node-to-slice assignments, with
// elephant j in slice j. Returned in canonical form.
std::set<Slices> EnumerateFeasible(const Topology& t, const NodeWeights& w,
                                   const SliceSpec& spec) {
  const int n = static_cast<int>(t.num_nodes());
  const int k = spec.k;
  std::vector<NodeId> elephants = ElephantSources(w, k);
  const double target = w.Total() / k;
  std::set<Slices> out;
  std::vector<int> assign(n, 0);
  int total = 1;
  for (int i = 0; i < n; ++i) total *= k;
  for (int code = 0; code < total; ++code) {
    int c = code;
    for (int i = 0; i < n; ++i, c /= k) assign[i] = c % k;
    Slices s(k);
    for (int i = 0; i < n; ++i) s[assign[i]].push_back(i);
    bool ok = true;
    for (int j = 0; j < k && ok; ++j) {
      double weight = 0;
      for (NodeId v : s[j]) weight += w.phi[v];
      ok = assign[elephants[j]] == j &&
           static_cast<int>(s[j].size()) == spec.sizes[j] && Connected(t, s[j]) &&
           weight >= target * (1 - spec.epsilon) - 1e-9 &&
           weight <= target * (1 + spec.epsilon) + 1e-9;
    }
    if (ok) out.insert(SlicingConfig(s, n).Canonical().slices());
  }
  return out;
}

std::set<Slices> AsSet(const CandidateSet& c) {
  std::set<Slices> out;
  for (const auto& cfg : c.configs) out.insert(cfg.slices());
  return out;
}

TEST(NodeWeights, EgressSums) {
  DemandMatrix d;
  d.Set({0, 1}, 10);
  d.Set({0, 2}, 5);
  d.Set({1, 0}, 2);
  NodeWeights w = NodeWeightsFromDemands(d, 3);
  EXPECT_EQ(w.phi, (std::vector<double>{15, 2, 0}));
  EXPECT_EQ(w.Total(), 17);
}

TEST(NodeWeights, HistoryMeanAndMax) {
  DemandMatrix a, b;
  a.Set({0, 1}, 10);
  b.Set({0, 1}, 30);
  DemandHistory h({{1, a}, {2, b}});
  EXPECT_EQ(ComputeNodeWeights(h, 2, WeightMode::kMax).phi[0], 30);
  EXPECT_EQ(ComputeNodeWeights(h, 2, WeightMode::kMean).phi[0], 20);
  EXPECT_EQ(ParseWeightMode("max"), WeightMode::kMax);
  EXPECT_THROW(ParseWeightMode("median"), InputError);
}

TEST(Elephants, HeaviestWithIdTies) {
  EXPECT_EQ(ElephantSources(Weights({9, 5, 1}), 2), (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(ElephantSources(Weights({1, 5, 9}), 2), (std::vector<NodeId>{2, 1}));
  EXPECT_EQ(ElephantSources(Weights({2, 2, 2, 2}), 3), (std::vector<NodeId>{0, 1, 2}));
  EXPECT_THROW(ElephantSources(Weights({1, 2}), 3), InputError);
}

TEST(Sizes, MostEvenSplit) {
  EXPECT_EQ(DefaultSliceSizes(23, 5), (std::vector<int>{5, 5, 5, 4, 4}));
  EXPECT_EQ(DefaultSliceSizes(4, 2), (std::vector<int>{2, 2}));
  SliceSpec bad;
  bad.k = 2;
  bad.sizes = {1, 2};
  EXPECT_THROW(bad.Resolved(4), InputError);
  SliceSpec eps;
  eps.epsilon = 1.5;
  EXPECT_THROW(eps.Resolved(4), InputError);
}

TEST(Partition, PathGraphBalancedSplit) {
  Topology t = testing::PathGraph4();
  SliceSpec spec;
  spec.k = 2;
  spec.sizes = {2, 2};
  spec.epsilon = 0.2;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    spec.seed = seed;
    PartitionResult r = RandomizedPartition(t, Weights({4, 1, 1, 4}), spec);
    ASSERT_TRUE(r.ok);
    EXPECT_EQ(r.config.Canonical().slices(), (Slices{{0, 1}, {2, 3}}));
    // Elephants A and D land in different slices.
    EXPECT_NE(r.config.SliceOf(0), r.config.SliceOf(3));
  }
}

TEST(Partition, InfeasibleWindowFails) {
  Topology t = testing::PathGraph4();
  SliceSpec spec;
  spec.k = 2;
  spec.sizes = {2, 2};
  spec.epsilon = 0.1;
  spec.max_retries = 50;
  NodeWeights w = Weights({10, 1, 1, 1});
  ASSERT_TRUE(EnumerateFeasible(t, w, spec.Resolved(4)).empty());
  PartitionResult r = RandomizedPartition(t, w, spec);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.attempts, 50);
}

TEST(Partition, OutputsPassTheValidator) {
  Topology t = LoadTopology(std::filesystem::path(SAFETE_SOURCE_DIR) /
                            "data/geant/topology.json");
  DemandMatrix d = GravityDemands(t, std::vector<double>(23, 1.0), 100);
  NodeWeights w = NodeWeightsFromDemands(d, 23);
  SliceSpec spec;
  spec.k = 3;
  spec.epsilon = 0.3;
  int ok = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    spec.seed = seed;
    PartitionResult r = RandomizedPartition(t, w, spec);
    if (!r.ok) continue;
    ++ok;
    ValidationResult v = ValidateSlicing(t, r.config.slices(), w, spec);
    EXPECT_TRUE(v.ok) << (v.errors.empty() ? "" : v.errors[0]);
    EXPECT_LE(BlastRadiusSource(r.config, w), (1 + spec.epsilon) / spec.k + 1e-9);
  }
  EXPECT_GT(ok, 0);
}

TEST(Candidates, SingletonAndReproducible) {
  Topology t = testing::PathGraph4();
  SliceSpec spec;
  spec.k = 2;
  spec.sizes = {2, 2};
  CandidateSet one = GenerateCandidates(t, Weights({4, 1, 1, 4}), spec, 1);
  ASSERT_EQ(one.configs.size(), 1u);
  Topology ring = MakeTopology({"0", "1", "2", "3", "4", "5"},
                               {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 4, 1}, {4, 5, 1}, {5, 0, 1}},
                               true);
  NodeWeights w = Weights({2, 1, 1, 2, 1, 1});
  spec.sizes = {3, 3};
  spec.epsilon = 0.5;
  CandidateSet a = GenerateCandidates(ring, w, spec, 10, 200, 1);
  CandidateSet b = GenerateCandidates(ring, w, spec, 10, 200, 3);
  EXPECT_EQ(AsSet(a), AsSet(b));
  ASSERT_EQ(a.configs.size(), b.configs.size());
  for (size_t i = 0; i < a.configs.size(); ++i) EXPECT_EQ(a.configs[i], b.configs[i]);
}

TEST(Candidates, EnumerateTheFeasibleSetWithoutDuplicates) {
  Topology ring = MakeTopology({"0", "1", "2", "3", "4", "5"},
                               {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 4, 1}, {4, 5, 1}, {5, 0, 1}},
                               true);
  NodeWeights w = Weights({2, 1, 1, 2, 1, 1});
  SliceSpec spec;
  spec.k = 2;
  spec.sizes = {3, 3};
  spec.epsilon = 0.5;
  std::set<Slices> oracle = EnumerateFeasible(ring, w, spec.Resolved(6));
  ASSERT_EQ(oracle.size(), 3u);
  CandidateSet got = GenerateCandidates(ring, w, spec, 100, 1000);
  EXPECT_EQ(AsSet(got), oracle);
  EXPECT_EQ(got.configs.size(), oracle.size());
  // Path graph: exactly the one feasible split.
  Topology path = testing::PathGraph4();
  spec.sizes = {2, 2};
  spec.epsilon = 0.2;
  NodeWeights pw = Weights({4, 1, 1, 4});
  EXPECT_EQ(AsSet(GenerateCandidates(path, pw, spec, 100, 1000)),
            EnumerateFeasible(path, pw, spec.Resolved(4)));
}

TEST(Candidates, InfeasibleSpecGivesEmptyList) {
  Topology t = testing::PathGraph4();
  SliceSpec spec;
  spec.k = 2;
  spec.sizes = {2, 2};
  spec.epsilon = 0.1;
  spec.max_retries = 5;
  CandidateSet c = GenerateCandidates(t, Weights({10, 1, 1, 1}), spec, 10, 20);
  EXPECT_TRUE(c.configs.empty());
  EXPECT_EQ(c.failures, 20);
}

TEST(Validator, CatchesEachViolation) {
  Topology t = testing::PathGraph4();
  NodeWeights w = Weights({4, 1, 1, 4});
  SliceSpec spec;
  spec.k = 2;
  spec.sizes = {2, 2};
  spec.epsilon = 0.2;
  EXPECT_TRUE(ValidateSlicing(t, {{0, 1}, {2, 3}}, w, spec).ok);
  EXPECT_TRUE(ValidateSlicing(t, {{3, 2}, {1, 0}}, w, spec).ok);
  EXPECT_FALSE(ValidateSlicing(t, {{0, 1}, {1, 2, 3}}, w, spec).ok);  // overlap
  EXPECT_FALSE(ValidateSlicing(t, {{0, 1}, {2}}, w, spec).ok);        // coverage
  EXPECT_FALSE(ValidateSlicing(t, {{0, 2}, {1, 3}}, w, spec).ok);     // connectivity
  EXPECT_FALSE(ValidateSlicing(t, {{0}, {1, 2, 3}}, w, spec).ok);     // sizes
  EXPECT_FALSE(ValidateSlicing(t, {{0, 1}, {2, 3}}, Weights({8, 1, 1, 2}), spec).ok);
  EXPECT_FALSE(ValidateSlicing(t, {{0, 1, 2, 3}}, w, spec).ok);
  EXPECT_FALSE(ValidateSlicing(t, {{0, 1}, {2, 7}}, w, spec).ok);
}

TEST(BlastRadius, Source) {
  SlicingConfig s({{0, 1}, {2, 3}}, 4);
  EXPECT_DOUBLE_EQ(BlastRadiusSource(s, Weights({30, 30, 20, 20})), 0.6);
  EXPECT_DOUBLE_EQ(BlastRadiusSource(s, Weights({1, 1, 1, 1})), 0.5);
  SlicingConfig three({{0}, {1}, {2}}, 3);
  EXPECT_DOUBLE_EQ(BlastRadiusSource(three, Weights({5, 5, 5})), 1.0 / 3.0);
  DemandMatrix d;
  d.Set({0, 2}, 60);
  d.Set({2, 0}, 40);
  EXPECT_DOUBLE_EQ(BlastRadiusSource(s, d), 0.6);
  EXPECT_EQ(SliceWeights(s, Weights({30, 30, 20, 20})), (std::vector<double>{60, 40}));
}

TEST(BlastRadius, TransitConfinedEqualsSource) {
  Topology t = testing::PathGraph4();
  DemandMatrix d;
  d.Set({0, 1}, 60);
  d.Set({3, 2}, 40);
  PathSet ps = ComputePathSet(t, d, PathStrategy::kKShortest, 2);
  SlicingConfig s({{0, 1}, {2, 3}}, 4);
  EXPECT_DOUBLE_EQ(BlastRadiusTransit(s, d, ps), BlastRadiusSource(s, d));
}

TEST(BlastRadius, HubCarriesEverything) {
  Topology star = MakeTopology({"H", "A", "B", "C"}, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}}, true);
  DemandMatrix d;
  d.Set({1, 2}, 5);
  d.Set({2, 3}, 7);
  d.Set({3, 1}, 1);
  PathSet ps = ComputePathSet(star, d, PathStrategy::kKShortest, 4);
  SlicingConfig s({{0}, {1}, {2}, {3}}, 4);
  EXPECT_DOUBLE_EQ(BlastRadiusTransit(s, d, ps), 1.0);
}

TEST(BlastRadius, TransitAtLeastSource) {
  Topology t = testing::SevenNodeTopology();
  DemandMatrix d = GravityDemands(t, {5, 1, 1, 2, 4, 1, 1}, 100);
  PathSet ps = ComputePathSet(t, d, PathStrategy::kKShortest, 2);
  for (const Slices& sl : std::vector<Slices>{{{0, 5, 6}, {1, 2, 3, 4}},
                                              {{0, 1}, {2, 3, 4, 5, 6}},
                                              {{0, 1, 2}, {3, 4}, {5, 6}}}) {
    SlicingConfig s(sl, 7);
    EXPECT_GE(BlastRadiusTransit(s, d, ps), BlastRadiusSource(s, d));
    EXPECT_GE(BlastRadiusSource(s, d), 1.0 / static_cast<double>(sl.size()));
  }
}

TEST(Candidates, JsonRoundTrip) {
  Candidate c;
  c.config = SlicingConfig({{0, 1}, {2, 3}}, 4);
  c.weight_per_slice = {5, 5};
  c.blast_radius_source = 0.5;
  c.blast_radius_transit = 0.75;
  auto back = SlicesFromCandidatesJson(CandidatesToJson({c, c}));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], (Slices{{0, 1}, {2, 3}}));
  EXPECT_THROW(SlicesFromCandidatesJson("{}"), InputError);
}

TEST(SlicingConfig, ValidatesPartition) {
  EXPECT_THROW(SlicingConfig({{0, 1, 2}}, 3), InputError);
  EXPECT_THROW(SlicingConfig({{0, 1}, {1, 2}}, 3), InputError);
  EXPECT_THROW(SlicingConfig({{0}, {1}}, 3), InputError);
  SlicingConfig s({{3, 2}, {1, 0}}, 4);
  EXPECT_EQ(s.Canonical().slices(), (Slices{{0, 1}, {2, 3}}));
  EXPECT_EQ(s.SliceOf(3), 0);
}

}  // namespace
}  // namespace safete
