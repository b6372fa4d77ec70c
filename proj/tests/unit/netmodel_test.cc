#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "safete/netmodel.h"
#include "toys.h"

namespace safete {
namespace {

namespace fs = std::filesystem;
using testing::MakeTopology;

fs::path TempDir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("safete_netmodel_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

TEST(Topology, MinimalFileHasOneLink) {
  Topology t = ParseTopologyJson(
      R"({"nodes":[{"id":0,"name":"A"},{"id":1,"name":"B"}],
          "links":[{"src":0,"dst":1,"capacity_gbps":10}]})");
  EXPECT_EQ(t.num_nodes(), 2u);
  ASSERT_EQ(t.num_links(), 1u);
  EXPECT_DOUBLE_EQ(t.link(0).capacity_gbps, 10.0);
  EXPECT_EQ(t.FindLink(0, 1), LinkId{0});
  EXPECT_FALSE(t.FindLink(1, 0).has_value());
}

TEST(Topology, SelfLoopNamesTheNode) {
  try {
    ParseTopologyJson(
        R"({"nodes":[{"id":0,"name":"A"},{"id":1,"name":"B"}],
            "links":[{"src":0,"dst":0,"capacity_gbps":10}]})");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_STREQ(e.what(), "self-loop at node A");
  }
}

TEST(Topology, RejectsInvalidRecords) {
  const std::string nodes = R"("nodes":[{"id":0,"name":"A"},{"id":1,"name":"B"}])";
  EXPECT_THROW(ParseTopologyJson("{" + nodes +
                                 R"(,"links":[{"src":0,"dst":1,"capacity_gbps":1},
                                              {"src":0,"dst":1,"capacity_gbps":2}]})"),
               InputError);
  EXPECT_THROW(ParseTopologyJson("{" + nodes +
                                 R"(,"links":[{"src":0,"dst":1,"capacity_gbps":0}]})"),
               InputError);
  EXPECT_THROW(ParseTopologyJson("{" + nodes +
                                 R"(,"links":[{"src":0,"dst":5,"capacity_gbps":1}]})"),
               InputError);
  EXPECT_THROW(ParseTopologyJson(
                   R"({"nodes":[{"id":0,"name":"A"},{"id":2,"name":"B"}],"links":[]})"),
               InputError);
  EXPECT_THROW(ParseTopologyJson("{not json"), InputError);
}

TEST(Topology, GeantHas23Nodes) {
  Topology t = LoadTopology(fs::path(SAFETE_SOURCE_DIR) / "data/geant/topology.json");
  EXPECT_EQ(t.num_nodes(), 23u);
  EXPECT_EQ(t.num_links(), 74u);
  EXPECT_TRUE(t.IsConnected());
  for (const Link& l : t.links()) EXPECT_TRUE(t.FindLink(l.dst, l.src).has_value());
}

TEST(Topology, JsonRoundTrip) {
  Topology t = testing::SevenNodeTopology();
  Topology u = ParseTopologyJson(TopologyToJson(t));
  ASSERT_EQ(u.num_links(), t.num_links());
  for (size_t i = 0; i < t.num_links(); ++i) {
    EXPECT_EQ(u.link(i).src, t.link(i).src);
    EXPECT_EQ(u.link(i).dst, t.link(i).dst);
    EXPECT_EQ(u.link(i).capacity_gbps, t.link(i).capacity_gbps);
  }
  EXPECT_EQ(u.name(4), "e");
}

TEST(DemandMatrix, RejectsInvalidEntries) {
  DemandMatrix d;
  EXPECT_THROW(d.Set({1, 1}, 5), InputError);
  EXPECT_THROW(d.Set({0, 1}, -1), InputError);
  EXPECT_THROW(d.Set({0, 1}, NAN), InputError);
  d.Set({0, 1}, 2.5);
  d.Set({1, 0}, 0.5);
  EXPECT_DOUBLE_EQ(d.Total(), 3.0);
}

TEST(DemandMatrix, CsvResolvesIdsAgainstTopology) {
  Topology t = testing::Triangle();
  DemandMatrix d = ParseDemandCsv("src,dst,gbps\n0,2,10\n1,0,2.5\n", t);
  EXPECT_DOUBLE_EQ(d.Get({0, 2}), 10.0);
  EXPECT_DOUBLE_EQ(d.Get({1, 0}), 2.5);
  EXPECT_THROW(ParseDemandCsv("src,dst,gbps\n0,9,1\n", t), InputError);
  EXPECT_THROW(ParseDemandCsv("a,b,c\n0,1,1\n", t), InputError);
  EXPECT_EQ(ParseDemandCsv(DemandToCsv(d), t), d);
}

TEST(DemandHistory, MaxAndMean) {
  DemandMatrix a, b;
  a.Set({0, 1}, 10);
  b.Set({0, 1}, 30);
  b.Set({1, 2}, 4);
  DemandHistory h({{100, a}, {200, b}});
  EXPECT_DOUBLE_EQ(h.MaxMatrix().Get({0, 1}), 30);
  EXPECT_DOUBLE_EQ(h.MeanMatrix().Get({0, 1}), 20);
  EXPECT_DOUBLE_EQ(h.MeanMatrix().Get({1, 2}), 2);
  EXPECT_THROW(DemandHistory({{200, a}, {100, b}}), InputError);
  EXPECT_THROW(DemandHistory({{100, a}, {100, b}}), InputError);
}

TEST(DemandHistory, LoadsDirectoryInTimestampOrder) {
  Topology t = testing::Triangle();
  fs::path dir = TempDir("history");
  WriteText(dir / "2000.csv", "src,dst,gbps\n0,1,7\n");
  WriteText(dir / "1000.csv", "src,dst,gbps\n0,1,3\n");
  DemandHistory h = LoadDemandHistory(dir, t);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h.snapshots()[0].timestamp, 1000);
  EXPECT_DOUBLE_EQ(h.snapshots()[1].matrix.Get({0, 1}), 7);
}

TEST(Gravity, TwoNodesSplitEvenly) {
  Topology t = MakeTopology({"A", "B"}, {{0, 1, 10}}, true);
  DemandMatrix d = GravityDemands(t, {1, 3}, 8);
  EXPECT_DOUBLE_EQ(d.Get({0, 1}), 4);
  EXPECT_DOUBLE_EQ(d.Get({1, 0}), 4);
}

TEST(Gravity, ThreeNodeNormalization) {
  Topology t = testing::Triangle();
  DemandMatrix d = GravityDemands(t, {1, 1, 2}, 100);
  // sum over ordered pairs of m_a m_b = 1+2+1+2+2+2 = 10
  EXPECT_NEAR(d.Get({0, 1}), 10, 1e-12);
  EXPECT_NEAR(d.Get({0, 2}), 20, 1e-12);
  EXPECT_NEAR(d.Get({2, 1}), 20, 1e-12);
}

TEST(Gravity, NeedsTwoPositiveMasses) {
  Topology t = MakeTopology({"A", "B"}, {{0, 1, 10}}, true);
  EXPECT_THROW(GravityDemands(t, {1, 0}, 5), InputError);
  EXPECT_THROW(GravityDemands(t, {0, 0}, 5), InputError);
  EXPECT_THROW(GravityDemands(t, {1, 1}, 0), InputError);
}

TEST(Gravity, TotalMatchesVolumeForRandomMasses) {
  Topology t = LoadTopology(fs::path(SAFETE_SOURCE_DIR) / "data/geant/topology.json");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> m(t.num_nodes());
    for (double& x : m) x = u(rng);
    m[trial % m.size()] = 0.0;
    const double vol = 1.0 + 1000.0 * u(rng);
    DemandMatrix d = GravityDemands(t, m, vol);
    EXPECT_NEAR(d.Total() / vol, 1.0, 1e-9);
  }
}

TEST(Perturb, ZeroDeviationIsIdentity) {
  DemandMatrix base = GravityDemands(testing::Triangle(), {1, 2, 3}, 60);
  auto out = Perturb(base, PerturbationModel::Empirical({0.0}, 9), 3);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& m : out) EXPECT_EQ(m, base);
}

TEST(Perturb, LargeNegativeDeviationClipsToZero) {
  DemandMatrix base;
  base.Set({0, 1}, 100);
  auto out = Perturb(base, PerturbationModel::Empirical({-1.5}, 1), 1);
  EXPECT_EQ(out[0].Get({0, 1}), 0.0);
}

TEST(Perturb, ParametricTailMatchesCalibration) {
  PerturbationModel model = PerturbationModel::Parametric(0.087, 42);
  int over = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Commodity c{i / 100, 100 + i % 100};
    if (std::abs(DrawDeviation(model, 0, c)) > 0.10) ++over;
  }
  // 2 * Phi(-0.10 / 0.087) = 0.2504
  EXPECT_NEAR(static_cast<double>(over) / n, 0.25, 0.02);
}

TEST(Perturb, ReproducibleAndKeyedPerCommodity) {
  DemandMatrix base = GravityDemands(testing::SevenNodeTopology(),
                                     {1, 2, 3, 4, 5, 6, 7}, 500);
  PerturbationModel model = PerturbationModel::Parametric(0.087, 5);
  auto a = Perturb(base, model, 4);
  auto b = Perturb(base, model, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a[0], a[1]);
  // Dropping a commodity leaves the draws of the others unchanged.
  DemandMatrix smaller;
  for (const auto& [c, r] : base.entries()) {
    if (c.src != 0) smaller.Set(c, r);
  }
  auto s = Perturb(smaller, model, 4);
  for (int j = 0; j < 4; ++j) {
    for (const auto& [c, r] : s[j].entries()) EXPECT_EQ(r, a[j].Get(c));
  }
}

TEST(Perturb, PreservesZeroEntries) {
  DemandMatrix base;
  base.Set({0, 1}, 0.0);
  base.Set({1, 0}, 3.0);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto out = Perturb(base, PerturbationModel::Parametric(0.5, seed), 3);
    for (const auto& m : out) EXPECT_EQ(m.Get({0, 1}), 0.0);
  }
}

TEST(Perturb, ValidatesModel) {
  DemandMatrix base;
  base.Set({0, 1}, 1);
  EXPECT_THROW(PerturbationModel::Parametric(0.0, 1), InputError);
  EXPECT_THROW(PerturbationModel::Parametric(1.5, 1), InputError);
  EXPECT_THROW(PerturbationModel::Empirical({}, 1), InputError);
  EXPECT_THROW(Perturb(base, PerturbationModel::Parametric(0.1, 1), 0), InputError);
}

TEST(Deviations, LoadsOnePerLine) {
  fs::path dir = TempDir("dev");
  WriteText(dir / "d.txt", "0.1\n-0.2\n\n0\n");
  EXPECT_EQ(LoadDeviations(dir / "d.txt"), (std::vector<double>{0.1, -0.2, 0}));
  WriteText(dir / "empty.txt", "\n");
  EXPECT_THROW(LoadDeviations(dir / "empty.txt"), InputError);
}

DemandMatrix FromValues(const std::vector<double>& v) {
  DemandMatrix d;
  for (size_t i = 0; i < v.size(); ++i) d.Set({0, static_cast<int>(i) + 1}, v[i]);
  return d;
}

TEST(TopFraction, Examples) {
  DemandMatrix d = FromValues({10, 5, 1, 1});
  EXPECT_EQ(TopFraction(d, 1.0), d);
  DemandMatrix half = TopFraction(d, 0.5);
  EXPECT_EQ(half, FromValues({10, 5}));
  DemandMatrix ties = TopFraction(FromValues({3, 3, 3}), 0.34);
  ASSERT_EQ(ties.size(), 2u);
  EXPECT_TRUE(ties.Contains({0, 1}));
  EXPECT_TRUE(ties.Contains({0, 2}));
  EXPECT_TRUE(TopFraction(DemandMatrix{}, 0.5).empty());
  EXPECT_THROW(TopFraction(d, 0.0), InputError);
}

}  // namespace
}  // namespace safete
