#include "safete/netmodel.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace safete {
namespace {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(Trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse " + what + " '" + s + "'");
  }
}

long long ParseInt(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse " + what + " '" + s + "'");
  }
}

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t MixSeed(uint64_t a, uint64_t b) {
  return SplitMix64(SplitMix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

Topology Topology::Create(std::vector<Node> nodes, std::vector<Link> links) {
  Topology t;
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id != static_cast<NodeId>(i)) {
      throw InputError("node ids must be dense 0..n-1; missing or duplicate id " +
                       std::to_string(i));
    }
  }
  t.nodes_ = std::move(nodes);
  const int n = static_cast<int>(t.nodes_.size());
  t.out_links_.assign(n, {});
  t.in_links_.assign(n, {});
  t.neighbors_.assign(n, {});
  for (size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (l.src < 0 || l.src >= n || l.dst < 0 || l.dst >= n) {
      throw InputError("link " + std::to_string(i) +
                       " references undeclared node");
    }
    if (l.src == l.dst) {
      throw InputError("self-loop at node " + t.nodes_[l.src].name);
    }
    if (!(l.capacity_gbps > 0.0) || !std::isfinite(l.capacity_gbps)) {
      throw InputError("non-positive capacity on link " +
                       t.nodes_[l.src].name + "->" + t.nodes_[l.dst].name);
    }
    auto [it, inserted] =
        t.link_index_.emplace(std::make_pair(l.src, l.dst),
                              static_cast<LinkId>(i));
    if (!inserted) {
      throw InputError("duplicate link " + t.nodes_[l.src].name + "->" +
                       t.nodes_[l.dst].name);
    }
    t.out_links_[l.src].push_back(static_cast<LinkId>(i));
    t.in_links_[l.dst].push_back(static_cast<LinkId>(i));
    t.neighbors_[l.src].push_back(l.dst);
    t.neighbors_[l.dst].push_back(l.src);
  }
  for (auto& nb : t.neighbors_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  t.links_ = std::move(links);
  return t;
}

std::optional<LinkId> Topology::FindLink(NodeId src, NodeId dst) const {
  auto it = link_index_.find({src, dst});
  if (it == link_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeId> Topology::FindNode(const std::string& name) const {
  for (const Node& n : nodes_) {
    if (n.name == name) return n.id;
  }
  return std::nullopt;
}

bool Topology::IsConnected() const {
  if (nodes_.empty()) return true;
  std::vector<bool> seen(nodes_.size(), false);
  std::queue<NodeId> q;
  q.push(0);
  seen[0] = true;
  size_t count = 1;
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    for (NodeId w : neighbors_[v]) {
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        q.push(w);
      }
    }
  }
  return count == nodes_.size();
}

Topology ParseTopologyJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("topology parse failure: ") + e.what());
  }
  if (!j.is_object() || !j.contains("nodes") || !j.contains("links")) {
    throw InputError("topology parse failure: expected {\"nodes\",\"links\"}");
  }
  std::vector<Node> nodes;
  std::vector<Link> links;
  try {
    for (const auto& jn : j.at("nodes")) {
      nodes.push_back({jn.at("id").get<int>(), jn.at("name").get<std::string>()});
    }
    std::set<int> ids;
    for (const Node& n : nodes) {
      if (!ids.insert(n.id).second) {
        throw InputError("duplicate node id " + std::to_string(n.id));
      }
    }
    for (const auto& jl : j.at("links")) {
      links.push_back({jl.at("src").get<int>(), jl.at("dst").get<int>(),
                       jl.at("capacity_gbps").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("topology parse failure: ") + e.what());
  }
  return Topology::Create(std::move(nodes), std::move(links));
}

Topology LoadTopology(const std::filesystem::path& path) {
  return ParseTopologyJson(ReadFile(path));
}

std::string TopologyToJson(const Topology& topology) {
  nlohmann::ordered_json j;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const Node& n : topology.nodes()) {
    j["nodes"].push_back({{"id", n.id}, {"name", n.name}});
  }
  j["links"] = nlohmann::ordered_json::array();
  for (const Link& l : topology.links()) {
    j["links"].push_back(
        {{"src", l.src}, {"dst", l.dst}, {"capacity_gbps", l.capacity_gbps}});
  }
  return j.dump(2);
}

void DemandMatrix::Set(Commodity c, double gbps) {
  if (c.src == c.dst) {
    throw InputError("demand from node " + std::to_string(c.src) +
                     " to itself");
  }
  if (!std::isfinite(gbps) || gbps < 0.0) {
    throw InputError("invalid demand rate for " + std::to_string(c.src) +
                     "->" + std::to_string(c.dst));
  }
  rates_[c] = gbps;
}

double DemandMatrix::Get(Commodity c) const {
  auto it = rates_.find(c);
  return it == rates_.end() ? 0.0 : it->second;
}

double DemandMatrix::Total() const {
  double total = 0.0;
  for (const auto& [c, r] : rates_) total += r;
  return total;
}

DemandMatrix ParseDemandCsv(const std::string& text, const Topology& topology) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || Trim(line) != "src,dst,gbps") {
    throw InputError("demand csv: expected header 'src,dst,gbps'");
  }
  const auto n = static_cast<long long>(topology.num_nodes());
  DemandMatrix d;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    auto f = SplitCsvLine(line);
    if (f.size() != 3) {
      throw InputError("demand csv line " + std::to_string(lineno) +
                       ": expected 3 fields");
    }
    long long s = ParseInt(f[0], "src");
    long long t = ParseInt(f[1], "dst");
    if (s < 0 || s >= n || t < 0 || t >= n) {
      throw InputError("demand csv line " + std::to_string(lineno) +
                       ": unknown node id");
    }
    Commodity c{static_cast<NodeId>(s), static_cast<NodeId>(t)};
    if (d.Contains(c)) {
      throw InputError("demand csv line " + std::to_string(lineno) +
                       ": duplicate commodity");
    }
    d.Set(c, ParseDouble(f[2], "gbps"));
  }
  return d;
}

DemandMatrix LoadDemandCsv(const std::filesystem::path& path,
                           const Topology& topology) {
  return ParseDemandCsv(ReadFile(path), topology);
}

std::string DemandToCsv(const DemandMatrix& demands) {
  std::ostringstream out;
  out.precision(17);
  out << "src,dst,gbps\n";
  for (const auto& [c, r] : demands.entries()) {
    out << c.src << "," << c.dst << "," << r << "\n";
  }
  return out.str();
}

DemandHistory::DemandHistory(std::vector<DemandSnapshot> snapshots)
    : snapshots_(std::move(snapshots)) {
  for (size_t i = 1; i < snapshots_.size(); ++i) {
    if (snapshots_[i].timestamp <= snapshots_[i - 1].timestamp) {
      throw InputError("demand history timestamps must be strictly increasing");
    }
  }
}

DemandMatrix DemandHistory::MaxMatrix() const {
  DemandMatrix out;
  for (const auto& s : snapshots_) {
    for (const auto& [c, r] : s.matrix.entries()) {
      out.Set(c, std::max(out.Get(c), r));
    }
  }
  return out;
}

DemandMatrix DemandHistory::MeanMatrix() const {
  std::map<Commodity, double> sum;
  for (const auto& s : snapshots_) {
    for (const auto& [c, r] : s.matrix.entries()) sum[c] += r;
  }
  DemandMatrix out;
  for (const auto& [c, v] : sum) {
    out.Set(c, v / static_cast<double>(snapshots_.size()));
  }
  return out;
}

DemandHistory LoadDemandHistory(const std::filesystem::path& dir,
                                const Topology& topology) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("demand history: not a directory: " + dir.string());
  }
  std::vector<DemandSnapshot> snaps;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") {
      continue;
    }
    int64_t ts = ParseInt(entry.path().stem().string(), "history timestamp");
    snaps.push_back({ts, LoadDemandCsv(entry.path(), topology)});
  }
  if (snaps.empty()) throw InputError("demand history: no csv files in " +
                                      dir.string());
  std::sort(snaps.begin(), snaps.end(),
            [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return DemandHistory(std::move(snaps));
}

DemandMatrix GravityDemands(const Topology& topology,
                            const std::vector<double>& masses,
                            double total_volume_gbps) {
  const size_t n = topology.num_nodes();
  if (masses.size() != n) {
    throw InputError("gravity: expected one mass per node");
  }
  if (!(total_volume_gbps > 0.0)) {
    throw InputError("gravity: total volume must be positive");
  }
  int positive = 0;
  double sum = 0.0, sum_sq = 0.0;
  for (double m : masses) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw InputError("gravity: masses must be finite and non-negative");
    }
    if (m > 0.0) ++positive;
    sum += m;
    sum_sq += m * m;
  }
  if (positive < 2) {
    throw InputError("gravity: need at least two nodes with positive mass");
  }
  // sum_{a != b} m_a m_b
  double norm = sum * sum - sum_sq;
  DemandMatrix d;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j || masses[i] == 0.0 || masses[j] == 0.0) continue;
      d.Set({static_cast<NodeId>(i), static_cast<NodeId>(j)},
            total_volume_gbps * masses[i] * masses[j] / norm);
    }
  }
  return d;
}

PerturbationModel PerturbationModel::Parametric(double sigma, uint64_t seed) {
  PerturbationModel m;
  m.kind = Kind::kParametric;
  m.sigma = sigma;
  m.seed = seed;
  m.Validate();
  return m;
}

PerturbationModel PerturbationModel::Empirical(std::vector<double> deviations,
                                               uint64_t seed) {
  PerturbationModel m;
  m.kind = Kind::kEmpirical;
  m.deviations = std::move(deviations);
  m.seed = seed;
  m.Validate();
  return m;
}

void PerturbationModel::Validate() const {
  if (kind == Kind::kParametric) {
    if (!(sigma > 0.0 && sigma <= 1.0)) {
      throw InputError("perturbation sigma must be in (0, 1]");
    }
  } else {
    if (deviations.empty()) {
      throw InputError("empirical perturbation needs at least one deviation");
    }
    for (double d : deviations) {
      if (!std::isfinite(d)) throw InputError("non-finite deviation");
    }
  }
}

std::vector<double> LoadDeviations(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = Trim(line);
    if (t.empty()) continue;
    out.push_back(ParseDouble(t, "deviation"));
  }
  if (out.empty()) throw InputError("deviation file is empty: " + path.string());
  return out;
}

double DrawDeviation(const PerturbationModel& model, int slice, Commodity c) {
  uint64_t key = MixSeed(MixSeed(model.seed, static_cast<uint64_t>(slice)),
                         (static_cast<uint64_t>(c.src) << 32) |
                             static_cast<uint32_t>(c.dst));
  std::mt19937_64 engine(key);
  if (model.kind == PerturbationModel::Kind::kParametric) {
    std::normal_distribution<double> normal(0.0, model.sigma);
    return normal(engine);
  }
  std::uniform_int_distribution<size_t> pick(0, model.deviations.size() - 1);
  return model.deviations[pick(engine)];
}

std::vector<DemandMatrix> Perturb(const DemandMatrix& base,
                                  const PerturbationModel& model, int count) {
  if (count < 1) throw InputError("perturb: count must be >= 1");
  model.Validate();
  std::vector<DemandMatrix> out(count);
  for (int j = 0; j < count; ++j) {
    for (const auto& [c, r] : base.entries()) {
      double delta = DrawDeviation(model, j, c);
      out[j].Set(c, std::max(0.0, r * (1.0 + delta)));
    }
  }
  return out;
}

DemandMatrix TopFraction(const DemandMatrix& base, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InputError("top_fraction: fraction must be in (0, 1]");
  }
  if (base.empty()) return {};
  std::vector<std::pair<Commodity, double>> entries(base.entries().begin(),
                                                    base.entries().end());
  // Map order is commodity index; stable sort keeps index order among ties.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  auto keep = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(entries.size()) - 1e-9));
  keep = std::clamp<size_t>(keep, 1, entries.size());
  DemandMatrix out;
  for (size_t i = 0; i < keep; ++i) out.Set(entries[i].first, entries[i].second);
  return out;
}

}  // namespace safete
