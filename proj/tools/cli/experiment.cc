#include "experiment.h"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "safete/parallel.h"

namespace safete::cli {
namespace {

std::string ReadText(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
}

void Finish(Experiment& ex, bool use_cache) {
  const RunConfig& c = ex.config;
  if (ex.history.empty()) ex.history = DemandHistory({DemandSnapshot{0, ex.base}});
  const PathConfig& pc = c.te.paths;
  if (use_cache && pc.cache && fs::exists(*pc.cache)) {
    ex.paths = std::make_shared<const PathSet>(LoadPathCache(*pc.cache, *ex.topology));
  } else {
    ex.paths = std::make_shared<const PathSet>(
        ComputePathSet(*ex.topology, ex.base, pc.strategy, pc.k));
    if (use_cache && pc.cache) SavePathCache(*pc.cache, *ex.paths);
  }
  ex.weights =
      ComputeNodeWeights(ex.history, ex.topology->num_nodes(), c.slicing.weights);
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double Mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double Max(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

double Min(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

struct ItemResult {
  bool ok = true;
  std::string error;
  std::vector<ReportRow> rows;
};

// Runs items in batches of the worker count and hands rows over in item
// order, stopping at the first failure.
RunOutcome RunItems(int n, const std::function<ItemResult(int)>& item,
                    const RowSink& sink) {
  RunOutcome out;
  const int batch = std::max(1, WorkerCount());
  for (int start = 0; start < n; start += batch) {
    const int count = std::min(batch, n - start);
    std::vector<ItemResult> results(count);
    ParallelFor(static_cast<size_t>(count), batch, [&](size_t i) {
      results[i] = item(start + static_cast<int>(i));
    });
    for (auto& r : results) {
      if (!r.ok) {
        out.ok = false;
        out.error = r.error;
        return out;
      }
      for (auto& row : r.rows) {
        if (sink) sink(row);
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

std::string FailureText(const SliceRun& run, const std::string& method) {
  std::string s = "method " + method + ":";
  for (size_t j = 0; j < run.statuses.size(); ++j) {
    if (run.statuses[j] != SolveStatus::kOptimal) {
      s += " slice " + std::to_string(j) + " " + ToString(run.statuses[j]);
    }
  }
  return s;
}

// Every method on one set of slice matrices; one oracle per objective.
ItemResult Evaluate(const Experiment& ex, const SlicingConfig& slicing,
                    const std::vector<Method>& methods,
                    const std::vector<DemandMatrix>& demands, int iteration,
                    const std::string& label) {
  ItemResult r;
  std::map<TEObjective, TESolution> oracles;
  for (const Method& m : methods) {
    DecentralOptions opt;
    opt.formulation = m.formulation;
    opt.solve = m.solve;
    opt.threads = 1;
    SliceRun run = RunDecentralized(ex.topology, ex.paths, slicing, demands, opt);
    if (!run.ok) {
      r.ok = false;
      r.error = "iteration " + std::to_string(iteration) + " " +
                FailureText(run, m.name);
      return r;
    }
    auto it = oracles.find(m.formulation.objective);
    if (it == oracles.end()) {
      TESolution oracle = OracleSolution(ex.topology, ex.paths, slicing, demands,
                                         m.formulation.objective);
      if (oracle.status != SolveStatus::kOptimal) {
        r.ok = false;
        r.error = "iteration " + std::to_string(iteration) + " oracle " +
                  ToString(oracle.status);
        return r;
      }
      it = oracles.emplace(m.formulation.objective, std::move(oracle)).first;
    }
    ReportRow row;
    row.iteration = iteration;
    row.method = m.name;
    row.objective = m.formulation.objective;
    row.lambda = m.formulation.lambda;
    row.k = static_cast<int>(slicing.num_slices());
    row.label = label;
    row.report = ComputeReport(*ex.topology, *ex.paths, slicing, run, it->second);
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string RunCsvHeaderLine(bool with_label) { return ReportHeader(with_label) + "\n"; }

}  // namespace

SliceSpec SpecFor(const Experiment& ex) {
  const SlicingSource& s = ex.config.slicing;
  SliceSpec spec;
  spec.k = s.k == 0 ? 2 : s.k;
  spec.sizes = s.sizes;
  spec.epsilon = s.epsilon;
  spec.max_retries = s.max_retries;
  spec.seed = ex.config.seed;
  return spec;
}

Experiment LoadExperiment(const RunConfig& config) {
  Experiment ex;
  ex.config = config;
  Topology topo = LoadTopology(config.topology);
  ex.topology = std::make_shared<const Topology>(std::move(topo));
  const DemandSource& d = config.demands;
  switch (d.kind) {
    case DemandSource::Kind::kFile:
      ex.base = LoadDemandCsv(d.file, *ex.topology);
      break;
    case DemandSource::Kind::kHistory:
      ex.history = LoadDemandHistory(d.history_dir, *ex.topology);
      ex.base = ex.history.MeanMatrix();
      break;
    case DemandSource::Kind::kGravity: {
      std::vector<double> masses = d.masses;
      if (masses.empty()) masses.assign(ex.topology->num_nodes(), 1.0);
      ex.base = GravityDemands(*ex.topology, masses, d.total_gbps);
      break;
    }
  }
  if (config.perturbation.kind == PerturbationConfig::Kind::kEmpirical) {
    ex.deviations = LoadDeviations(config.perturbation.deviations);
  }
  Finish(ex, true);
  return ex;
}

Experiment MakeExperiment(const RunConfig& config, Topology topology,
                          DemandMatrix base, DemandHistory history) {
  Experiment ex;
  ex.config = config;
  ex.topology = std::make_shared<const Topology>(std::move(topology));
  ex.base = std::move(base);
  ex.history = std::move(history);
  Finish(ex, false);
  return ex;
}

std::vector<Candidate> SliceCandidates(const Experiment& ex, int n,
                                       CandidateSet* raw) {
  CandidateSet set = GenerateCandidates(*ex.topology, ex.weights, SpecFor(ex), n,
                                        ex.config.slicing.max_runs);
  std::vector<Candidate> out;
  out.reserve(set.configs.size());
  for (const SlicingConfig& config : set.configs) {
    Candidate c;
    c.config = config;
    c.weight_per_slice = SliceWeights(config, ex.weights);
    c.blast_radius_source = BlastRadiusSource(config, ex.weights);
    c.blast_radius_transit = BlastRadiusTransit(config, ex.base, *ex.paths);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.blast_radius_source < b.blast_radius_source;
  });
  if (raw) *raw = std::move(set);
  return out;
}

SlicingConfig ResolveSlicing(const Experiment& ex) {
  const SlicingSource& s = ex.config.slicing;
  const size_t n = ex.topology->num_nodes();
  if (!s.slices.empty()) return SlicingConfig(s.slices, n);
  if (s.file) {
    auto entries = SlicesFromCandidatesJson(ReadText(*s.file));
    if (static_cast<size_t>(s.index) >= entries.size()) {
      throw InputError("slicing.index " + std::to_string(s.index) + " out of range: " +
                       s.file->string() + " has " + std::to_string(entries.size()) +
                       " entries");
    }
    return SlicingConfig(entries[s.index], n);
  }
  auto candidates = SliceCandidates(ex, std::max(s.candidates, s.index + 1));
  if (static_cast<size_t>(s.index) >= candidates.size()) {
    throw InputError("slicing: no feasible configuration was found");
  }
  return candidates[s.index].config;
}

Method RegularizedMethod(const Experiment& ex, const SlicingConfig& slicing,
                         double lambda) {
  const TeConfig& te = ex.config.te;
  Method m;
  m.name = "regularized";
  m.formulation.objective = te.objective;
  m.formulation.lambda = lambda;
  m.formulation.normalize_capacity = te.normalize_capacity;
  m.formulation.phantom = te.phantom;
  if (te.divergence_free) {
    m.formulation.pruned = DivergenceFreeLinks(*ex.topology, *ex.paths, slicing);
  }
  if (te.beta) {
    LinkSet beta = BetaConstrainedLinks(*ex.topology, ex.history, *ex.paths, *te.beta);
    m.formulation.pruned.insert(beta.begin(), beta.end());
  }
  m.solve = ex.config.solve;
  return m;
}

Method LpMethod(const Experiment& ex) {
  Method m;
  m.name = "lp";
  m.formulation.objective = ex.config.te.objective;
  m.formulation.lambda = 0.0;
  m.solve = ex.config.solve;
  m.solve.kind = SolverKind::kSimplex;
  return m;
}

std::vector<DemandMatrix> SliceDemands(const Experiment& ex, int k, uint64_t seed) {
  const PerturbationConfig& p = ex.config.perturbation;
  if (p.kind == PerturbationConfig::Kind::kNone) {
    return std::vector<DemandMatrix>(k, ex.base);
  }
  PerturbationModel model =
      p.kind == PerturbationConfig::Kind::kParametric
          ? PerturbationModel::Parametric(p.sigma, seed)
          : PerturbationModel::Empirical(ex.deviations, seed);
  if (p.shared) return std::vector<DemandMatrix>(k, Perturb(ex.base, model, 1)[0]);
  return Perturb(ex.base, model, k);
}

std::string ReportHeader(bool with_label) {
  std::string h = "iteration,";
  if (with_label) h += "assignment,";
  h +=
      "method,objective,lambda,k,excess_flow_pct,effective_throughput,"
      "congested_frac,max_normalized_util,mean_path_divergence,"
      "oracle_excess_flow_pct,oracle_mlu";
  return h;
}

std::string FormatRow(const ReportRow& row, bool with_label) {
  const DivergenceReport& r = row.report;
  std::string s = std::to_string(row.iteration) + ",";
  if (with_label) s += row.label + ",";
  s += row.method + "," + ToString(row.objective) + "," + Num(row.lambda) + "," +
       std::to_string(row.k) + "," + Num(r.excess_flow_pct) + "," +
       Num(r.effective_throughput) + "," + Num(r.congestion.fraction) + "," +
       Num(r.congestion.max_normalized) + "," + Num(r.mean_path_divergence_pct) +
       "," + Num(r.oracle_excess_flow_pct) + "," + Num(r.oracle_mlu);
  return s;
}

RunOutcome Simulate(const Experiment& ex, const SlicingConfig& slicing,
                    const std::vector<Method>& methods, int iterations,
                    uint64_t seed, const RowSink& sink) {
  const int k = static_cast<int>(slicing.num_slices());
  return RunItems(
      iterations,
      [&](int it) {
        auto demands = SliceDemands(ex, k, MixSeed(seed, static_cast<uint64_t>(it)));
        return Evaluate(ex, slicing, methods, demands, it, "");
      },
      sink);
}

std::vector<std::vector<int>> Assignments(int k, int cap, uint64_t seed) {
  if (k < 1 || cap < 1) throw InputError("assignments: k and cap must be >= 1");
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  uint64_t total = 1;
  bool over = false;
  for (int i = 2; i <= k && !over; ++i) {
    total *= static_cast<uint64_t>(i);
    over = total > static_cast<uint64_t>(cap);
  }
  std::vector<std::vector<int>> out;
  if (!over) {
    do {
      out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cap; ++i) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    out.push_back(perm);
  }
  return out;
}

RunOutcome Permute(const Experiment& ex, const SlicingConfig& slicing,
                   const Method& method, const RowSink& sink) {
  const int k = static_cast<int>(slicing.num_slices());
  const uint64_t seed = ex.config.seed;
  const auto mats = SliceDemands(ex, k, MixSeed(seed, 0));
  const auto assignments = Assignments(k, ex.config.permutation_cap, MixSeed(seed, 0x9e37));
  const std::vector<Method> methods{method};
  return RunItems(
      static_cast<int>(assignments.size()),
      [&](int i) {
        const auto& a = assignments[i];
        std::vector<DemandMatrix> demands(k);
        std::string label;
        for (int j = 0; j < k; ++j) {
          demands[j] = mats[a[j]];
          label += (j ? "-" : "") + std::to_string(a[j]);
        }
        return Evaluate(ex, slicing, methods, demands, i, label);
      },
      sink);
}

std::vector<Summary> Summarize(const std::vector<ReportRow>& rows) {
  std::vector<std::pair<std::string, double>> keys;
  std::map<std::pair<std::string, double>, std::vector<const ReportRow*>> groups;
  for (const ReportRow& r : rows) {
    auto key = std::make_pair(r.method, r.lambda);
    auto& g = groups[key];
    if (g.empty()) keys.push_back(key);
    g.push_back(&r);
  }
  std::vector<Summary> out;
  for (const auto& key : keys) {
    const auto& g = groups[key];
    std::vector<double> ex, th, cg, ut, dv;
    for (const ReportRow* r : g) {
      ex.push_back(r->report.excess_flow_pct);
      th.push_back(r->report.effective_throughput);
      cg.push_back(r->report.congestion.fraction);
      ut.push_back(r->report.congestion.max_normalized);
      dv.push_back(r->report.mean_path_divergence_pct);
    }
    Summary s;
    s.method = key.first;
    s.lambda = key.second;
    s.rows = static_cast<int>(g.size());
    s.excess_mean = Mean(ex);
    s.excess_median = Median(ex);
    s.excess_max = Max(ex);
    s.throughput_mean = Mean(th);
    s.throughput_median = Median(th);
    s.throughput_min = Min(th);
    s.congested_mean = Mean(cg);
    s.congested_median = Median(cg);
    s.congested_max = Max(cg);
    s.util_mean = Mean(ut);
    s.util_max = Max(ut);
    s.divergence_mean = Mean(dv);
    s.divergence_max = Max(dv);
    out.push_back(s);
  }
  return out;
}

std::string SummaryJson(const std::vector<Summary>& summaries) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const Summary& s : summaries) {
    nlohmann::ordered_json j;
    j["method"] = s.method;
    j["lambda"] = s.lambda;
    j["rows"] = s.rows;
    j["excess_flow_pct"] = {{"mean", s.excess_mean}, {"median", s.excess_median},
                            {"max", s.excess_max}};
    j["effective_throughput"] = {{"mean", s.throughput_mean},
                                 {"median", s.throughput_median},
                                 {"min", s.throughput_min}};
    j["congested_frac"] = {{"mean", s.congested_mean},
                           {"median", s.congested_median},
                           {"max", s.congested_max}};
    j["max_normalized_util"] = {{"mean", s.util_mean}, {"max", s.util_max}};
    j["mean_path_divergence"] = {{"mean", s.divergence_mean}, {"max", s.divergence_max}};
    list.push_back(std::move(j));
  }
  return list.dump(2) + "\n";
}

std::string SummaryCsv(const std::vector<Summary>& summaries) {
  std::string s =
      "lambda,method,rows,congested_frac_mean,effective_throughput_mean,"
      "excess_flow_pct_mean,excess_flow_pct_max\n";
  for (const Summary& m : summaries) {
    s += Num(m.lambda) + "," + m.method + "," + std::to_string(m.rows) + "," +
         Num(m.congested_mean) + "," + Num(m.throughput_mean) + "," +
         Num(m.excess_mean) + "," + Num(m.excess_max) + "\n";
  }
  return s;
}

namespace {

// Streams rows into `path` as they arrive so a failed run keeps its prefix.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, bool with_label)
      : out_(path, std::ios::binary), with_label_(with_label) {
    if (!out_) throw InputError("cannot write " + path.string());
    out_ << RunCsvHeaderLine(with_label_);
    out_.flush();
  }
  void Append(const ReportRow& row) {
    out_ << FormatRow(row, with_label_) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
  bool with_label_;
};

void LogSummary(const std::vector<Summary>& summaries, std::ostream& log) {
  for (const Summary& s : summaries) {
    log << s.method << " lambda=" << Num(s.lambda) << " rows=" << s.rows
        << " excess_mean=" << Num(s.excess_mean) << "% excess_max="
        << Num(s.excess_max) << "% congested_mean=" << Num(s.congested_mean)
        << " throughput_mean=" << Num(s.throughput_mean) << "\n";
  }
}

}  // namespace

int CmdSimulate(const RunConfig& config, std::ostream& log) {
  Experiment ex = LoadExperiment(config);
  SlicingConfig slicing = ResolveSlicing(ex);
  std::vector<Method> methods{RegularizedMethod(ex, slicing, config.te.lambda),
                              LpMethod(ex)};
  EnsureDir(config.output);
  CsvWriter csv(config.output / "report.csv", false);
  RunOutcome out = Simulate(ex, slicing, methods, config.iterations, config.seed,
                            [&](const ReportRow& r) { csv.Append(r); });
  auto summaries = Summarize(out.rows);
  WriteText(config.output / "summary.json", SummaryJson(summaries));
  LogSummary(summaries, log);
  if (!out.ok) {
    log << "error: " << out.error << "\n";
    return 2;
  }
  return 0;
}

int CmdSlice(const RunConfig& config, std::ostream& log) {
  Experiment ex = LoadExperiment(config);
  CandidateSet raw;
  auto candidates = SliceCandidates(ex, config.slicing.candidates, &raw);
  EnsureDir(config.output);
  WriteText(config.output / "candidates.json", CandidatesToJson(candidates));
  log << "candidates=" << candidates.size() << " attempts=" << raw.attempts
      << " failures=" << raw.failures << " duplicates=" << raw.duplicates << "\n";
  if (candidates.empty()) {
    log << "warning: no feasible slicing configuration for the given sizes and "
           "epsilon\n";
  }
  return 0;
}

int CmdPermute(const RunConfig& config, std::ostream& log) {
  Experiment ex = LoadExperiment(config);
  SlicingConfig slicing = ResolveSlicing(ex);
  Method method = config.te.lambda > 0.0
                      ? RegularizedMethod(ex, slicing, config.te.lambda)
                      : LpMethod(ex);
  EnsureDir(config.output);
  CsvWriter csv(config.output / "permute.csv", true);
  RunOutcome out =
      Permute(ex, slicing, method, [&](const ReportRow& r) { csv.Append(r); });
  auto summaries = Summarize(out.rows);
  WriteText(config.output / "permute_summary.json", SummaryJson(summaries));
  LogSummary(summaries, log);
  if (!out.ok) {
    log << "error: " << out.error << "\n";
    return 2;
  }
  return 0;
}

int CmdLambdaSweep(const RunConfig& config, std::ostream& log) {
  Experiment ex = LoadExperiment(config);
  SlicingConfig slicing = ResolveSlicing(ex);
  std::vector<double> lambdas = config.lambdas;
  if (lambdas.empty()) lambdas.push_back(config.te.lambda);
  std::vector<Method> methods;
  for (double l : lambdas) methods.push_back(RegularizedMethod(ex, slicing, l));
  methods.push_back(LpMethod(ex));
  RunOutcome out = Simulate(ex, slicing, methods, config.iterations, config.seed);
  // Block b holds (regularized at lambda_b, lp) for every completed iteration,
  // the same rows a simulate run with that lambda produces.
  const size_t per = methods.size();
  const size_t done = out.rows.size() / per;
  std::vector<ReportRow> ordered;
  for (size_t b = 0; b + 1 < per; ++b) {
    for (size_t it = 0; it < done; ++it) {
      ordered.push_back(out.rows[it * per + b]);
      ordered.push_back(out.rows[it * per + per - 1]);
    }
  }
  EnsureDir(config.output);
  std::string csv = RunCsvHeaderLine(false);
  for (const auto& r : ordered) csv += FormatRow(r) + "\n";
  WriteText(config.output / "sweep.csv", csv);
  auto summaries = Summarize(ordered);
  WriteText(config.output / "sweep_summary.csv", SummaryCsv(summaries));
  WriteText(config.output / "sweep_summary.json", SummaryJson(summaries));
  LogSummary(summaries, log);
  if (!out.ok) {
    log << "error: " << out.error << "\n";
    return 2;
  }
  return 0;
}

int CmdValidateSlicing(const RunConfig& config, std::ostream& log) {
  Experiment ex = LoadExperiment(config);
  std::vector<std::vector<std::vector<NodeId>>> entries;
  if (!config.slicing.slices.empty()) {
    entries.push_back(config.slicing.slices);
  } else if (config.slicing.file) {
    entries = SlicesFromCandidatesJson(ReadText(*config.slicing.file));
  } else {
    throw InputError("validate-slicing: config names no slicing file or slices");
  }
  SliceSpec spec = SpecFor(ex);
  int bad = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (config.slicing.k == 0) spec.k = static_cast<int>(entries[i].size());
    ValidationResult v = ValidateSlicing(*ex.topology, entries[i], ex.weights, spec);
    if (v.ok) {
      log << "entry " << i << ": ok\n";
      continue;
    }
    ++bad;
    for (const auto& e : v.errors) log << "entry " << i << ": " << e << "\n";
  }
  log << entries.size() - bad << "/" << entries.size() << " valid\n";
  return bad == 0 ? 0 : 1;
}

int CmdExportProblem(const RunConfig& config, std::ostream& log) {
  Experiment ex = LoadExperiment(config);
  // Divergence-free pruning is the only part that depends on the slicing.
  const SlicingConfig slicing =
      config.te.divergence_free ? ResolveSlicing(ex) : SlicingConfig();
  FormulationOptions f = RegularizedMethod(ex, slicing, config.te.lambda).formulation;
  TEInstance inst = BuildInstance(ex.topology, ex.paths, ex.base, f);
  const std::string text = ProblemToString(inst.problem);
  if (ProblemToString(ProblemFromString(text)) != text) {
    log << "error: problem export does not round-trip\n";
    return 2;
  }
  EnsureDir(config.output);
  WriteText(config.output / "problem.txt", text);
  WriteText(config.output / "instance.txt", DumpInstance(inst));
  log << "vars=" << inst.problem.num_vars() << " rows=" << inst.problem.num_rows()
      << " mask=" << inst.mask_size() << "\n";
  return 0;
}

}  // namespace safete::cli
