#ifndef SAFETE_CLI_EXPERIMENT_H_
#define SAFETE_CLI_EXPERIMENT_H_

// Experiment drivers behind the CLI subcommands. Each driver is usable on
// its own so that tests can run the same protocol without touching disk.

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "run_config.h"
#include "safete/decentral.h"
#include "safete/formulation.h"
#include "safete/slicing.h"

namespace safete::cli {

// Inputs loaded once per experiment.
struct Experiment {
  RunConfig config;
  std::shared_ptr<const Topology> topology;
  DemandMatrix base;
  DemandHistory history;  // the base matrix alone unless a history was given
  std::shared_ptr<const PathSet> paths;
  NodeWeights weights;
  std::vector<double> deviations;  // empirical perturbation only
};

// The slicing spec of the config (k defaulting to 2) seeded with config.seed.
SliceSpec SpecFor(const Experiment& ex);

Experiment LoadExperiment(const RunConfig& config);
// Same as LoadExperiment but with already-loaded data (no files touched).
Experiment MakeExperiment(const RunConfig& config, Topology topology,
                          DemandMatrix base, DemandHistory history = {});

// Candidates annotated with blast radii, sorted by blast_radius_source
// (stable, so discovery order breaks ties).
std::vector<Candidate> SliceCandidates(const Experiment& ex, int n,
                                       CandidateSet* raw = nullptr);

// Inline slices, an entry of a candidates file, or the index-th best
// generated candidate. Throws InputError when none can be produced.
SlicingConfig ResolveSlicing(const Experiment& ex);

// One TE method run by every controller.
struct Method {
  std::string name;
  FormulationOptions formulation;
  TESolveOptions solve;
};

Method RegularizedMethod(const Experiment& ex, const SlicingConfig& slicing,
                         double lambda);
Method LpMethod(const Experiment& ex);

// The k per-slice matrices of one iteration.
std::vector<DemandMatrix> SliceDemands(const Experiment& ex, int k,
                                       uint64_t seed);

struct ReportRow {
  int iteration = 0;
  std::string method;
  TEObjective objective = TEObjective::kMt;
  double lambda = 0.0;
  int k = 0;
  DivergenceReport report;
  std::string label;  // permutation assignment, empty otherwise
};

std::string ReportHeader(bool with_label = false);
std::string FormatRow(const ReportRow& row, bool with_label = false);

struct RunOutcome {
  bool ok = true;
  std::string error;
  std::vector<ReportRow> rows;
};

using RowSink = std::function<void(const ReportRow&)>;

// Iterations 0..n-1; each perturbs k matrices, runs every method and the
// oracle and yields one row per method, in method order. Rows reach `sink`
// in iteration order. Stops at the first failed solve; rows of earlier
// iterations are kept.
RunOutcome Simulate(const Experiment& ex, const SlicingConfig& slicing,
                    const std::vector<Method>& methods, int iterations,
                    uint64_t seed, const RowSink& sink = {});

// All k! assignments of one set of k matrices to slices (lexicographic), or
// `cap` uniformly sampled ones when k! exceeds the cap.
std::vector<std::vector<int>> Assignments(int k, int cap, uint64_t seed);

RunOutcome Permute(const Experiment& ex, const SlicingConfig& slicing,
                   const Method& method, const RowSink& sink = {});

struct Summary {
  std::string method;
  double lambda = 0.0;
  int rows = 0;
  double excess_mean = 0, excess_median = 0, excess_max = 0;
  double throughput_mean = 0, throughput_median = 0, throughput_min = 0;
  double congested_mean = 0, congested_median = 0, congested_max = 0;
  double util_mean = 0, util_max = 0;
  double divergence_mean = 0, divergence_max = 0;
};

// One summary per (method, lambda), in first-appearance order.
std::vector<Summary> Summarize(const std::vector<ReportRow>& rows);
std::string SummaryJson(const std::vector<Summary>& summaries);
std::string SummaryCsv(const std::vector<Summary>& summaries);

// Subcommands; return the process exit code. Diagnostics go to `log`.
int CmdSimulate(const RunConfig& config, std::ostream& log);
int CmdSlice(const RunConfig& config, std::ostream& log);
int CmdPermute(const RunConfig& config, std::ostream& log);
int CmdLambdaSweep(const RunConfig& config, std::ostream& log);
int CmdValidateSlicing(const RunConfig& config, std::ostream& log);
int CmdExportProblem(const RunConfig& config, std::ostream& log);

}  // namespace safete::cli

#endif  // SAFETE_CLI_EXPERIMENT_H_
