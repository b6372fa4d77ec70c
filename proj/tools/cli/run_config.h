#ifndef SAFETE_CLI_RUN_CONFIG_H_
#define SAFETE_CLI_RUN_CONFIG_H_

// Experiment configuration: one JSON file, validated before any work.
// Relative paths are resolved against the directory of the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safete/formulation.h"
#include "safete/netmodel.h"
#include "safete/pathing.h"
#include "safete/slicing.h"

namespace safete::cli {

namespace fs = std::filesystem;

struct DemandSource {
  enum class Kind { kFile, kGravity, kHistory };
  Kind kind = Kind::kGravity;
  fs::path file;
  fs::path history_dir;
  // Gravity masses by node id; empty means all ones.
  std::vector<double> masses;
  double total_gbps = 100.0;
};

struct PerturbationConfig {
  enum class Kind { kParametric, kEmpirical, kNone };
  Kind kind = Kind::kParametric;
  double sigma = 0.087;
  fs::path deviations;
  // Every slice sees the same draw (identical noise).
  bool shared = false;
};

struct SlicingSource {
  // Inline node lists take precedence over a file, which takes precedence
  // over generation.
  std::vector<std::vector<NodeId>> slices;
  std::optional<fs::path> file;
  int index = 0;
  // 0: taken from the given slices, or 2 when generating.
  int k = 0;
  std::vector<int> sizes;
  double epsilon = 0.2;
  int max_retries = 1000;
  int candidates = 100;
  int max_runs = 0;
  WeightMode weights = WeightMode::kMean;
};

struct PathConfig {
  PathStrategy strategy = PathStrategy::kKShortest;
  int k = 4;
  std::optional<fs::path> cache;
};

struct TeConfig {
  TEObjective objective = TEObjective::kMt;
  double lambda = 1.0;
  PathConfig paths;
  bool divergence_free = false;
  std::optional<double> beta;
  bool normalize_capacity = false;
  PhantomOptions phantom;
};

struct RunConfig {
  fs::path topology;
  DemandSource demands;
  PerturbationConfig perturbation;
  SlicingSource slicing;
  TeConfig te;
  TESolveOptions solve;
  int iterations = 1;
  uint64_t seed = 1;
  fs::path output = "out";
  std::vector<double> lambdas;
  int permutation_cap = 5040;
};

// Throws InputError naming the offending key.
RunConfig ParseRunConfig(const nlohmann::json& root, const fs::path& base_dir);
RunConfig LoadRunConfig(const fs::path& path);

}  // namespace safete::cli

#endif  // SAFETE_CLI_RUN_CONFIG_H_
