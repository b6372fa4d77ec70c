// safete: batch driver for the decentralized TE experiments.
//
//   safete <subcommand> <config.json> [--seed N] [--iterations N]
//          [--lambda L] [--out DIR]
//
// Exit codes: 0 success, 1 invalid input or failed validation, 2 solver
// failure, 3 internal error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "experiment.h"
#include "run_config.h"

namespace {

struct Overrides {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> lambda;
  std::optional<std::string> out;
};

CLI::App* AddCommand(CLI::App& app, const std::string& name,
                     const std::string& help, Overrides& o) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("config", o.config, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "override the config seed");
  sub->add_option("--iterations", o.iterations, "override the iteration count")
      ->check(CLI::PositiveNumber);
  sub->add_option("--lambda", o.lambda, "override te.lambda")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", o.out, "output directory");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized traffic-engineering experiments"};
  app.require_subcommand(1);
  Overrides o;
  using Command = int (*)(const safete::cli::RunConfig&, std::ostream&);
  const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
      {"simulate", {"perturbed slice controllers vs. LP baseline", safete::cli::CmdSimulate}},
      {"slice", {"generate slicing candidates", safete::cli::CmdSlice}},
      {"permute", {"all assignments of slice demand matrices", safete::cli::CmdPermute}},
      {"lambda-sweep", {"simulate across a list of lambdas", safete::cli::CmdLambdaSweep}},
      {"validate-slicing", {"re-check a candidates file", safete::cli::CmdValidateSlicing}},
      {"export-problem", {"write the base instance", safete::cli::CmdExportProblem}},
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, entry] : commands) {
    subs.emplace_back(AddCommand(app, name, entry.first, o), entry.second);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    safete::cli::RunConfig config = safete::cli::LoadRunConfig(o.config);
    if (o.seed) config.seed = *o.seed;
    if (o.iterations) config.iterations = *o.iterations;
    if (o.lambda) config.te.lambda = *o.lambda;
    if (o.out) config.output = *o.out;
    for (const auto& [sub, run] : subs) {
      if (sub->parsed()) return run(config, std::cerr);
    }
  } catch (const safete::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
