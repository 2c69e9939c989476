#include <CLI11.hpp>
#include <fmt/format.h>

#include <exception>
#include <iostream>

#include "runner.hpp"

namespace {

enum Exit { kOk = 0, kRunFailed = 1, kBadInput = 2 };

}  // namespace

int main(int argc, char** argv) {
  using namespace asap::cli;
  CLI::App app{"Anneal-and-prune architecture search on synthetic data"};
  app.require_subcommand(1);

  CommandOptions options;
  std::string seeds;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", options.out, "Output directory (overrides the config)");
    sub->add_option("--seeds", seeds, "Comma-separated seed list (overrides the config)");
  };
  CLI::App* search = app.add_subcommand("search", "Run one search per seed; write trace, genotype and summary");
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo check of the pruning guarantee on bandit streams");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Train a fixed genotype from scratch and report test accuracy");
  CLI::App* compare = app.add_subcommand("compare", "Run several pruners on identical seeds and tabulate them");
  for (auto* sub : {search, simulate, evaluate, compare}) common(sub);
  evaluate->add_option("--genotype", options.genotype, "Genotype text file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!seeds.empty()) options.seeds = parse_seed_list(seeds);
    if (search->parsed()) cmd_search(options);
    if (simulate->parsed()) cmd_simulate(options);
    if (evaluate->parsed()) cmd_evaluate(options);
    if (compare->parsed()) cmd_compare(options);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailed;
  }
  return kOk;
}
