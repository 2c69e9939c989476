#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace asap::cli {

/// Data owned by one seed: 2n points from one generator call, halved into the
/// search set (itself halved into train and validation) and a held-out test set.
struct SeedData {
  Dataset full;
  Dataset train;
  Dataset val;
  Dataset test;
};

SeedData make_seed_data(const DataSettings& data, std::uint64_t seed);

struct VariantRun {
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<SearchResult> search;  // empty for "random"
  Genotype genotype;
  double search_seconds = 0.0;
  std::uint64_t graph_nodes = 0;
  std::optional<ChildResult> child;
};

/// One search (or random draw) for `variant` at `seed`; trains the child when asked.
VariantRun run_variant(const RunConfig& config, const std::string& variant, std::uint64_t seed,
                       const SeedData& data, bool with_child);

/// Largest single-epoch validation accuracy drop over the final third of the recorded epochs.
double late_max_drop(const SearchTrace& trace);
/// Validation accuracy lost by the final hard prune.
double extraction_drop(const SearchResult& result);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure by index.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Writes `content` to `path`, creating parent directories; throws on any I/O failure.
void write_file(const std::string& path, const std::string& content);

struct CommandOptions {
  std::string config;
  std::string out;  // empty: config output
  std::optional<std::vector<std::uint64_t>> seeds;
  std::string genotype;
};

/// Loads the config and applies --out/--seeds overrides.
RunConfig resolve(const CommandOptions& options);

void cmd_search(const CommandOptions& options);
void cmd_simulate(const CommandOptions& options);
void cmd_evaluate(const CommandOptions& options);
void cmd_compare(const CommandOptions& options);

}  // namespace asap::cli
