#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "asap/asap_engine.hpp"
#include "asap/data_synth.hpp"
#include "asap/pac_harness.hpp"

namespace asap::cli {

/// Bad configuration. what() is "<file>:<line>: message" when a line is known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSettings {
  DatasetSpec spec;  // spec.n is the search set size; run seed s draws with spec.seed + s
};

struct SimulationSettings {
  std::vector<std::size_t> arms{2, 5, 10};
  std::vector<double> deltas{0.05, 0.1};
  std::vector<double> gaps{0.1, 0.3};
  double eta_l = 1.0;
  NoiseLaw noise = NoiseLaw::kUniform;
  double sigma = 0.5;
  std::size_t trials = 2000;
  std::uint64_t max_steps = 1'000'000;
  std::size_t threads = 1;
};

struct RunConfig {
  std::string source;  // path or "<string>"
  std::string name = "run";
  DataSettings data;
  SearchConfig search;
  ChildConfig child;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "runs";
  std::size_t jobs = 1;
  std::optional<SimulationSettings> simulation;
  std::vector<std::string> compare;  // variant names
  std::set<std::string> sections;    // top-level keys present in the file

  /// Throws ConfigError naming `section` when the file did not contain it.
  void require(const std::string& section) const;
};

RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::string& path);

/// "1,2,3" -> {1, 2, 3}; rejects empty items and non-numbers.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Variants accepted by the compare section.
const std::vector<std::string>& known_variants();
/// Applies a named variant to a base search configuration. "random" has no search.
SearchConfig apply_variant(const SearchConfig& base, const std::string& variant);

}  // namespace asap::cli
