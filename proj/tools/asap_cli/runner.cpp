#include "runner.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace asap::cli {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kRandomCellSalt = 0x52414e444f4d0000ULL;
constexpr std::uint64_t kTestSplitSalt = 0x5445535400000000ULL;

std::string num(double v) { return fmt::format("{:.17g}", v); }

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::string seed_dir(const std::string& out, std::uint64_t seed) {
  return (fs::path(out) / fmt::format("seed_{}", seed)).string();
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

std::string sparsity_curve(const SearchTrace& trace) {
  std::string out;
  for (const auto& r : trace.epochs) out += (out.empty() ? "" : ";") + fmt::format("{:.6g}", r.sparsity);
  return out;
}

std::uint64_t total_nodes(const SearchTrace& trace) {
  std::uint64_t n = 0;
  for (const auto& r : trace.epochs) n += r.graph_nodes;
  return n;
}

SearchConfig seeded(SearchConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

ChildConfig seeded(ChildConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

}  // namespace

SeedData make_seed_data(const DataSettings& data, std::uint64_t seed) {
  SeedData out;
  DatasetSpec spec = data.spec;
  spec.seed = data.spec.seed + seed;
  spec.n = 2 * data.spec.n;
  std::tie(out.full, out.test) = split_half(make_dataset(spec), seed ^ kTestSplitSalt);
  std::tie(out.train, out.val) = split_half(out.full, seed);
  return out;
}

VariantRun run_variant(const RunConfig& config, const std::string& variant, std::uint64_t seed,
                       const SeedData& data, bool with_child) {
  VariantRun run;
  run.variant = variant;
  run.seed = seed;
  const SearchConfig sc = seeded(apply_variant(config.search, variant), seed);
  const OpSet ops = sc.opset();
  if (variant == "random") {
    Rng rng(seed ^ kRandomCellSalt);
    run.genotype = random_genotype(sc.steps, ops, sc.keep_per_node, rng);
  } else {
    const auto start = std::chrono::steady_clock::now();
    run.search = search(sc, data.train, data.val);
    run.search_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.genotype = run.search->genotype;
    run.graph_nodes = total_nodes(run.search->trace);
  }
  if (with_child) run.child = train_child(run.genotype, ops, data.full, data.test, seeded(config.child, seed));
  return run;
}

double late_max_drop(const SearchTrace& trace) {
  const std::size_t n = trace.epochs.size();
  double worst = 0.0;
  for (std::size_t i = std::max<std::size_t>(1, 2 * n / 3); i < n; ++i) {
    worst = std::max(worst, trace.epochs[i - 1].val_acc - trace.epochs[i].val_acc);
  }
  return worst;
}

double extraction_drop(const SearchResult& result) {
  return result.val_acc_before_extract - result.val_acc_after_extract;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path));
  out << content;
  out.close();
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path));
}

RunConfig resolve(const CommandOptions& options) {
  RunConfig cfg = load_config(options.config);
  if (!options.out.empty()) cfg.output = options.out;
  if (options.seeds) cfg.seeds = *options.seeds;
  return cfg;
}

// ---------------------------------------------------------------------------

void cmd_search(const CommandOptions& options) {
  const RunConfig cfg = resolve(options);
  cfg.require("dataset");
  std::vector<std::optional<SearchResult>> results(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const SeedData data = make_seed_data(cfg.data, seed);
    SearchResult r = search(seeded(cfg.search, seed), data.train, data.val);
    const std::string dir = seed_dir(cfg.output, seed);
    write_file(join(dir, "trace.csv"), format_trace_csv(r.trace, false));
    write_file(join(dir, "genotype.txt"), format_genotype(r.genotype));
    const auto& last = r.trace.epochs.back();
    write_file(join(dir, "summary.csv"),
               "seed,epochs_run,converged,final_temperature,final_entropy,final_sparsity,final_val_acc,"
               "val_acc_after_extract,genotype_edges,ties,graph_nodes,sparsity_curve\n" +
                   fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", seed, r.trace.epochs.size(), r.converged ? 1 : 0,
                               num(last.temperature), num(last.entropy), num(last.sparsity), num(last.val_acc),
                               num(r.val_acc_after_extract), r.genotype.edges.size(), r.ties, total_nodes(r.trace),
                               sparsity_curve(r.trace)));
    std::cerr << fmt::format("search seed {}: {} epochs, {}, final entropy {:.4f}, val acc {:.4f}\n", seed,
                             r.trace.epochs.size(), r.converged ? "converged" : "capped", last.entropy,
                             r.val_acc_after_extract);
    results[i] = std::move(r);
  });

  std::string summary = "seed,epochs_run,converged,final_entropy,final_sparsity,final_val_acc,val_acc_after_extract\n";
  std::string timing = "seed,epoch,epoch_seconds\n";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const auto& r = *results[i];
    const auto& last = r.trace.epochs.back();
    summary += fmt::format("{},{},{},{},{},{},{}\n", cfg.seeds[i], r.trace.epochs.size(), r.converged ? 1 : 0,
                           num(last.entropy), num(last.sparsity), num(last.val_acc), num(r.val_acc_after_extract));
    for (const auto& e : r.trace.epochs) timing += fmt::format("{},{},{:.6f}\n", cfg.seeds[i], e.epoch, e.epoch_seconds);
  }
  write_file(join(cfg.output, "summary.csv"), summary);
  write_file(join(cfg.output, "timing.csv"), timing);
}

void cmd_simulate(const CommandOptions& options) {
  const RunConfig cfg = resolve(options);
  cfg.require("simulation");
  const SimulationSettings& sim = *cfg.simulation;

  struct Job {
    std::uint64_t seed;
    std::size_t arms;
    double delta, gap;
  };
  std::vector<Job> jobs;
  for (auto seed : cfg.seeds) {
    for (auto arms : sim.arms) {
      for (double delta : sim.deltas) {
        for (double gap : sim.gaps) jobs.push_back({seed, arms, delta, gap});
      }
    }
  }
  std::vector<std::string> rows(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t j) {
    const Job& job = jobs[j];
    GradientStream stream = gap_stream(job.arms, job.gap, sim.eta_l, sim.noise, job.seed);
    stream.sigma = sim.sigma;
    TrialOptions opt;
    opt.delta = job.delta;
    opt.max_steps = sim.max_steps;
    const TrialSummary s = run_trials(stream, sim.trials, opt, sim.threads);
    std::string csv = "trial,survivor,best_survived,converged,steps\n";
    for (std::size_t t = 0; t < s.results.size(); ++t) {
      const auto& r = s.results[t];
      csv += fmt::format("{},{},{},{},{}\n", t, r.converged ? fmt::format("{}", r.survivor) : std::string(),
                         r.best_survived ? 1 : 0, r.converged ? 1 : 0, r.steps);
    }
    write_file(join(seed_dir(cfg.output, job.seed), fmt::format("N{}_delta{:g}_gap{:g}.csv", job.arms, job.delta, job.gap)),
               csv);
    const bool within = binomial_rate_within(s.failures, s.trials, job.delta);
    rows[j] = fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", job.seed, job.arms, num(job.delta), num(job.gap),
                          to_string(sim.noise), s.trials, s.failures, s.nonconverged, num(s.rate), num(job.delta),
                          within ? 1 : 0, num(s.mean_steps), s.claim1_violations);
    std::cerr << fmt::format("simulate seed {} N={} delta={:g} gap={:g}: rate {:.4f} ({}/{})\n", job.seed, job.arms,
                             job.delta, job.gap, s.rate, s.failures, s.trials);
  });
  std::string summary =
      "seed,arms,delta,gap,noise,trials,failures,nonconverged,rate,delta_target,rate_within_delta,mean_steps,"
      "claim1_violations\n";
  for (const auto& r : rows) summary += r;
  write_file(join(cfg.output, "summary.csv"), summary);
}

void cmd_evaluate(const CommandOptions& options) {
  if (options.genotype.empty()) throw ConfigError("evaluate: --genotype is required");
  const RunConfig cfg = resolve(options);
  cfg.require("dataset");
  const Genotype genotype = read_genotype(options.genotype);
  const OpSet ops = cfg.search.opset();
  const auto names = ops.names();
  for (const auto& e : genotype.edges) {
    if (std::find(names.begin(), names.end(), e.op) == names.end()) {
      throw ConfigError(fmt::format("evaluate: genotype op '{}' is not in the configured op set", e.op));
    }
  }
  std::vector<std::string> rows(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const SeedData data = make_seed_data(cfg.data, seed);
    const ChildConfig cc = seeded(cfg.child, seed);
    const ChildResult child = train_child(genotype, ops, data.full, data.test, cc);
    const ChildResult linear = train_linear(data.full, data.test, cc);
    rows[i] = fmt::format("{},{},{},{},{},{},{}\n", seed, genotype.edges.size(), num(child.train_acc),
                          num(child.test_acc), num(child.final_loss), num(linear.train_acc), num(linear.test_acc));
    std::cerr << fmt::format("evaluate seed {}: test acc {:.4f} (linear {:.4f})\n", seed, child.test_acc,
                             linear.test_acc);
  });
  std::string csv = "seed,genotype_edges,train_acc,test_acc,final_loss,linear_train_acc,linear_test_acc\n";
  for (const auto& r : rows) csv += r;
  write_file(join(cfg.output, "evaluate.csv"), csv);
}

void cmd_compare(const CommandOptions& options) {
  const RunConfig cfg = resolve(options);
  cfg.require("dataset");
  cfg.require("compare");
  if (cfg.seeds.size() < 5) {
    throw ConfigError(fmt::format("{}: compare needs at least 5 seeds, got {}", cfg.source, cfg.seeds.size()));
  }
  const auto& variants = cfg.compare;
  const std::size_t nseeds = cfg.seeds.size();
  std::vector<SeedData> data(nseeds);
  parallel_for(nseeds, cfg.jobs, [&](std::size_t i) { data[i] = make_seed_data(cfg.data, cfg.seeds[i]); });

  std::vector<VariantRun> runs(variants.size() * nseeds);
  parallel_for(runs.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t v = k / nseeds, i = k % nseeds;
    runs[k] = run_variant(cfg, variants[v], cfg.seeds[i], data[i], true);
    std::cerr << fmt::format("compare {} seed {}: child test acc {:.4f}\n", variants[v], cfg.seeds[i],
                             runs[k].child->test_acc);
  });

  std::string table =
      "pruner,seeds,child_acc_mean,child_acc_std,final_entropy_mean,final_entropy_std,graph_nodes_mean,"
      "graph_nodes_std,converged_runs,extraction_drop_mean,late_max_drop_mean\n";
  std::string timing = "pruner,search_seconds_mean,search_seconds_std\n";
  std::string per_run = "pruner,seed,child_test_acc,child_train_acc,epochs_run,converged,final_entropy,final_sparsity,"
                        "graph_nodes,val_acc_before_extract,val_acc_after_extract,late_max_drop,genotype_edges\n";
  std::string run_timing = "pruner,seed,search_seconds\n";
  std::string aligned_timing = "pruner,epoch,runs,epoch_seconds_mean\n";

  for (std::size_t v = 0; v < variants.size(); ++v) {
    const std::string& name = variants[v];
    std::vector<double> acc, entropy, nodes, seconds, ex_drop, late_drop;
    std::size_t converged = 0, longest = 0;
    for (std::size_t i = 0; i < nseeds; ++i) {
      const VariantRun& r = runs[v * nseeds + i];
      acc.push_back(r.child->test_acc);
      run_timing += fmt::format("{},{},{:.6f}\n", name, r.seed, r.search_seconds);
      if (!r.search) {
        per_run += fmt::format("{},{},{},{},,,,,,,,,{}\n", name, r.seed, num(r.child->test_acc),
                               num(r.child->train_acc), r.genotype.edges.size());
        continue;
      }
      const SearchResult& s = *r.search;
      const auto& last = s.trace.epochs.back();
      entropy.push_back(last.entropy);
      nodes.push_back(static_cast<double>(r.graph_nodes));
      seconds.push_back(r.search_seconds);
      ex_drop.push_back(extraction_drop(s));
      late_drop.push_back(late_max_drop(s.trace));
      converged += s.converged ? 1 : 0;
      longest = std::max(longest, s.trace.epochs.size());
      per_run += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", name, r.seed, num(r.child->test_acc),
                             num(r.child->train_acc), s.trace.epochs.size(), s.converged ? 1 : 0, num(last.entropy),
                             num(last.sparsity), r.graph_nodes, num(s.val_acc_before_extract),
                             num(s.val_acc_after_extract), num(late_max_drop(s.trace)), r.genotype.edges.size());
      write_file(join(join(cfg.output, "traces"), fmt::format("{}_seed{}.csv", name, r.seed)),
                 format_trace_csv(s.trace, false));
    }
    const Stats a = stats(acc);
    if (entropy.empty()) {
      table += fmt::format("{},{},{},{},,,,,,,\n", name, nseeds, num(a.mean), num(a.std));
      timing += fmt::format("{},,\n", name);
      continue;
    }
    const Stats h = stats(entropy), g = stats(nodes), t = stats(seconds);
    table += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", name, nseeds, num(a.mean), num(a.std), num(h.mean),
                         num(h.std), num(g.mean), num(g.std), converged, num(stats(ex_drop).mean),
                         num(stats(late_drop).mean));
    timing += fmt::format("{},{:.6f},{:.6f}\n", name, t.mean, t.std);

    // Runs that stopped early hold their last record, so every epoch averages all seeds.
    std::string aligned = "epoch,runs_active,temperature_mean,threshold_mean,sparsity_mean,entropy_mean,val_acc_mean,"
                          "train_loss_mean,graph_nodes_mean\n";
    for (std::size_t e = 0; e < longest; ++e) {
      double temp = 0, theta = 0, sp = 0, ent = 0, va = 0, loss = 0, gn = 0;
      double secs = 0;
      std::size_t active = 0;
      for (std::size_t i = 0; i < nseeds; ++i) {
        const auto& epochs = runs[v * nseeds + i].search->trace.epochs;
        const auto& rec = epochs[std::min(e, epochs.size() - 1)];
        const bool live = e < epochs.size();
        active += live ? 1 : 0;
        temp += rec.temperature;
        theta += rec.threshold;
        sp += rec.sparsity;
        ent += rec.entropy;
        va += rec.val_acc;
        loss += rec.train_loss;
        gn += live ? static_cast<double>(rec.graph_nodes) : 0.0;
        secs += live ? rec.epoch_seconds : 0.0;
      }
      const double n = static_cast<double>(nseeds);
      aligned += fmt::format("{},{},{},{},{},{},{},{},{}\n", e, active, num(temp / n), num(theta / n), num(sp / n),
                             num(ent / n), num(va / n), num(loss / n), num(gn / static_cast<double>(active)));
      aligned_timing += fmt::format("{},{},{},{:.6f}\n", name, e, active, secs / static_cast<double>(active));
    }
    write_file(join(join(cfg.output, "aligned"), name + ".csv"), aligned);
  }
  write_file(join(cfg.output, "comparison.csv"), table);
  write_file(join(cfg.output, "runs.csv"), per_run);
  write_file(join(join(cfg.output, "timing"), "comparison_timing.csv"), timing);
  write_file(join(join(cfg.output, "timing"), "runs_timing.csv"), run_timing);
  write_file(join(join(cfg.output, "timing"), "aligned_epoch_seconds.csv"), aligned_timing);
}

}  // namespace asap::cli
