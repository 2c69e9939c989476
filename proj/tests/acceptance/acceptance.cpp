// Acceptance suite: one PASS/FAIL line per criterion.
//
//   asap_acceptance [--only N]... [--cli PATH] [--configs DIR] [--work DIR]

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "asap/asap_engine.hpp"
#include "asap/pac_harness.hpp"
#include "grad_check.hpp"
#include "runner.hpp"

namespace fs = std::filesystem;
using namespace asap;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Env {
  std::string cli;
  std::string configs;
  std::string work;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// 1. Gradients against central differences on random small cells.

Outcome gradients(const Env&) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick_steps(1, 2), pick_width(2, 3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), temp(0.3, 2.0);
  const auto& catalog = op_catalog();

  constexpr int kCells = 60;
  constexpr double kStep = 1e-5;
  double worst_alpha = 0.0, worst_omega = 0.0, worst_closed = 0.0;
  std::size_t alpha_entries = 0, omega_entries = 0;
  for (int c = 0; c < kCells; ++c) {
    std::vector<std::string> names;
    for (const auto& d : catalog) {
      if (rng() % 2 == 0) names.push_back(d.name);
    }
    while (names.size() < 2) {
      const auto& extra = catalog[rng() % catalog.size()].name;
      if (std::find(names.begin(), names.end(), extra) == names.end()) names.push_back(extra);
    }
    const std::size_t width = static_cast<std::size_t>(pick_width(rng));
    Rng init(rng());
    SearchModel model(2, 3, Cell(static_cast<std::size_t>(pick_steps(rng)), width, make_opset(names), init), init);
    for (auto* a : model.alpha_parameters()) {
      for (auto& v : a->value.data()) v = u(rng);
    }
    const double t = temp(rng);
    const Tensor x = testing::random_tensor({4, 2}, rng, 0.05);
    const std::vector<int> labels{0, 1, 2, static_cast<int>(rng() % 3)};
    auto build = [&](Graph& g) { return g.cross_entropy(model.forward(g, x, t), labels); };

    // Closed-form alpha gradient from one recorded pass, checked against autodiff and differences.
    std::vector<std::vector<double>> closed;
    {
      for (auto* p : model.alpha_parameters()) p->zero_grad();
      Graph g;
      g.backward(build(g));
      for (const auto& e : model.cell().edges()) {
        closed.push_back(alpha_grad(e));
        for (std::size_t k = 0; k < closed.back().size(); ++k) {
          worst_closed = std::max(worst_closed, testing::rel_error(closed.back()[k], e.alpha().grad[k]));
        }
      }
    }
    auto loss_at = [&] {
      Graph g;
      return build(g).value().item();
    };
    auto& edges = model.cell().edges();
    for (std::size_t ei = 0; ei < edges.size(); ++ei) {
      auto& a = edges[ei].alpha().value;
      for (std::size_t k = 0; k < a.numel(); ++k) {
        const double saved = a[k];
        a[k] = saved + kStep;
        const double up = loss_at();
        a[k] = saved - kStep;
        const double down = loss_at();
        a[k] = saved;
        worst_alpha = std::max(worst_alpha, testing::rel_error(closed[ei][k], (up - down) / (2.0 * kStep)));
        ++alpha_entries;
      }
    }
    const auto weights = model.weight_parameters();
    worst_omega = std::max(worst_omega, testing::grad_check(weights, build, kStep));
    for (auto* p : weights) omega_entries += p->value.numel();
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst_alpha < 1e-4 && worst_omega < 1e-4 && worst_closed < 1e-4 && elapsed < 60.0;
  return {ok, fmt::format("{} cells, {} alpha + {} omega entries; worst rel err alpha {:.2e}, omega {:.2e}, "
                          "closed-form vs autodiff {:.2e}; {:.1f}s (limits 1e-4, 60s)",
                          kCells, alpha_entries, omega_entries, worst_alpha, worst_omega, worst_closed, elapsed)};
}

// ---------------------------------------------------------------------------
// 2. Gibbs distribution invariants.

Outcome gibbs_invariants(const Env&) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> n_dist(2, 12);
  std::uniform_real_distribution<double> wide(-30.0, 30.0), unit(-1.0, 1.0), temp_log(-2.0, 2.0);
  std::uniform_int_distribution<int> grid(-8192, 8192);
  double norm_err = 0.0, high_err = 0.0, low_err = 0.0, darts_err = 0.0;
  std::size_t shift_mismatch = 0;
  for (int i = 0; i < 20000; ++i) {
    const std::size_t n = n_dist(rng);
    std::vector<double> a(n);
    for (auto& v : a) v = wide(rng);
    const double t = std::pow(10.0, temp_log(rng));
    const auto phi = gibbs(a, t);
    norm_err = std::max(norm_err, std::abs(std::accumulate(phi.begin(), phi.end(), 0.0) - 1.0));

    // Shifts on a dyadic grid keep a + c and the max subtraction exact.
    std::vector<double> g(n), shifted(n);
    const double c = grid(rng) / 1024.0;
    for (std::size_t k = 0; k < n; ++k) {
      g[k] = grid(rng) / 1024.0;
      shifted[k] = g[k] + c;
    }
    if (gibbs(g, t) != gibbs(shifted, t)) ++shift_mismatch;

    std::vector<double> small(n);
    for (auto& v : small) v = unit(rng);
    for (double p : gibbs(small, 1e6)) high_err = std::max(high_err, std::abs(p - 1.0 / static_cast<double>(n)));

    // Distinct weights with gaps of at least 1e-3 for the low-temperature limit.
    std::vector<double> spread(n);
    for (std::size_t k = 0; k < n; ++k) spread[k] = static_cast<double>(k) * 1e-3 + 0.5 * unit(rng) * 1e-4;
    std::shuffle(spread.begin(), spread.end(), rng);
    const auto best = static_cast<std::size_t>(std::max_element(spread.begin(), spread.end()) - spread.begin());
    const auto cold = gibbs(spread, 1e-6);
    for (std::size_t k = 0; k < n; ++k) low_err = std::max(low_err, std::abs(cold[k] - (k == best ? 1.0 : 0.0)));

    // Plain softmax in long double as the reference at T = 1.
    const auto warm = gibbs(small, 1.0);
    long double z = 0.0L;
    for (double v : small) z += std::exp(static_cast<long double>(v));
    for (std::size_t k = 0; k < n; ++k) {
      const auto ref = static_cast<double>(std::exp(static_cast<long double>(small[k])) / z);
      darts_err = std::max(darts_err, std::abs(warm[k] - ref));
    }
  }
  const bool ok = norm_err <= 1e-12 && shift_mismatch == 0 && high_err <= 1e-6 && low_err <= 1e-9 && darts_err <= 1e-12;
  return {ok, fmt::format("20000 draws: normalization {:.1e}, shift mismatches {}, T=1e6 uniform {:.1e}, "
                          "T=1e-6 one-hot {:.1e}, T=1 vs softmax {:.1e}",
                          norm_err, shift_mismatch, high_err, low_err, darts_err)};
}

// ---------------------------------------------------------------------------
// 3. Schedule arithmetic.

Outcome schedule_arithmetic(const Env&) {
  const double t50 = temp_exponential(1.3, 0.95, 50);
  const bool t50_ok = t50 >= 0.099 && t50 <= 0.101;
  const double theta = threshold_policy("fixed", 0, 7);
  const bool theta_ok = std::abs(theta - 0.4 / 7.0) <= 1e-15 && std::abs(theta - 0.05714285714285714) <= 1e-15;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> log_t(0.0, 6.0), eta(0.01, 10.0), delta(0.001, 0.999), nu_scale(0.2, 5.0);
  std::uniform_int_distribution<std::size_t> n_dist(2, 50);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int i = 0; i < 100000; ++i) {
    ScheduleState s;
    s.t = std::ceil(std::pow(10.0, log_t(rng)));
    s.n_ops = n_dist(rng);
    s.eta_l = eta(rng);
    s.delta = delta(rng);
    s.nu = nu_scale(rng) / static_cast<double>(s.n_ops);
    s.rho = rho_theoretical(s.t, s.n_ops, s.nu);
    if (!(s.rho > 0.0)) continue;
    const double temp = temp_theoretical(s);
    worst = std::max(worst, std::abs(margin_beta(s) * 2.0 * s.rho - temp) / std::max(1.0, temp));
    ++checked;
  }

  bool ends_ok = true;
  for (int p : {1, 3}) {
    for (auto [si, sf, t0, n, dt] : {std::tuple{0.0, 0.8, 20.0, 30.0, 1.0}, std::tuple{0.1, 0.9, 5.0, 10.0, 2.0},
                                     std::tuple{0.25, 0.75, 0.0, 7.0, 0.5}}) {
      ends_ok = ends_ok && sparsity_schedule(si, sf, t0, n, dt, p, t0) == si &&
                sparsity_schedule(si, sf, t0, n, dt, p, t0 + n * dt) == sf;
    }
  }
  const bool ok = t50_ok && theta_ok && worst <= 1e-12 && ends_ok;
  return {ok, fmt::format("T(50) = {:.12f}; theta = {:.17g}; beta*2rho identity worst {:.1e} over {} states; "
                          "sparsity endpoints {}",
                          t50, theta, worst, checked, ends_ok ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------------------
// 4. Threshold firing implies successive elimination.

Outcome claim1(const Env&) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::size_t> n_dist(2, 12);
  std::uniform_real_distribution<double> log_t(0.0, 4.0), u(-1.0, 1.0);
  constexpr int kDraws = 100000;
  std::size_t fired = 0, counter = 0, lse_fail = 0, arms = 0;
  for (int i = 0; i < kDraws; ++i) {
    const std::size_t n = n_dist(rng);
    const double t = std::ceil(std::pow(10.0, log_t(rng)));
    const ScheduleState s = theoretical_state(t, 1.0, 0.1, n);
    std::vector<double> alpha(n);
    for (auto& a : alpha) a = t * u(rng);
    if (!logsumexp_bound_check(alpha)) ++lse_fail;
    std::vector<double> scaled(n);
    for (std::size_t k = 0; k < n; ++k) scaled[k] = alpha[k] / s.temperature;
    if (!logsumexp_bound_check(scaled)) ++lse_fail;
    for (std::size_t arm = 0; arm < n; ++arm) {
      const Claim1Check c = check_claim1(alpha, arm, s);
      ++arms;
      if (c.threshold_fires) {
        ++fired;
        if (!c.se_fires) ++counter;
      }
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = counter == 0 && lse_fail == 0 && fired > 0 && elapsed < 120.0;
  return {ok, fmt::format("{} fuzzed (alpha, t, N), {} arms, {} threshold firings, {} counterexamples, "
                          "{} log-sum-exp bound failures; {:.1f}s (limit 120s)",
                          kDraws, arms, fired, counter, lse_fail, elapsed)};
}

// ---------------------------------------------------------------------------
// 5. Best-arm mis-selection rate within delta.

Outcome pac_validation(const Env&) {
  const auto start = std::chrono::steady_clock::now();
  constexpr std::size_t kTrials = 2000;
  std::size_t passed = 0, configs = 0;
  std::string worst;
  double worst_margin = -1.0;
  for (std::size_t n : {2u, 5u, 10u}) {
    for (double delta : {0.05, 0.1}) {
      for (double gap : {0.1, 0.3}) {
        ++configs;
        const GradientStream s = gap_stream(n, gap, 1.0, NoiseLaw::kUniform, 1000 + configs);
        TrialOptions opt;
        opt.delta = delta;
        const TrialSummary sum = run_trials(s, kTrials, opt);
        const bool within = binomial_rate_within(sum.failures, sum.trials, delta);
        passed += within ? 1 : 0;
        const double margin = sum.rate / delta;
        if (margin > worst_margin) {
          worst_margin = margin;
          worst = fmt::format("N={} delta={} gap={} rate {:.4f} ({} failures, {} capped)", n, delta, gap, sum.rate,
                              sum.failures, sum.nonconverged);
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = passed == configs && elapsed < 600.0;
  return {ok, fmt::format("{}/{} configs pass the one-sided binomial test at 95% with {} trials each; "
                          "highest rate/delta: {}; {:.1f}s (limit 600s)",
                          passed, configs, kTrials, worst, elapsed)};
}

// ---------------------------------------------------------------------------
// Shared toy runs.

cli::RunConfig load_preset(const Env& env, const std::string& name) {
  return cli::load_config((fs::path(env.configs) / (name + ".yaml")).string());
}

struct Paired {
  std::vector<cli::VariantRun> asap, darts, random;
  double seconds = 0.0;
};

const Paired& xor_runs(const Env& env) {
  static std::optional<Paired> cache;
  if (cache) return *cache;
  const auto start = std::chrono::steady_clock::now();
  const cli::RunConfig cfg = load_preset(env, "xor_compare");
  Paired p;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const cli::SeedData data = cli::make_seed_data(cfg.data, seed);
    p.asap.push_back(cli::run_variant(cfg, "asap", seed, data, true));
    p.darts.push_back(cli::run_variant(cfg, "darts_mode", seed, data, true));
    p.random.push_back(cli::run_variant(cfg, "random", seed, data, true));
  }
  p.seconds = seconds_since(start);
  cache = std::move(p);
  return *cache;
}

// ---------------------------------------------------------------------------
// 6. Search contracts on toy runs.

Outcome search_contracts(const Env& env) {
  std::size_t runs = 0, converged = 0, violations = 0;
  std::vector<std::string> notes;
  auto note = [&](const std::string& s) {
    ++violations;
    if (notes.size() < 3) notes.push_back(s);
  };
  for (const std::string preset : {"asap_default", "xor_compare"}) {
    cli::RunConfig cfg = load_preset(env, preset);
    cfg.search.pruner = PrunerKind::kAsap;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const cli::SeedData data = cli::make_seed_data(cfg.data, seed);
      SearchConfig sc = cfg.search;
      sc.seed = seed;
      const SearchResult r = search(sc, data.train, data.val);
      ++runs;
      const std::string tag = fmt::format("{} seed {}", to_string(cfg.data.spec.kind), seed);
      double prev = 1.0;
      for (const auto& rec : r.trace.epochs) {
        if (rec.sparsity > prev) note(tag + ": sparsity rose");
        prev = rec.sparsity;
        if (rec.grace && (rec.alpha_updated || !rec.prunes.empty())) note(tag + ": activity during grace");
        for (const auto& p : rec.prunes) {
          if (!(p.phi < p.threshold) || p.threshold != rec.threshold) note(tag + ": prune with phi >= theta");
        }
      }
      if (r.converged) {
        ++converged;
        if (r.trace.epochs.back().entropy != 0.0) note(tag + ": converged with nonzero entropy");
      }
      const SearchResult again = search(sc, data.train, data.val);
      if (!(again.genotype == r.genotype) || format_trace_csv(again.trace, false) != format_trace_csv(r.trace, false)) {
        note(tag + ": rerun differs");
      }
      // A run that stops at the end of grace must leave every alpha untouched.
      SearchConfig grace_only = sc;
      grace_only.epochs = std::max<std::size_t>(1, sc.grace_epochs);
      const SearchResult g = search(grace_only, data.train, data.val);
      const bool untouched = std::all_of(g.choices.begin(), g.choices.end(), [](const EdgeChoice& c) { return c.tie; });
      if (!untouched || g.trace.epochs.back().sparsity != 1.0) note(tag + ": alpha moved during grace");
    }
  }
  std::string detail = fmt::format("{} searches on blobs and xor_grid ({} converged): {} contract violations", runs,
                                   converged, violations);
  for (const auto& n : notes) detail += "; " + n;
  return {violations == 0 && converged > 0, detail};
}

// ---------------------------------------------------------------------------
// 7. Pruning shortens epochs.

Outcome epoch_time(const Env& env) {
  const Paired& p = xor_runs(env);
  const std::size_t grace = load_preset(env, "xor_compare").search.grace_epochs;
  std::size_t faster = 0;
  std::string per_seed;
  for (const auto& run : p.asap) {
    const auto& e = run.search->trace.epochs;
    double first = 0.0, last = 0.0;
    std::size_t nf = 0, nl = 0;
    for (std::size_t i = grace; i < std::min(grace + 10, e.size()); ++i, ++nf) first += e[i].epoch_seconds;
    for (std::size_t i = e.size() - std::min<std::size_t>(10, e.size()); i < e.size(); ++i, ++nl) last += e[i].epoch_seconds;
    first /= static_cast<double>(std::max<std::size_t>(nf, 1));
    last /= static_cast<double>(std::max<std::size_t>(nl, 1));
    faster += last < first ? 1 : 0;
    per_seed += fmt::format(" {:.0f}/{:.0f}", first * 1e3, last * 1e3);
  }
  return {faster >= 8, fmt::format("final-10 mean epoch time below first-10 post-grace on {}/10 seeds (need 8); "
                                   "ms first/last:{}",
                                   faster, per_seed)};
}

// ---------------------------------------------------------------------------
// 8. Relaxation bias and child accuracy.

Outcome relaxation_bias(const Env& env) {
  const Paired& p = xor_runs(env);
  std::size_t wins = 0;
  double a = 0.0, d = 0.0, r = 0.0;
  for (std::size_t i = 0; i < p.asap.size(); ++i) {
    const double darts_drop = cli::extraction_drop(*p.darts[i].search);
    const double asap_drop = cli::late_max_drop(p.asap[i].search->trace);
    wins += darts_drop > asap_drop ? 1 : 0;
    a += p.asap[i].child->test_acc;
    d += p.darts[i].child->test_acc;
    r += p.random[i].child->test_acc;
  }
  const double n = static_cast<double>(p.asap.size());
  a /= n;
  d /= n;
  r /= n;
  const bool ok = 2 * wins > p.asap.size() && a >= d && a >= r && p.seconds < 1200.0;
  return {ok, fmt::format("hard-prune drop exceeds asap's worst late drop on {}/10 seeds; mean child test acc "
                          "asap {:.4f}, darts_mode {:.4f}, random {:.4f}; {:.1f}s (limit 1200s)",
                          wins, a, d, r, p.seconds)};
}

// ---------------------------------------------------------------------------
// 9. CLI round trip and bit-identical reruns.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Files under `a` and `b` must match byte for byte; timing files are excluded.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::set<std::string> left, right;
  auto collect = [](const fs::path& root, std::set<std::string>& out) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      const std::string rel = fs::relative(e.path(), root).string();
      if (rel.rfind("timing", 0) == 0) continue;
      out.insert(rel);
    }
  };
  collect(a, left);
  collect(b, right);
  if (left != right || left.empty()) return false;
  for (const auto& rel : left) {
    if (slurp(a / rel) != slurp(b / rel)) return false;
  }
  files += left.size();
  return true;
}

Outcome cli_round_trip(const Env& env) {
  const fs::path work = fs::path(env.work) / "cli";
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path log = work / "cli.log";
  auto run = [&](const std::string& args) {
    const std::string cmd = fmt::format("\"{}\" {} >>\"{}\" 2>&1", env.cli, args, log.string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const fs::path cfg = work / "small.yaml";
  {
    std::ofstream out(cfg);
    out << "name: small\n"
           "dataset: {kind: xor_grid, n: 400, dims: 2, classes: 2, noise: 0.05, seed: 7}\n"
           "cell: {steps: 2, width: 4}\n"
           "optimizer: {batch_size: 32, weight_lr: 0.05, alpha_lr: 0.02}\n"
           "pruner: {kind: asap, grace_epochs: 2}\n"
           "epochs: 12\n"
           "child: {epochs: 5}\n"
           "seeds: [0, 1, 2, 3, 4]\n"
           "compare: {pruners: [asap, darts_mode, random]}\n"
           "simulation: {arms: [3], delta: [0.1], gap: [0.3], trials: 50}\n";
  }
  std::vector<std::string> problems;
  std::size_t files = 0;
  const std::string c = cfg.string();
  const std::vector<std::pair<std::string, std::string>> commands{
      {"search", fmt::format("search --config \"{}\" --seeds 3,4", c)},
      {"simulate", fmt::format("simulate --config \"{}\"", c)},
      {"compare", fmt::format("compare --config \"{}\"", c)},
  };
  for (const auto& [name, args] : commands) {
    for (const char* rep : {"a", "b"}) {
      const int code = run(fmt::format("{} --out \"{}\"", args, (work / (name + rep)).string()));
      if (code != 0) problems.push_back(fmt::format("{} exit {}", name, code));
    }
    if (!same_tree(work / (name + "a"), work / (name + "b"), files)) problems.push_back(name + " outputs differ");
  }
  const fs::path genotype = work / "searcha" / "seed_3" / "genotype.txt";
  for (const char* rep : {"a", "b"}) {
    const int code = run(fmt::format("evaluate --config \"{}\" --genotype \"{}\" --seeds 3 --out \"{}\"", c,
                                     genotype.string(), (work / (std::string("evaluate") + rep)).string()));
    if (code != 0) problems.push_back(fmt::format("evaluate exit {}", code));
  }
  if (!same_tree(work / "evaluatea", work / "evaluateb", files)) problems.push_back("evaluate outputs differ");

  // Failure paths: nonzero exit and a diagnostic naming the line or section.
  const fs::path bad = work / "bad.yaml";
  std::ofstream(bad) << "dataset:\n  kind: blobs\n  colour: red\n";
  const fs::path missing = work / "missing.yaml";
  std::ofstream(missing) << "epochs: 3\n";
  const fs::path corrupt = work / "corrupt.txt";
  std::ofstream(corrupt) << "steps 1\nedge 0 2 identity\nedge 0 two identity\n";
  const std::size_t before = slurp(log).size();
  const int bad_code = run(fmt::format("search --config \"{}\" --out \"{}\"", bad.string(), (work / "x").string()));
  const int missing_code = run(fmt::format("search --config \"{}\" --out \"{}\"", missing.string(), (work / "x").string()));
  const int corrupt_code = run(fmt::format("evaluate --config \"{}\" --genotype \"{}\" --out \"{}\"", c,
                                           corrupt.string(), (work / "x").string()));
  const std::string diag = slurp(log).substr(before);
  if (bad_code == 0 || diag.find("bad.yaml:3:") == std::string::npos) problems.push_back("unknown key not reported by line");
  if (missing_code == 0 || diag.find("'dataset'") == std::string::npos) problems.push_back("missing section not named");
  if (corrupt_code == 0 || diag.find("line 3") == std::string::npos) problems.push_back("corrupt genotype line not cited");

  std::string detail = fmt::format("search -> genotype -> evaluate plus simulate and compare, each run twice: {} "
                                   "output files identical; bad config, missing section and corrupt genotype rejected",
                                   files);
  if (!problems.empty()) {
    detail = "problems:";
    for (const auto& p : problems) detail += " [" + p + "]";
    detail += fmt::format(" (log {})", log.string());
  }
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  Env env;
  env.cli = ASAP_CLI_PATH;
  env.configs = ASAP_CONFIG_DIR;
  env.work = (fs::temp_directory_path() / "asap_acceptance").string();
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << a << " needs a value\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--only") only.insert(std::stoi(value()));
    else if (a == "--cli") env.cli = value();
    else if (a == "--configs") env.configs = value();
    else if (a == "--work") env.work = value();
    else {
      std::cerr << "usage: asap_acceptance [--only N]... [--cli PATH] [--configs DIR] [--work DIR]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome(const Env&)>>> criteria{
      {"gradient correctness", gradients},
      {"gibbs invariants", gibbs_invariants},
      {"schedule arithmetic", schedule_arithmetic},
      {"threshold implies elimination", claim1},
      {"best-arm guarantee", pac_validation},
      {"search contracts", search_contracts},
      {"pruning shortens epochs", epoch_time},
      {"relaxation bias and child accuracy", relaxation_bias},
      {"cli round trip", cli_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} {}. {}: {} [{:.1f}s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail,
                             seconds_since(start))
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
