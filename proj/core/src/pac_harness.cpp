#include "asap/pac_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace asap {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

NoiseLaw parse_noise_law(std::string_view s) {
  if (s == "none") return NoiseLaw::kNone;
  if (s == "uniform") return NoiseLaw::kUniform;
  if (s == "clipped_gaussian") return NoiseLaw::kClippedGaussian;
  throw std::invalid_argument(fmt::format("unknown noise law '{}'", s));
}

std::string_view to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::kNone: return "none";
    case NoiseLaw::kUniform: return "uniform";
    case NoiseLaw::kClippedGaussian: return "clipped_gaussian";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// GradientStream

double GradientStream::uniform_half_width() const {
  double m = 0.0;
  for (double mu : means) m = std::max(m, std::abs(mu));
  return std::max(0.0, eta_l - m);
}

double GradientStream::expected(std::size_t arm) const {
  const double mu = means.at(arm);
  if (noise != NoiseLaw::kClippedGaussian) return mu;
  // E[clamp(X, a, b)], X ~ N(mu, sigma^2).
  const double a = -eta_l, b = eta_l;
  const double za = (a - mu) / sigma, zb = (b - mu) / sigma;
  const double pa = normal_cdf(za), pb = normal_cdf(zb);
  return a * pa + b * (1.0 - pb) + mu * (pb - pa) + sigma * (normal_pdf(za) - normal_pdf(zb));
}

std::size_t GradientStream::best_arm() const {
  if (means.empty()) throw std::invalid_argument("stream: no arms");
  std::size_t best = 0;
  for (std::size_t i = 1; i < arms(); ++i) {
    if (expected(i) > expected(best)) best = i;
  }
  for (std::size_t i = 0; i < arms(); ++i) {
    if (i != best && expected(i) == expected(best)) {
      throw std::invalid_argument("stream: best arm is not unique");
    }
  }
  return best;
}

GradientStream GradientStream::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != arms()) throw std::invalid_argument("stream: permutation length mismatch");
  GradientStream out = *this;
  out.keys.resize(arms());
  for (std::size_t k = 0; k < arms(); ++k) {
    out.means[k] = means.at(perm[k]);
    out.keys[k] = key(perm[k]);
  }
  return out;
}

void GradientStream::validate() const {
  if (arms() < 2) throw std::invalid_argument("stream: needs at least two arms");
  if (!keys.empty() && keys.size() != arms()) throw std::invalid_argument("stream: keys/means length mismatch");
  if (!(eta_l > 0.0)) throw std::invalid_argument("stream: eta_l must be positive");
  for (double mu : means) {
    if (!(std::abs(mu) <= eta_l)) {
      throw std::invalid_argument(fmt::format("stream: |mean| {} exceeds bound {}", mu, eta_l));
    }
  }
  if (noise == NoiseLaw::kClippedGaussian && !(sigma > 0.0)) {
    throw std::invalid_argument("stream: sigma must be positive");
  }
}

GradientStream gap_stream(std::size_t arms, double gap, double eta_l, NoiseLaw noise,
                          std::uint64_t seed) {
  if (arms < 2) throw std::invalid_argument("gap_stream: needs at least two arms");
  if (!(gap > 0.0)) throw std::invalid_argument("gap_stream: gap must be positive");
  GradientStream s;
  s.means.assign(arms, -gap / 2.0);
  s.means[0] = gap / 2.0;
  s.eta_l = eta_l;
  s.noise = noise;
  s.seed = seed;
  s.validate();
  return s;
}

ArmSampler::ArmSampler(const GradientStream& stream, std::size_t arm, std::uint64_t trial)
    : mean_(stream.means.at(arm)),
      eta_l_(stream.eta_l),
      half_width_(stream.uniform_half_width()),
      sigma_(stream.sigma),
      noise_(stream.noise) {
  const std::uint64_t key = stream.key(arm);
  std::seed_seq seq{static_cast<std::uint32_t>(stream.seed), static_cast<std::uint32_t>(stream.seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  engine_.seed(seq);
}

double ArmSampler::next() {
  switch (noise_) {
    case NoiseLaw::kNone:
      return mean_;
    case NoiseLaw::kUniform: {
      std::uniform_real_distribution<double> u(-half_width_, half_width_);
      return mean_ + (half_width_ > 0.0 ? u(engine_) : 0.0);
    }
    case NoiseLaw::kClippedGaussian: {
      std::normal_distribution<double> n(mean_, sigma_);
      return std::clamp(n(engine_), -eta_l_, eta_l_);
    }
  }
  return mean_;
}

// ---------------------------------------------------------------------------
// Trials

TrialResult run_trial(const GradientStream& stream, std::uint64_t trial, const TrialOptions& options) {
  stream.validate();
  const std::size_t n = stream.arms();
  const std::size_t best = stream.best_arm();

  std::vector<ArmSampler> samplers;
  samplers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) samplers.emplace_back(stream, i, trial);

  TrialResult r;
  r.prune_step.assign(n, 0);
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> live(n);
  for (std::size_t i = 0; i < n; ++i) live[i] = i;
  std::vector<std::size_t> doomed;

  for (std::uint64_t t = 1; t <= options.max_steps; ++t) {
    for (auto i : live) alpha[i] += samplers[i].next();
    const ScheduleState s = theoretical_state(static_cast<double>(t), stream.eta_l, options.delta, n, options.nu);

    double mx = -std::numeric_limits<double>::infinity();
    for (auto i : live) mx = std::max(mx, alpha[i]);
    double z = 0.0;
    for (auto i : live) z += std::exp((alpha[i] - mx) / s.temperature);
    const double log_z = std::log(z);
    const double log_theta = log_threshold(s);

    doomed.clear();
    for (auto i : live) {
      if ((alpha[i] - mx) / s.temperature - log_z < log_theta) doomed.push_back(i);
    }
    if (options.check_identities) {
      if (std::abs(2.0 * s.rho * s.beta - s.temperature) > 1e-12 * s.temperature) ++r.identity_violations;
      const double tt = static_cast<double>(t);
      for (auto i : doomed) {
        if (!(alpha[i] / tt + s.beta < mx / tt - s.beta)) ++r.claim1_violations;
      }
    }
    if (doomed.size() == live.size()) {
      // Never empty the set: the leader survives.
      doomed.erase(std::find_if(doomed.begin(), doomed.end(), [&](std::size_t i) { return alpha[i] == mx; }));
    }
    for (auto i : doomed) {
      r.prune_step[i] = t;
      live.erase(std::find(live.begin(), live.end(), i));
    }
    r.steps = t;
    if (live.size() == 1) {
      r.converged = true;
      r.survivor = live.front();
      break;
    }
  }
  r.best_survived = r.converged && r.survivor == best;
  return r;
}

TrialSummary run_trials(const GradientStream& stream, std::size_t count, const TrialOptions& options,
                        std::size_t threads) {
  stream.validate();
  stream.best_arm();
  TrialSummary out;
  out.trials = count;
  out.results.resize(count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) out.results[i] = run_trial(stream, i, options);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t block = (count + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t lo = w * block, hi = std::min(count, lo + block);
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) out.results[i] = run_trial(stream, i, options);
      });
    }
  }
  double steps = 0.0;
  for (const auto& r : out.results) {
    if (!r.converged) ++out.nonconverged;
    if (!r.best_survived) ++out.failures;
    steps += static_cast<double>(r.steps);
    out.claim1_violations += r.claim1_violations;
    out.identity_violations += r.identity_violations;
  }
  if (count > 0) {
    out.rate = static_cast<double>(out.failures) / static_cast<double>(count);
    out.mean_steps = steps / static_cast<double>(count);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Claim checks

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  return mx + std::log(z);
}

bool logsumexp_bound_check(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  const double lse = log_sum_exp(x);
  return lse >= mx && lse <= mx + std::log(static_cast<double>(x.size()));
}

Claim1Check check_claim1(std::span<const double> alpha, std::size_t arm, const ScheduleState& state) {
  if (arm >= alpha.size()) throw std::invalid_argument("check_claim1: arm out of range");
  if (!(state.temperature > 0.0) || !(state.t > 0.0)) {
    throw std::invalid_argument("check_claim1: needs positive temperature and t");
  }
  std::vector<double> scaled(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) scaled[k] = alpha[k] / state.temperature;
  if (!logsumexp_bound_check(scaled)) throw std::logic_error("check_claim1: log-sum-exp bound violated");

  const double mx = *std::max_element(alpha.begin(), alpha.end());
  double z = 0.0;
  for (double a : alpha) z += std::exp((a - mx) / state.temperature);
  const double log_phi = (alpha[arm] - mx) / state.temperature - std::log(z);

  Claim1Check c;
  c.threshold_fires = log_phi < log_threshold(state);
  c.se_fires = alpha[arm] / state.t + state.beta < mx / state.t - state.beta;
  return c;
}

double corollary_bound(double delta, std::size_t n_ops, double t) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return 6.0 * delta / (pi2 * static_cast<double>(n_ops) * t * t);
}

double hoeffding_deviation_rate(const GradientStream& stream, std::size_t arm, std::uint64_t t,
                                double beta, std::size_t trials) {
  if (trials < 100) throw std::invalid_argument("hoeffding_deviation_rate: needs at least 100 trials");
  if (t < 1) throw std::invalid_argument("hoeffding_deviation_rate: t must be >= 1");
  stream.validate();
  const double mean = stream.expected(arm);
  const double tt = static_cast<double>(t);
  std::size_t exceed = 0;
  for (std::size_t m = 0; m < trials; ++m) {
    ArmSampler s(stream, arm, m);
    double sum = 0.0;
    for (std::uint64_t k = 0; k < t; ++k) sum += s.next();
    if (std::abs(sum - tt * mean) / tt > beta) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(trials);
}

double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  const double ln_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  double tail = 0.0;
  for (std::size_t j = k; j <= n; ++j) {
    const double jj = static_cast<double>(j);
    const double log_term = ln_n1 - std::lgamma(jj + 1.0) - std::lgamma(static_cast<double>(n - j) + 1.0) +
                            jj * lp + static_cast<double>(n - j) * lq;
    tail += std::exp(log_term);
  }
  return std::min(1.0, tail);
}

bool binomial_rate_within(std::size_t failures, std::size_t trials, double p, double level) {
  return binomial_upper_tail(failures, trials, p) >= level;
}

}  // namespace asap
