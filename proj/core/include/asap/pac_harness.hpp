#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "asap/schedules.hpp"

namespace asap {

enum class NoiseLaw { kNone, kUniform, kClippedGaussian };

NoiseLaw parse_noise_law(std::string_view s);
std::string_view to_string(NoiseLaw law);

/// Synthetic i.i.d. per-arm gradient-step stream g_{t,i} with |g| <= eta_l.
///
/// Each arm draws from its own generator keyed by (seed, trial, stream key),
/// so permuting arms together with their keys permutes the realized streams.
struct GradientStream {
  std::vector<double> means;
  std::vector<std::uint64_t> keys;  // empty -> arm index
  double eta_l = 1.0;
  NoiseLaw noise = NoiseLaw::kUniform;
  double sigma = 0.5;               // clipped-gaussian scale
  std::uint64_t seed = 0;

  std::size_t arms() const noexcept { return means.size(); }
  std::uint64_t key(std::size_t arm) const { return keys.empty() ? arm : keys[arm]; }
  /// Half-width of the uniform law: eta_l - max|mu|.
  double uniform_half_width() const;
  /// Exact E[g_i] under the noise law (clipping shifts the gaussian mean).
  double expected(std::size_t arm) const;
  /// Arm with the strictly largest expectation; throws when not unique.
  std::size_t best_arm() const;
  /// Arm k of the result is arm perm[k] of this stream, keys included.
  GradientStream permuted(std::span<const std::size_t> perm) const;
  void validate() const;
};

/// Best arm at +gap/2, the rest at -gap/2.
GradientStream gap_stream(std::size_t arms, double gap, double eta_l, NoiseLaw noise,
                          std::uint64_t seed);

/// Draws one arm's values for one trial.
class ArmSampler {
 public:
  ArmSampler(const GradientStream& stream, std::size_t arm, std::uint64_t trial);
  double next();

 private:
  double mean_;
  double eta_l_;
  double half_width_;
  double sigma_;
  NoiseLaw noise_;
  std::mt19937_64 engine_;
};

struct TrialOptions {
  double delta = 0.1;            // target failure probability of the schedule
  std::uint64_t max_steps = 1'000'000;
  NuSequence nu;                 // default nu_t = 1/N
  bool check_identities = false; // verify beta = T / (2 rho) along the run
};

struct TrialResult {
  std::size_t survivor = 0;          // meaningful when converged
  std::vector<std::uint64_t> prune_step;  // 0 = never pruned
  bool best_survived = false;
  bool converged = false;
  std::uint64_t steps = 0;
  std::uint64_t identity_violations = 0;
  std::uint64_t claim1_violations = 0;  // threshold fired without the SE condition
};

/// Thresholded elimination on accumulated stream values with the theoretical
/// (T_t, theta_t) pair, until one arm remains or max_steps.
TrialResult run_trial(const GradientStream& stream, std::uint64_t trial,
                      const TrialOptions& options = {});

struct TrialSummary {
  std::size_t trials = 0;
  std::size_t failures = 0;       // best arm pruned, or no convergence
  std::size_t nonconverged = 0;
  double rate = 0.0;
  double mean_steps = 0.0;
  std::uint64_t claim1_violations = 0;
  std::uint64_t identity_violations = 0;
  std::vector<TrialResult> results;
};

/// Runs trials 0..count-1 across `threads` workers (0 = hardware). Results are
/// aggregated in trial order, so the summary does not depend on thread count.
TrialSummary run_trials(const GradientStream& stream, std::size_t count,
                        const TrialOptions& options = {}, std::size_t threads = 0);

struct Claim1Check {
  bool threshold_fires = false;  // phi_i(alpha; T) < theta
  bool se_fires = false;         // alpha_i/t + beta < alpha*/t - beta
};

/// Both sides of the threshold / successive-elimination equivalence for arm i.
/// Uses state.t, temperature, threshold and beta. Evaluated in log space, so
/// thresholds below the double range (t > ~745) are still honored.
Claim1Check check_claim1(std::span<const double> alpha, std::size_t arm, const ScheduleState& state);

double log_sum_exp(std::span<const double> x);
/// max(x) <= lse(x) <= max(x) + ln N.
bool logsumexp_bound_check(std::span<const double> x);

/// 6 delta / (pi^2 N t^2).
double corollary_bound(double delta, std::size_t n_ops, double t);

/// Monte Carlo estimate of P(|alpha_t,i - t E[g_i]| / t > beta) over `trials`
/// independent prefixes of length t. Rejects fewer than 100 trials.
double hoeffding_deviation_rate(const GradientStream& stream, std::size_t arm, std::uint64_t t,
                                double beta, std::size_t trials);

/// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t k, std::size_t n, double p);

/// One-sided test of H0: rate <= p. True when H0 is not rejected at `level`.
bool binomial_rate_within(std::size_t failures, std::size_t trials, double p, double level = 0.05);

}  // namespace asap
