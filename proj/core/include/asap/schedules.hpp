#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>

namespace asap {

/// Snapshot of every schedule quantity at one step.
struct ScheduleState {
  double t = 1.0;           // step counter; the theoretical schedule needs t >= 1
  double temperature = 1.0;
  double threshold = 0.0;
  double log_threshold = std::numeric_limits<double>::quiet_NaN();  // NaN: use log(threshold)
  double beta = 0.0;        // elimination margin
  double rho = 1.0;
  double nu = 0.0;
  double eta_l = 1.0;       // step size times gradient bound
  double delta = 0.1;       // failure probability
  std::size_t n_ops = 2;    // initial op count
};

/// ln(theta_t), exact even where theta_t underflows.
double log_threshold(const ScheduleState& state);

/// T_t = t0 * decay^t.
double temp_exponential(double t0, double decay, double t);

/// rho_t = t / (t + ln(1 / (N nu_t))).
double rho_theoretical(double t, std::size_t n_ops, double nu);

/// eta_L * rho_t * sqrt((8 / t) ln(pi^2 N t^2 / (3 delta))).
double temp_theoretical(const ScheduleState& state);

/// eta_L * sqrt((2 / t) ln(pi^2 N t^2 / (3 delta))). Equals T_t / (2 rho_t).
double margin_beta(const ScheduleState& state);

/// nu_t * e^{-t}.
double threshold_theoretical(double t, double nu);

/// s_f + (s_i - s_f) (1 - (t - t0) / (n dt))^p, clamped to [min(s_i,s_f), max(s_i,s_f)].
double sparsity_schedule(double s_i, double s_f, double t0, double n, double dt, int p, double t);

/// Slack sequence nu_t. `constant` gives nu_t = scale; `power` gives
/// nu_t = scale * t^(-power). Both satisfy log(nu_t)/t -> 0.
struct NuSequence {
  enum class Kind { kConstant, kPower };
  Kind kind = Kind::kConstant;
  double scale = 0.0;  // 0 means 1/N
  double power = 1.0;

  double at(double t, std::size_t n_ops) const;
};

struct SchedulePolicy {
  enum class Kind { kExponential, kTheoretical, kConstant };
  Kind kind = Kind::kExponential;
  double t0 = 1.3;
  double decay = 0.95;
  double eta_l = 1.0;
  double delta = 0.1;
  NuSequence nu;

  /// Temperature at epoch t (t >= 0). The theoretical kind evaluates at t + 1.
  double temperature(double t, std::size_t n_ops) const;
  void validate() const;
};

struct ThresholdPolicy {
  enum class Kind { kFixed, kTheoretical, kNone };
  Kind kind = Kind::kFixed;
  double numerator = 0.4;  // fixed: theta = numerator / N
  NuSequence nu;

  double at(double t, std::size_t n_ops) const;
};

/// fixed -> 0.4 / N, theoretical -> nu_t e^{-t} with the default nu_t = 1/N.
double threshold_policy(std::string_view kind, double t, std::size_t n_ops);

/// Full state of the theoretical schedule pair at step t (t >= 1).
ScheduleState theoretical_state(double t, double eta_l, double delta, std::size_t n_ops,
                                const NuSequence& nu = {});

std::string_view to_string(SchedulePolicy::Kind k);
std::string_view to_string(ThresholdPolicy::Kind k);
SchedulePolicy::Kind parse_schedule_kind(std::string_view s);
ThresholdPolicy::Kind parse_threshold_kind(std::string_view s);

}  // namespace asap
