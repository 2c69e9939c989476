#include "asap/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace asap {

namespace {

double log_term(double t, std::size_t n_ops, double delta) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return std::log(pi2 * static_cast<double>(n_ops) * t * t / (3.0 * delta));
}

void check_theoretical(const ScheduleState& s, std::string_view who) {
  if (!(s.t >= 1.0)) throw std::invalid_argument(fmt::format("{}: requires t >= 1, got {}", who, s.t));
  if (!(s.delta > 0.0 && s.delta < 1.0)) throw std::invalid_argument(fmt::format("{}: delta must be in (0,1)", who));
  if (s.n_ops < 1) throw std::invalid_argument(fmt::format("{}: N must be >= 1", who));
  if (!(s.eta_l > 0.0)) throw std::invalid_argument(fmt::format("{}: eta*L must be positive", who));
}

}  // namespace

double log_threshold(const ScheduleState& state) {
  return std::isnan(state.log_threshold) ? std::log(state.threshold) : state.log_threshold;
}

double temp_exponential(double t0, double decay, double t) {
  if (!(t0 > 0.0)) throw std::invalid_argument("temp_exponential: T0 must be positive");
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("temp_exponential: decay must be in (0,1)");
  if (!(t >= 0.0)) throw std::invalid_argument("temp_exponential: t must be >= 0");
  return t0 * std::pow(decay, t);
}

double rho_theoretical(double t, std::size_t n_ops, double nu) {
  const double n_nu = static_cast<double>(n_ops) * nu;
  if (!(n_nu > 0.0)) throw std::invalid_argument("rho: N * nu_t must be positive");
  const double denom = t + std::log(1.0 / n_nu);
  if (!(denom > 0.0)) {
    throw std::invalid_argument(fmt::format("rho: t + ln(1/(N nu_t)) = {} must be positive", denom));
  }
  return t / denom;
}

double temp_theoretical(const ScheduleState& s) {
  check_theoretical(s, "temp_theoretical");
  const double rho = rho_theoretical(s.t, s.n_ops, s.nu);
  return s.eta_l * rho * std::sqrt(8.0 / s.t * log_term(s.t, s.n_ops, s.delta));
}

double margin_beta(const ScheduleState& s) {
  check_theoretical(s, "margin_beta");
  return s.eta_l * std::sqrt(2.0 / s.t * log_term(s.t, s.n_ops, s.delta));
}

double threshold_theoretical(double t, double nu) {
  if (!(nu >= 0.0)) throw std::invalid_argument("threshold: nu_t must be >= 0");
  return nu * std::exp(-t);
}

double sparsity_schedule(double s_i, double s_f, double t0, double n, double dt, int p, double t) {
  if (p != 1 && p != 3) throw std::invalid_argument("sparsity_schedule: p must be 1 or 3");
  if (!(n > 0.0 && dt > 0.0)) throw std::invalid_argument("sparsity_schedule: n and dt must be positive");
  const double end = t0 + n * dt;
  if (t < t0 || t > end) {
    throw std::invalid_argument(fmt::format("sparsity_schedule: t={} outside [{}, {}]", t, t0, end));
  }
  if (t == t0) return s_i;
  if (t == end) return s_f;
  const double frac = 1.0 - (t - t0) / (n * dt);
  const double s = s_f + (s_i - s_f) * std::pow(frac, p);
  return std::clamp(s, std::min(s_i, s_f), std::max(s_i, s_f));
}

double NuSequence::at(double t, std::size_t n_ops) const {
  const double base = scale > 0.0 ? scale : 1.0 / static_cast<double>(n_ops);
  switch (kind) {
    case Kind::kConstant:
      return base;
    case Kind::kPower:
      return base * std::pow(std::max(t, 1.0), -power);
  }
  return base;
}

ScheduleState theoretical_state(double t, double eta_l, double delta, std::size_t n_ops,
                                const NuSequence& nu) {
  ScheduleState s;
  s.t = t;
  s.eta_l = eta_l;
  s.delta = delta;
  s.n_ops = n_ops;
  s.nu = nu.at(t, n_ops);
  s.rho = rho_theoretical(t, n_ops, s.nu);
  s.temperature = temp_theoretical(s);
  s.beta = margin_beta(s);
  s.threshold = threshold_theoretical(t, s.nu);
  s.log_threshold = std::log(s.nu) - t;
  return s;
}

void SchedulePolicy::validate() const {
  switch (kind) {
    case Kind::kExponential:
      if (!(t0 > 0.0)) throw std::invalid_argument("schedule: T0 must be positive");
      if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("schedule: decay must be in (0,1)");
      break;
    case Kind::kConstant:
      if (!(t0 > 0.0)) throw std::invalid_argument("schedule: T0 must be positive");
      break;
    case Kind::kTheoretical:
      if (!(eta_l > 0.0)) throw std::invalid_argument("schedule: eta_l must be positive");
      if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("schedule: delta must be in (0,1)");
      if (nu.scale < 0.0) throw std::invalid_argument("schedule: nu scale must be >= 0");
      break;
  }
}

double SchedulePolicy::temperature(double t, std::size_t n_ops) const {
  switch (kind) {
    case Kind::kExponential:
      return temp_exponential(t0, decay, t);
    case Kind::kConstant:
      return t0;
    case Kind::kTheoretical: {
      ScheduleState s;
      s.t = t + 1.0;
      s.eta_l = eta_l;
      s.delta = delta;
      s.n_ops = n_ops;
      s.nu = nu.at(s.t, n_ops);
      return temp_theoretical(s);
    }
  }
  throw std::logic_error("schedule: unknown kind");
}

double ThresholdPolicy::at(double t, std::size_t n_ops) const {
  switch (kind) {
    case Kind::kFixed:
      return numerator / static_cast<double>(n_ops);
    case Kind::kTheoretical:
      return threshold_theoretical(t, nu.at(t, n_ops));
    case Kind::kNone:
      return 0.0;
  }
  throw std::logic_error("threshold: unknown kind");
}

double threshold_policy(std::string_view kind, double t, std::size_t n_ops) {
  ThresholdPolicy p;
  p.kind = parse_threshold_kind(kind);
  return p.at(t, n_ops);
}

std::string_view to_string(SchedulePolicy::Kind k) {
  switch (k) {
    case SchedulePolicy::Kind::kExponential: return "exponential";
    case SchedulePolicy::Kind::kTheoretical: return "theoretical";
    case SchedulePolicy::Kind::kConstant: return "constant";
  }
  return "?";
}

std::string_view to_string(ThresholdPolicy::Kind k) {
  switch (k) {
    case ThresholdPolicy::Kind::kFixed: return "fixed";
    case ThresholdPolicy::Kind::kTheoretical: return "theoretical";
    case ThresholdPolicy::Kind::kNone: return "none";
  }
  return "?";
}

SchedulePolicy::Kind parse_schedule_kind(std::string_view s) {
  if (s == "exponential") return SchedulePolicy::Kind::kExponential;
  if (s == "theoretical") return SchedulePolicy::Kind::kTheoretical;
  if (s == "constant") return SchedulePolicy::Kind::kConstant;
  throw std::invalid_argument(fmt::format("unknown schedule kind '{}'", s));
}

ThresholdPolicy::Kind parse_threshold_kind(std::string_view s) {
  if (s == "fixed") return ThresholdPolicy::Kind::kFixed;
  if (s == "theoretical") return ThresholdPolicy::Kind::kTheoretical;
  if (s == "none") return ThresholdPolicy::Kind::kNone;
  throw std::invalid_argument(fmt::format("unknown threshold kind '{}'", s));
}

}  // namespace asap
