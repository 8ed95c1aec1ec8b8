#pragma once

// Online scheduling gate built on the abstraction.
//
// Exponential mode: the damage counter kappa_hat_k = rho_hat^-k kappa_{0,k}
// follows kappa_hat_{k+1} = rho_sigma / rho_hat * kappa_hat_k.  A mode is
// admissible when the next counter stays <= alpha_hat, which keeps
// |x_k| <= alpha * alpha_hat * rho_hat^k |x_0|.
//
// Practical mode: vbar_{k+1} = rho_sigma vbar_k + beta wbar_k is predicted and
// a mode is admissible when the prediction stays <= C, so |x_k| <= C.
//
// The gate never runs the fallback itself; a supervisor alarm tells the caller
// to switch to strictly nominal execution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/model.hpp"

namespace rateabs {

struct ExponentialTarget {
  double rho_hat = 0.9;
  double alpha_hat = 1.0;
};

struct PracticalTarget {
  double C = 1.0;
};

struct SchedulerState {
  std::size_t k = 0;
  /// log of the damage counter; -inf after a perfectly resetting mode (rho = 0).
  double log_kappa_hat = 0.0;
  std::optional<double> v_bar;
  std::variant<ExponentialTarget, PracticalTarget> target;

  bool exponential() const noexcept {
    return std::holds_alternative<ExponentialTarget>(target);
  }
  double kappa_hat() const noexcept { return std::exp(log_kappa_hat); }
};

/// Slack for log-domain comparisons so that exact boundary cases are admitted.
inline constexpr double kGateLogTolerance = 1e-12;

inline SchedulerState make_exponential_state(double rho_hat, double alpha_hat) {
  if (!(rho_hat > 0.0 && rho_hat < 1.0)) {
    throw ParameterError("scheduler: rho_hat must lie in (0,1)");
  }
  if (!(alpha_hat >= 1.0) || !std::isfinite(alpha_hat)) {
    throw ParameterError("scheduler: alpha_hat must be finite and >= 1");
  }
  SchedulerState s;
  s.target = ExponentialTarget{rho_hat, alpha_hat};
  return s;
}

/// Practical-stability state starting at vbar_0 (= alpha |x_0| for a plant).
inline SchedulerState make_practical_state(double C, double v_bar0) {
  if (!(C > 0.0) || !std::isfinite(C)) throw ParameterError("scheduler: C must be positive");
  if (!(v_bar0 >= 0.0)) throw ParameterError("scheduler: initial vbar must be nonnegative");
  SchedulerState s;
  s.target = PracticalTarget{C};
  s.v_bar = v_bar0;
  return s;
}

namespace detail {

inline double log_rate(double rho) {
  return rho == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(rho);
}

inline const ExponentialTarget& exp_target(const SchedulerState& s) {
  if (!s.exponential()) throw ParameterError("scheduler: exponential mode is not configured");
  return std::get<ExponentialTarget>(s.target);
}

inline const PracticalTarget& practical_target(const SchedulerState& s) {
  if (s.exponential() || !s.v_bar) {
    throw ParameterError("scheduler: practical mode is not configured");
  }
  return std::get<PracticalTarget>(s.target);
}

inline double predicted_vbar(const SchedulerState& s, ModeId sigma, double w_bar,
                             const AbstractionParams& params) {
  return params.rate(sigma) * *s.v_bar + params.beta * w_bar;
}

inline double predicted_log_kappa(const SchedulerState& s, ModeId sigma,
                                  const AbstractionParams& params) {
  const auto& t = exp_target(s);
  return s.log_kappa_hat + log_rate(params.rate(sigma)) - std::log(t.rho_hat);
}

}  // namespace detail

/// log kappa_hat += log rho_sigma - log rho_hat.
inline SchedulerState kappa_hat_step(SchedulerState state, ModeId sigma,
                                     const AbstractionParams& params) {
  state.log_kappa_hat = detail::predicted_log_kappa(state, sigma, params);
  ++state.k;
  return state;
}

struct PracticalStep {
  SchedulerState state;
  /// Predicted vbar_{k+1} <= C.
  bool admissible = false;
};

inline PracticalStep practical_step(SchedulerState state, ModeId sigma, double w_bar,
                                    const AbstractionParams& params) {
  const auto& t = detail::practical_target(state);
  if (!(w_bar >= 0.0)) throw ParameterError("scheduler: disturbance bound must be nonnegative");
  const double next = detail::predicted_vbar(state, sigma, w_bar, params);
  const bool ok = next <= t.C;
  state.v_bar = next;
  ++state.k;
  return {std::move(state), ok};
}

/// Modes whose next step keeps the invariant (kappa_hat <= alpha_hat, resp. vbar <= C).
/// `w_bar` is only used in practical mode.
inline std::vector<ModeId> admissible_modes(const SchedulerState& state,
                                            const AbstractionParams& params,
                                            double w_bar = 0.0) {
  std::vector<ModeId> out;
  if (state.exponential()) {
    const double limit = std::log(detail::exp_target(state).alpha_hat) + kGateLogTolerance;
    for (const auto& [id, _] : params.rho) {
      if (detail::predicted_log_kappa(state, id, params) <= limit) out.push_back(id);
    }
  } else {
    const double C = detail::practical_target(state).C;
    for (const auto& [id, _] : params.rho) {
      if (detail::predicted_vbar(state, id, w_bar, params) <= C) out.push_back(id);
    }
  }
  return out;
}

/// Mode preference; higher ranks are chosen first, equal ranks go to the lowest id.
using Preference = std::map<ModeId, int>;

/// Default preference: higher mode id first (cheapest execution first).
inline Preference default_preference(const AbstractionParams& params) {
  Preference p;
  for (const auto& [id, _] : params.rho) p[id] = static_cast<int>(id);
  return p;
}

inline std::optional<ModeId> greedy_choice(std::span<const ModeId> admissible,
                                           const Preference& preference) {
  std::optional<ModeId> best;
  int best_rank = std::numeric_limits<int>::min();
  for (ModeId id : admissible) {
    const auto it = preference.find(id);
    const int rank = it == preference.end() ? static_cast<int>(id) : it->second;
    if (!best || rank > best_rank || (rank == best_rank && id < *best)) {
      best = id;
      best_rank = rank;
    }
  }
  return best;
}

/// Most-preferred admissible mode; nullopt when nothing is admissible (alarm).
inline std::optional<ModeId> greedy_policy(const SchedulerState& state,
                                           const AbstractionParams& params,
                                           const Preference& preference, double w_bar = 0.0) {
  const auto adm = admissible_modes(state, params, w_bar);
  return greedy_choice(adm, preference);
}

struct SupervisorReport {
  bool alarm = false;
  std::string reason;
  std::size_t step = 0;
  /// kappa_hat (exponential) or vbar (practical) at the check.
  double value = 0.0;
  /// alpha_hat or C.
  double threshold = 0.0;
};

inline SupervisorReport supervisor_check(const SchedulerState& state,
                                         const AbstractionParams& params, double w_bar = 0.0) {
  SupervisorReport r;
  r.step = state.k;
  bool violated = false;
  if (state.exponential()) {
    const auto& t = detail::exp_target(state);
    r.value = state.kappa_hat();
    r.threshold = t.alpha_hat;
    violated = state.log_kappa_hat > std::log(t.alpha_hat) + kGateLogTolerance;
  } else {
    r.value = *state.v_bar;
    r.threshold = detail::practical_target(state).C;
    violated = r.value > r.threshold;
  }
  if (violated) {
    r.alarm = true;
    r.reason = "quality-of-control invariant violated";
  } else if (admissible_modes(state, params, w_bar).empty()) {
    r.alarm = true;
    r.reason = "no admissible mode";
  }
  return r;
}

/// Chooses among admissible modes; must return one of them.
using Policy = std::function<ModeId(std::span<const ModeId> admissible, const SchedulerState&)>;

inline Policy make_greedy_policy(Preference preference) {
  return [pref = std::move(preference)](std::span<const ModeId> adm, const SchedulerState&) {
    return *greedy_choice(adm, pref);
  };
}

/// Cycles through the mode ids, taking the next admissible one.
inline Policy make_round_robin_policy() {
  return [next = ModeId{0}](std::span<const ModeId> adm, const SchedulerState&) mutable {
    const auto it = std::lower_bound(adm.begin(), adm.end(), next);
    const ModeId chosen = it == adm.end() ? adm.front() : *it;
    next = chosen + 1;
    return chosen;
  };
}

/// Uniformly random admissible mode from a seeded generator.
inline Policy make_random_policy(std::uint64_t seed) {
  return [rng = std::mt19937_64(seed)](std::span<const ModeId> adm,
                                       const SchedulerState&) mutable {
    std::uniform_int_distribution<std::size_t> pick(0, adm.size() - 1);
    return adm[pick(rng)];
  };
}

struct ScheduleRecord {
  std::size_t k = 0;
  ModeId chosen = kNominalMode;
  std::vector<ModeId> admissible;
  std::optional<double> kappa_hat;
  std::optional<double> vbar;
  bool alarm = false;
  std::string alarm_reason;
};

struct ScheduleRunOptions {
  std::size_t steps = 0;
  /// Per-step disturbance bound (practical mode); shorter series repeat the last value.
  std::vector<double> w_bar;
  /// Modes imposed regardless of the gate (supervisor testing); empty = use the policy.
  std::vector<ModeId> forced;
  /// After the first alarm run only the nominal mode.
  bool latch_safety_mode = true;
};

/// Runs the gate for `steps` periods. On alarm the nominal mode is applied.
inline std::vector<ScheduleRecord> run_schedule(SchedulerState state,
                                                const AbstractionParams& params,
                                                const Policy& policy,
                                                const ScheduleRunOptions& opt) {
  std::vector<ScheduleRecord> out;
  out.reserve(opt.steps);
  bool safety = false;
  for (std::size_t i = 0; i < opt.steps; ++i) {
    const double w_bar =
        opt.w_bar.empty() ? 0.0 : opt.w_bar[std::min(i, opt.w_bar.size() - 1)];
    ScheduleRecord rec;
    rec.k = state.k;
    if (state.exponential()) {
      rec.kappa_hat = state.kappa_hat();
    } else {
      rec.vbar = state.v_bar;
    }
    rec.admissible = admissible_modes(state, params, w_bar);
    const auto sup = supervisor_check(state, params, w_bar);
    if (sup.alarm) {
      rec.alarm = true;
      rec.alarm_reason = sup.reason;
      if (opt.latch_safety_mode) safety = true;
    }
    if (!opt.forced.empty()) {
      rec.chosen = opt.forced[std::min(i, opt.forced.size() - 1)];
      if (safety) rec.chosen = kNominalMode;
    } else if (safety || sup.alarm) {
      rec.chosen = kNominalMode;
    } else {
      rec.chosen = policy(rec.admissible, state);
    }
    if (state.exponential()) {
      state = kappa_hat_step(std::move(state), rec.chosen, params);
    } else {
      state = practical_step(std::move(state), rec.chosen, w_bar, params).state;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// CSV with header `k,chosen_sigma,admissible_set,kappa_hat,vbar,alarm`; the
/// admissible set is `;`-separated and absent values are empty cells.
inline void write_schedule_csv(std::ostream& os, std::span<const ScheduleRecord> records) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "k,chosen_sigma,admissible_set,kappa_hat,vbar,alarm\n";
  for (const auto& r : records) {
    os << r.k << ',' << r.chosen << ',';
    for (std::size_t i = 0; i < r.admissible.size(); ++i) {
      if (i) os << ';';
      os << r.admissible[i];
    }
    os << ',';
    if (r.kappa_hat) os << num(*r.kappa_hat);
    os << ',';
    if (r.vbar) os << num(*r.vbar);
    os << ',' << (r.alarm ? 1 : 0) << '\n';
  }
}

}  // namespace rateabs
