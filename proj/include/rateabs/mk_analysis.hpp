#pragma once

// Closed-form (m,K) stability analysis on top of a two-mode abstraction.
//
// Under (m,K)-weak execution at most mbar = K - m of any K consecutive periods
// are skipped (mode 1).  The damage product kappa_{0,k} is then bounded by
// alpha_tilde * rho_tilde^k with
//   rho_tilde   = rho0^(m/K) * rho1^((K-m)/K)
//   alpha_tilde = (rho1/rho0)^(K-m) = (rho_tilde/rho0)^K,
// so rho_tilde < 1 proves |x_k| <= alpha*alpha_tilde*rho_tilde^k |x_0|.
// The criterion is sufficient only: a false verdict means "not proven".

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/model.hpp"

namespace rateabs {

class MkConstraint {
 public:
  MkConstraint(std::size_t m, std::size_t K) : m_(m), K_(K) {
    if (K_ < 1) throw ParameterError("(m,K) constraint: K must be >= 1");
    if (m_ > K_) {
      throw ParameterError("(m,K) constraint: m=" + std::to_string(m_) + " exceeds K=" +
                           std::to_string(K_));
    }
  }

  /// Constraint allowing `skips` skipped periods per window of `K`.
  static MkConstraint from_skips(std::size_t skips, std::size_t K) {
    if (skips > K) throw ParameterError("(m,K) constraint: mbar exceeds K");
    return MkConstraint(K - skips, K);
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t K() const noexcept { return K_; }
  std::size_t m_bar() const noexcept { return K_ - m_; }

  friend bool operator==(const MkConstraint&, const MkConstraint&) = default;

  std::string to_string() const {
    return "(" + std::to_string(m_) + "," + std::to_string(K_) + ")";
  }

 private:
  std::size_t m_;
  std::size_t K_;
};

namespace detail {

inline void require_ordered_rates(double rho0, double rho1) {
  if (!(rho0 > 0.0) || !std::isfinite(rho0) || !std::isfinite(rho1)) {
    throw ParameterError("(m,K) analysis: rates must be finite with rho0 > 0");
  }
  if (rho1 < rho0) {
    throw ParameterError("(m,K) analysis: assumption rho1 >= rho0 violated (rho0=" +
                         std::to_string(rho0) + ", rho1=" + std::to_string(rho1) + ")");
  }
}

}  // namespace detail

inline double mk_rho_tilde(double rho0, double rho1, const MkConstraint& mk) {
  detail::require_ordered_rates(rho0, rho1);
  const double K = static_cast<double>(mk.K());
  return std::pow(rho0, static_cast<double>(mk.m()) / K) *
         std::pow(rho1, static_cast<double>(mk.m_bar()) / K);
}

inline double mk_alpha_tilde(double rho0, double rho1, const MkConstraint& mk) {
  detail::require_ordered_rates(rho0, rho1);
  return std::pow(rho1 / rho0, static_cast<double>(mk.m_bar()));
}

struct StabilityVerdict {
  MkConstraint mk{0, 1};
  double rho0 = 0.0;
  /// Rate used for mode 1 (raised to rho0 when the abstraction had rho1 < rho0).
  double rho1 = 0.0;
  double rho_tilde = 0.0;
  double alpha_tilde = 1.0;
  double alpha = 1.0;
  double combined_overshoot = 1.0;
  bool proven_stable = false;
  std::optional<double> safe_initial_radius;
  std::vector<std::string> notes;
};

/// r0 / (alpha * alpha_tilde): initial radius keeping all overshoots inside B_{r0}.
inline double safe_initial_radius(double r0, double alpha, double alpha_tilde) {
  if (!(r0 > 0.0)) throw ParameterError("safe initial radius: r0 must be positive");
  if (!(alpha >= 1.0) || !(alpha_tilde >= 1.0)) {
    throw ParameterError("safe initial radius: overshoot factors must be >= 1");
  }
  return r0 / (alpha * alpha_tilde);
}

inline StabilityVerdict mk_verdict(const AbstractionParams& params, const MkConstraint& mk,
                                   double alpha_sys, std::optional<double> r0 = std::nullopt) {
  if (params.rho.size() > 2) {
    throw UnsupportedConfigurationError(
        "(m,K) verdict supports exactly the modes {0,1}; for more modes evaluate the "
        "kappa criterion on concrete sequences instead");
  }
  if (params.rho.size() != 2 || !params.rho.contains(0) || !params.rho.contains(1)) {
    throw UnsupportedConfigurationError("(m,K) verdict needs rates for exactly the modes {0,1}");
  }
  StabilityVerdict v;
  v.mk = mk;
  v.rho0 = params.rate(0);
  v.rho1 = params.rate(1);
  if (v.rho1 < v.rho0) {
    v.notes.push_back("rho1 < rho0: rho1 raised to rho0 (upper approximation)");
    v.rho1 = v.rho0;
  }
  v.rho_tilde = mk_rho_tilde(v.rho0, v.rho1, mk);
  v.alpha_tilde = mk_alpha_tilde(v.rho0, v.rho1, mk);
  const double identity = std::pow(v.rho_tilde / v.rho0, static_cast<double>(mk.K()));
  if (std::abs(identity - v.alpha_tilde) > 1e-10 * std::max(1.0, v.alpha_tilde)) {
    throw NumericError("(m,K) verdict: alpha_tilde identity check failed");
  }
  v.alpha = alpha_sys;
  v.combined_overshoot = alpha_sys * v.alpha_tilde;
  v.proven_stable = v.rho_tilde < 1.0;
  if (r0) v.safe_initial_radius = safe_initial_radius(*r0, alpha_sys, v.alpha_tilde);
  return v;
}

inline StabilityVerdict mk_verdict(const AbstractionParams& params, const MkConstraint& mk) {
  return mk_verdict(params, mk, params.alpha);
}

/// Skip ratio mbar/K at which rho_tilde equals `rho_target`.
inline double permissible_skip_ratio(double rho0, double rho1, double rho_target) {
  if (!(rho0 > 0.0) || !(rho0 < rho_target) || !(rho_target < rho1)) {
    throw ParameterError("permissible skip ratio: need 0 < rho0 < target < rho1 (got rho0=" +
                         std::to_string(rho0) + ", target=" + std::to_string(rho_target) +
                         ", rho1=" + std::to_string(rho1) + ")");
  }
  return std::log(rho_target / rho0) / std::log(rho1 / rho0);
}

/// Largest mbar/K <= ratio over K <= k_max; ties resolved towards the smaller K.
inline MkConstraint best_mk_for_ratio(double ratio, std::size_t k_max) {
  if (!(ratio >= 0.0) || k_max < 1) {
    throw ParameterError("best (m,K): need ratio >= 0 and K_max >= 1");
  }
  std::size_t best_skips = 0;
  std::size_t best_k = 1;
  for (std::size_t K = 1; K <= k_max; ++K) {
    const auto skips = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(K), std::floor(ratio * K + 1e-12)));
    // skips/K > best_skips/best_k without division
    if (skips * best_k > best_skips * K) {
      best_skips = skips;
      best_k = K;
    }
  }
  return MkConstraint::from_skips(best_skips, best_k);
}

/// Maximal number of skips in the first k periods: mbar*floor(k/K) + min(mbar, k mod K).
inline std::size_t skip_count_bound(const MkConstraint& mk, std::size_t k) {
  return mk.m_bar() * (k / mk.K()) + std::min(mk.m_bar(), k % mk.K());
}

}  // namespace rateabs
