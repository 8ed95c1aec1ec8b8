#pragma once

// Co-simulation of the plant x_{k+1} = A_{sigma_k} x_k + w_k and its scalar
// abstraction vbar_{k+1} = rho_{sigma_k} vbar_k + beta |w_k|, vbar_0 = alpha |x_0|,
// plus the guarantee check |x_k| <= vbar_k, the damage product kappa and
// quadratic-cost bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"
#include "rateabs/model.hpp"
#include "rateabs/numerics.hpp"

namespace rateabs {

/// States above this magnitude end a trace with a divergence marker.
inline constexpr double kDivergenceLimit = 1e300;

/// Plant step for non-linear plants: x_{k+1} = f(sigma_k, x_k) + w_k.
using StepFunction = std::function<Vector(ModeId, const Vector&)>;

namespace detail {

inline void check_horizon(std::size_t seq_len, std::size_t horizon, const char* what) {
  if (horizon > seq_len) {
    throw ParameterError(std::string(what) + ": horizon " + std::to_string(horizon) +
                         " exceeds the sequence length " + std::to_string(seq_len));
  }
}

}  // namespace detail

/// States x_0..x_horizon of a caller-supplied plant. Stops early if the state diverges.
inline std::vector<Vector> simulate_plant(const StepFunction& step, std::span<const ModeId> seq,
                                          std::span<const Vector> disturbances, const Vector& x0,
                                          std::size_t horizon) {
  detail::check_horizon(seq.size(), horizon, "simulate_plant");
  if (disturbances.size() < horizon) {
    throw DimensionError("simulate_plant: " + std::to_string(disturbances.size()) +
                         " disturbance samples for horizon " + std::to_string(horizon));
  }
  std::vector<Vector> xs{x0};
  xs.reserve(horizon + 1);
  for (std::size_t k = 0; k < horizon; ++k) {
    const Vector next = add(step(seq[k], xs.back()), disturbances[k]);
    if (!(norm2(next) <= kDivergenceLimit)) break;
    xs.push_back(next);
  }
  return xs;
}

inline std::vector<Vector> simulate_plant(const SystemModel& system, std::span<const ModeId> seq,
                                          std::span<const Vector> disturbances, const Vector& x0,
                                          std::size_t horizon) {
  if (x0.size() != system.dimension()) {
    throw DimensionError("simulate_plant: x0 has length " + std::to_string(x0.size()) +
                         ", expected " + std::to_string(system.dimension()));
  }
  for (std::size_t k = 0; k < std::min(horizon, disturbances.size()); ++k) {
    if (disturbances[k].size() != system.dimension()) {
      throw DimensionError("simulate_plant: disturbance " + std::to_string(k) + " has length " +
                           std::to_string(disturbances[k].size()));
    }
    if (const auto& bound = system.disturbance_bound();
        bound && norm2(disturbances[k]) > *bound * (1.0 + 1e-12)) {
      throw ParameterError("simulate_plant: |w_" + std::to_string(k) +
                           "| exceeds the declared disturbance bound");
    }
  }
  const StepFunction linear = [&](ModeId s, const Vector& x) { return system.mode(s) * x; };
  return simulate_plant(linear, seq, disturbances, x0, horizon);
}

struct AbstractionSeries {
  std::vector<double> vbar;
  bool diverged = false;
};

/// vbar_0 = alpha |x0|, vbar_{k+1} = rho_{sigma_k} vbar_k + beta wbar_k.
inline AbstractionSeries simulate_abstraction(const AbstractionParams& params,
                                              std::span<const ModeId> seq,
                                              std::span<const double> w_bar, double x0_norm,
                                              std::size_t horizon) {
  detail::check_horizon(seq.size(), horizon, "simulate_abstraction");
  if (w_bar.size() < horizon) {
    throw DimensionError("simulate_abstraction: disturbance bound series is too short");
  }
  for (std::size_t k = 0; k < horizon; ++k) {
    if (!(w_bar[k] >= 0.0)) {
      throw ParameterError("simulate_abstraction: disturbance bound at step " +
                           std::to_string(k) + " is negative");
    }
  }
  AbstractionSeries out;
  out.vbar.reserve(horizon + 1);
  out.vbar.push_back(params.alpha * x0_norm);
  for (std::size_t k = 0; k < horizon; ++k) {
    const double next = params.rate(seq[k]) * out.vbar.back() + params.beta * w_bar[k];
    if (!(next <= kDivergenceLimit)) {
      out.diverged = true;
      break;
    }
    out.vbar.push_back(next);
  }
  return out;
}

/// kappa_{a,b} = prod_{i=a}^{b-1} rho_{sigma_i}; kappa_{a,a} = 1.
inline double kappa(const AbstractionParams& params, std::span<const ModeId> seq, std::size_t a,
                    std::size_t b) {
  if (a > b || b > seq.size()) {
    throw ParameterError("kappa: need 0 <= a <= b <= |sigma| (a=" + std::to_string(a) +
                         ", b=" + std::to_string(b) + ", |sigma|=" + std::to_string(seq.size()) +
                         ")");
  }
  double k = 1.0;
  for (std::size_t i = a; i < b; ++i) k *= params.rate(seq[i]);
  return k;
}

namespace detail {

inline double psd_max_eigenvalue(const Matrix& q, const char* what) {
  require_square_finite(q, what);
  if (!is_symmetric(q)) throw ParameterError(std::string(what) + ": Q must be symmetric");
  const auto ev = symmetric_eigenvalues(q);
  if (ev.front() < -1e-12 * std::max(1.0, std::abs(ev.back()))) {
    throw ParameterError(std::string(what) + ": Q must be positive semidefinite");
  }
  return std::max(0.0, ev.back());
}

}  // namespace detail

/// C * v_k^2 with C = lambda_max(Q), bounding J_k = x_k^T Q x_k whenever |x_k| <= v_k.
inline std::vector<double> cost_bound(const Matrix& q, std::span<const double> v) {
  const double c = detail::psd_max_eigenvalue(q, "cost_bound");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = c * v[i] * v[i];
  return out;
}

/// R with Q = R^T R, so that J_k = |R x_k|^2.
inline Matrix cost_transform(const Matrix& q) {
  try {
    return cholesky(q);
  } catch (const NotPositiveDefiniteError& e) {
    throw ParameterError(std::string("cost_transform: Q is not positive definite, use cost_bound "
                                     "instead (") +
                         e.what() + ")");
  }
}

struct TraceRow {
  std::size_t k = 0;
  std::optional<ModeId> sigma;
  std::optional<double> w_norm;
  Vector x;
  double x_norm = 0.0;
  double vbar = 0.0;
  double kappa = 1.0;
  std::optional<double> cost_bound;
};

struct Trace {
  std::vector<TraceRow> rows;
  std::optional<std::uint64_t> seed;
  bool diverged = false;
};

/// How the disturbance w_k is generated in a co-simulation.
struct DisturbanceSpec {
  enum class Kind { zero, constant, random, explicit_series };

  Kind kind = Kind::zero;
  /// Magnitude for `constant`; upper bound on |w_k| for `random`.
  double magnitude = 0.0;
  std::uint64_t seed = 0;
  std::vector<Vector> series;

  static DisturbanceSpec zero() { return {}; }
  static DisturbanceSpec constant(double m) { return {Kind::constant, m, 0, {}}; }
  static DisturbanceSpec random(std::uint64_t seed, double bound) {
    return {Kind::random, bound, seed, {}};
  }
  static DisturbanceSpec explicit_series(std::vector<Vector> s) {
    return {Kind::explicit_series, 0.0, 0, std::move(s)};
  }
};

/// Runs plant and abstraction side by side for `horizon` steps.
///
/// A constant disturbance of magnitude m is applied along A_sigma x_k (the
/// direction that grows |x_{k+1}| the most); a random one has a uniformly
/// distributed direction and magnitude in [0, bound].  The abstraction is
/// driven with the realised |w_k|.
inline Trace co_simulate(const SystemModel& system, const AbstractionParams& params,
                         std::span<const ModeId> seq, const DisturbanceSpec& dist,
                         const Vector& x0, std::size_t horizon,
                         const std::optional<Matrix>& cost_weight = std::nullopt) {
  detail::check_horizon(seq.size(), horizon, "co_simulate");
  const std::size_t n = system.dimension();
  if (x0.size() != n) {
    throw DimensionError("co_simulate: x0 has length " + std::to_string(x0.size()) +
                         ", expected " + std::to_string(n));
  }
  for (std::size_t k = 0; k < horizon; ++k) (void)params.rate(seq[k]);
  std::optional<double> cost_c;
  if (cost_weight) cost_c = detail::psd_max_eigenvalue(*cost_weight, "co_simulate");

  const auto& bound = system.disturbance_bound();
  if ((dist.kind == DisturbanceSpec::Kind::constant ||
       dist.kind == DisturbanceSpec::Kind::random) &&
      (!(dist.magnitude >= 0.0) || (bound && dist.magnitude > *bound * (1.0 + 1e-12)))) {
    throw ParameterError("co_simulate: disturbance magnitude must lie in [0, declared bound]");
  }
  if (dist.kind == DisturbanceSpec::Kind::explicit_series && dist.series.size() < horizon) {
    throw DimensionError("co_simulate: explicit disturbance series is too short");
  }

  Trace trace;
  if (dist.kind == DisturbanceSpec::Kind::random) trace.seed = dist.seed;
  std::mt19937_64 rng(dist.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector x = x0;
  const double x0_norm = norm2(x0);
  double vbar = params.alpha * x0_norm;
  double kap = 1.0;
  for (std::size_t k = 0;; ++k) {
    TraceRow row;
    row.k = k;
    row.x = x;
    row.x_norm = norm2(x);
    row.vbar = vbar;
    row.kappa = kap;
    if (cost_c) row.cost_bound = *cost_c * vbar * vbar;
    if (k == horizon) {
      trace.rows.push_back(std::move(row));
      break;
    }

    const ModeId s = seq[k];
    Vector ax = system.mode(s) * x;
    Vector w(n, 0.0);
    switch (dist.kind) {
      case DisturbanceSpec::Kind::zero:
        break;
      case DisturbanceSpec::Kind::constant: {
        const double an = norm2(ax);
        if (an > 0.0) {
          for (std::size_t i = 0; i < n; ++i) w[i] = dist.magnitude * ax[i] / an;
        } else {
          w[0] = dist.magnitude;
        }
        break;
      }
      case DisturbanceSpec::Kind::random: {
        Vector dir(n);
        for (double& d : dir) d = gauss(rng);
        const double dn = norm2(dir);
        const double mag = dist.magnitude * unit(rng);
        for (std::size_t i = 0; i < n; ++i) w[i] = dn > 0.0 ? mag * dir[i] / dn : 0.0;
        break;
      }
      case DisturbanceSpec::Kind::explicit_series:
        w = dist.series[k];
        if (w.size() != n) {
          throw DimensionError("co_simulate: disturbance " + std::to_string(k) +
                               " has the wrong length");
        }
        if (bound && norm2(w) > *bound * (1.0 + 1e-12)) {
          throw ParameterError("co_simulate: |w_" + std::to_string(k) +
                               "| exceeds the declared disturbance bound");
        }
        break;
    }
    const double w_norm = norm2(w);
    row.sigma = s;
    row.w_norm = w_norm;
    trace.rows.push_back(std::move(row));

    x = add(ax, w);
    vbar = params.rate(s) * vbar + params.beta * w_norm;
    kap *= params.rate(s);
    if (!(norm2(x) <= kDivergenceLimit) || !(vbar <= kDivergenceLimit)) {
      trace.diverged = true;
      break;
    }
  }
  return trace;
}

struct GuaranteeReport {
  bool holds = true;
  std::optional<std::size_t> first_violation;
  /// sup_k |x_k| / vbar_k (0/0 counts as 0); a tightness measure.
  double max_ratio = 0.0;
};

inline GuaranteeReport check_guarantee(std::span<const double> x_norm,
                                       std::span<const double> vbar, double rel_tol = 1e-9) {
  if (x_norm.size() != vbar.size()) {
    throw DimensionError("check_guarantee: series lengths differ (" +
                         std::to_string(x_norm.size()) + " vs " + std::to_string(vbar.size()) +
                         ")");
  }
  GuaranteeReport r;
  for (std::size_t k = 0; k < x_norm.size(); ++k) {
    if (x_norm[k] > 0.0) {
      const double ratio = vbar[k] > 0.0 ? x_norm[k] / vbar[k] : HUGE_VAL;
      r.max_ratio = std::max(r.max_ratio, ratio);
    }
    if (x_norm[k] > vbar[k] * (1.0 + rel_tol) && r.holds) {
      r.holds = false;
      r.first_violation = k;
    }
  }
  return r;
}

inline GuaranteeReport check_guarantee(const Trace& trace, double rel_tol = 1e-9) {
  std::vector<double> xn, vb;
  xn.reserve(trace.rows.size());
  vb.reserve(trace.rows.size());
  for (const auto& r : trace.rows) {
    xn.push_back(r.x_norm);
    vb.push_back(r.vbar);
  }
  return check_guarantee(xn, vb, rel_tol);
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV with header `k,sigma,w_norm,x_norm,vbar,kappa,cost_bound`; absent
/// optional values are empty cells. The final row (k = horizon) has no sigma/w_norm.
inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << "k,sigma,w_norm,x_norm,vbar,kappa,cost_bound\n";
  for (const auto& r : trace.rows) {
    os << r.k << ',';
    if (r.sigma) os << *r.sigma;
    os << ',';
    if (r.w_norm) os << detail::format_double(*r.w_norm);
    os << ',' << detail::format_double(r.x_norm) << ',' << detail::format_double(r.vbar) << ','
       << detail::format_double(r.kappa) << ',';
    if (r.cost_bound) os << detail::format_double(*r.cost_bound);
    os << '\n';
  }
}

}  // namespace rateabs
