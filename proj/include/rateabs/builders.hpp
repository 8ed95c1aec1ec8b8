#pragma once

// Per-mode abstraction parameters for weak execution.
//
// Robustness route: every deviation from the nominal matrix is treated as an
// extra disturbance bounded by gamma_sigma |x|, giving rho_sigma = rho + beta*gamma_sigma.
//
// Lyapunov route: with P solving A0^T P A0 - P = -Q and R = chol(P), the norm
// |x|_P = sqrt(x^T P x) = |R x| induces rho_sigma = ||R A_sigma R^-1||_2.  The
// equivalence constants c1 |x|_P <= |x| <= c2 |x|_P give alpha = c2/c1, the
// eccentricity of the ellipsoid, and beta = gamma*c2/c1 with gamma = 1.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"
#include "rateabs/model.hpp"
#include "rateabs/nominal.hpp"
#include "rateabs/numerics.hpp"

namespace rateabs {

/// gamma_sigma = ||A_sigma - A_0||_2, with gamma_0 = 0 exactly.
inline std::map<ModeId, double> gamma_bounds(const SystemModel& system,
                                             const NumericOptions& opt = {}) {
  std::map<ModeId, double> gammas;
  const Matrix& a0 = system.nominal();
  for (const auto& [id, a] : system.modes()) {
    gammas[id] = id == kNominalMode ? 0.0 : spectral_norm(a - a0, opt);
  }
  return gammas;
}

/// rho_sigma = rho + beta * gamma_sigma; alpha and beta carried over.
/// `modes` lists the modes that must be covered (defaults to the keys of `gammas`).
inline AbstractionParams robustness_abstraction(const AbstractionParams& nominal,
                                                const std::map<ModeId, double>& gammas,
                                                std::span<const ModeId> modes = {}) {
  if (!(nominal.alpha >= 1.0) || !(nominal.beta >= nominal.alpha)) {
    throw ParameterError("robustness abstraction: need alpha >= 1 and beta >= alpha");
  }
  const double rho = nominal.rate(kNominalMode);
  if (!(rho < 1.0) || !(rho >= 0.0)) {
    throw ParameterError("robustness abstraction: nominal rate must lie in [0, 1)");
  }
  std::vector<ModeId> required(modes.begin(), modes.end());
  if (required.empty())
    for (const auto& [id, _] : gammas) required.push_back(id);

  AbstractionParams out;
  out.alpha = nominal.alpha;
  out.beta = nominal.beta;
  out.method = AbstractionMethod::robustness;
  out.diagnostics = nominal.diagnostics;
  for (ModeId id : required) {
    const auto it = gammas.find(id);
    if (it == gammas.end()) {
      throw ParameterError("robustness abstraction: missing gamma bound for mode " +
                           std::to_string(id));
    }
    if (!(it->second >= 0.0)) {
      throw ParameterError("robustness abstraction: gamma bound of mode " + std::to_string(id) +
                           " is negative");
    }
    out.rho[id] = id == kNominalMode ? rho : rho + out.beta * it->second;
  }
  if (!out.rho.contains(kNominalMode)) out.rho[kNominalMode] = rho;
  return out;
}

/// Nominal certificate for A0 at `rho`, then the robustness construction over all modes.
inline AbstractionParams build_robustness_abstraction(const SystemModel& system, double rho,
                                                      std::optional<double> beta = std::nullopt,
                                                      const NominalOptions& opt = {}) {
  const auto nominal = build_nominal_abstraction(system.nominal(), rho, beta, opt);
  const auto ids = system.mode_ids();
  return robustness_abstraction(nominal, gamma_bounds(system, opt.numeric), ids);
}

struct LyapunovOptions {
  /// Condition number of P above which a warning is attached to the result.
  double condition_warning = 1e12;
  std::optional<double> beta;
  NumericOptions numeric;
};

/// ||A||_V for V(x) = x^T P x, computed as ||R A R^-1||_2 with P = R^T R.
inline double ellipsoidal_norm(const Matrix& a, const Matrix& r, const Matrix& r_inv,
                               const NumericOptions& opt = {}) {
  return spectral_norm(r * a * r_inv, opt);
}

inline AbstractionParams lyapunov_abstraction(const SystemModel& system, const Matrix& q,
                                              const LyapunovOptions& opt = {}) {
  const Matrix& a0 = system.nominal();
  if (q.rows() != a0.rows() || !q.is_square()) {
    throw DimensionError("lyapunov abstraction: Q is " + q.shape() + ", expected " +
                         a0.shape());
  }
  Matrix p;
  try {
    p = solve_discrete_lyapunov(a0, q, opt.numeric);
  } catch (const NoStableSolutionError& e) {
    throw NoStableSolutionError(std::string("no Lyapunov certificate: A0 is not Schur-stable (") +
                                e.what() + ")");
  }
  const Matrix r = cholesky(p, opt.numeric);
  const Matrix r_inv = upper_triangular_inverse(r);
  const auto ev = symmetric_eigenvalues(p, opt.numeric);
  const double lmin = ev.front();
  const double lmax = ev.back();

  AbstractionParams out;
  out.method = AbstractionMethod::lyapunov;
  out.alpha = std::max(1.0, std::sqrt(lmax / lmin));
  const double beta_min = out.alpha;  // gamma = 1 for a quadratic form
  if (opt.beta && !(*opt.beta >= beta_min)) {
    throw ParameterError("lyapunov abstraction: beta=" + std::to_string(*opt.beta) +
                         " is below c2/c1=" + std::to_string(beta_min));
  }
  out.beta = opt.beta.value_or(beta_min);
  for (const auto& [id, a] : system.modes()) {
    out.rho[id] = ellipsoidal_norm(a, r, r_inv, opt.numeric);
  }
  out.lyapunov_P = p;
  out.diagnostics.p_condition = lmax / lmin;
  if (lmax / lmin > opt.condition_warning) {
    out.diagnostics.warnings.push_back("P is ill-conditioned (condition number " +
                                       std::to_string(lmax / lmin) + ")");
  }
  if (!(out.rho.at(kNominalMode) < 1.0)) {
    // Only reachable through round-off on nearly unstable A0.
    out.diagnostics.warnings.push_back("nominal ellipsoidal rate is not below 1");
  }
  return out;
}

/// R with P = R^T R; in coordinates R x the nominal loop is non-expansive.
inline Matrix contractive_transform(const AbstractionParams& params,
                                    const NumericOptions& opt = {}) {
  if (params.method != AbstractionMethod::lyapunov || !params.lyapunov_P) {
    throw ParameterError("contractive transform requires Lyapunov-based parameters");
  }
  return cholesky(*params.lyapunov_P, opt);
}

}  // namespace rateabs
