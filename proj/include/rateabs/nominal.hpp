#pragma once

// Exponential-stability certificate |A0^k x| <= alpha_min rho^k |x| for the
// nominal closed loop, and the single-mode abstraction built from it.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"
#include "rateabs/model.hpp"
#include "rateabs/numerics.hpp"

namespace rateabs {

struct RhoValidation {
  enum class Reason { accepted, not_finite, not_above_spectral_radius, not_below_one };

  Reason reason = Reason::accepted;
  double rho = 0.0;
  double spectral_radius = 0.0;

  bool accepted() const noexcept { return reason == Reason::accepted; }
  explicit operator bool() const noexcept { return accepted(); }

  std::string message() const {
    switch (reason) {
      case Reason::accepted:
        return "rho=" + std::to_string(rho) + " accepted";
      case Reason::not_finite:
        return "rho must be finite";
      case Reason::not_above_spectral_radius:
        return "rho=" + std::to_string(rho) + " must exceed the spectral radius " +
               std::to_string(spectral_radius) + " of A0";
      case Reason::not_below_one:
        return "rho=" + std::to_string(rho) + " must be < 1";
    }
    return {};
  }
};

/// Accepts iff spectral_radius(A0) < rho < 1. Rejection is a value, not an exception.
inline RhoValidation validate_rho(const Matrix& a0, double rho, const NumericOptions& opt = {}) {
  RhoValidation v;
  v.rho = rho;
  v.spectral_radius = spectral_radius(a0, opt);
  if (!std::isfinite(rho)) {
    v.reason = RhoValidation::Reason::not_finite;
  } else if (!(rho < 1.0)) {
    v.reason = RhoValidation::Reason::not_below_one;
  } else if (!(rho > v.spectral_radius)) {
    v.reason = RhoValidation::Reason::not_above_spectral_radius;
  }
  return v;
}

struct NominalOptions {
  std::size_t max_k = 1'000'000;
  NumericOptions numeric;
};

struct NominalCertificate {
  double rho = 0.0;
  std::size_t k_tilde = 1;
  double alpha_min = 1.0;
  /// Index k < k_tilde where ||A0^k rho^-k|| attains alpha_min.
  std::size_t argmax_k = 0;
};

/// Scans the scaled powers (A0/rho)^k until their norm drops below one.
/// k_tilde is the first such k >= 1; alpha_min the maximum norm before it.
inline NominalCertificate make_nominal_certificate(const Matrix& a0, double rho,
                                                   const NominalOptions& opt = {}) {
  const auto check = validate_rho(a0, rho, opt.numeric);
  if (!check) throw ParameterError("nominal certificate: " + check.message());

  NominalCertificate cert;
  cert.rho = rho;
  const Matrix scaled = a0 * (1.0 / rho);
  Matrix power = Matrix::identity(a0.rows());
  double alpha_min = 1.0;  // k = 0 term, ||I|| = 1
  std::size_t argmax = 0;
  for (std::size_t k = 1; k <= opt.max_k; ++k) {
    power = scaled * power;
    const double nrm = spectral_norm(power, opt.numeric);
    if (!std::isfinite(nrm)) {
      throw NumericError("nominal certificate: scaled power overflowed at k=" + std::to_string(k));
    }
    if (nrm < 1.0) {
      cert.k_tilde = k;
      cert.alpha_min = alpha_min;
      cert.argmax_k = argmax;
      return cert;
    }
    if (nrm > alpha_min) {
      alpha_min = nrm;
      argmax = k;
    }
  }
  throw NumericError("nominal certificate: no k <= " + std::to_string(opt.max_k) +
                     " with ||(A0/rho)^k|| < 1; rho=" + std::to_string(rho) +
                     " is too close to the spectral radius " +
                     std::to_string(check.spectral_radius));
}

inline std::size_t compute_k_tilde(const Matrix& a0, double rho, const NominalOptions& opt = {}) {
  return make_nominal_certificate(a0, rho, opt).k_tilde;
}

inline double compute_alpha_min(const Matrix& a0, double rho, const NominalOptions& opt = {}) {
  return make_nominal_certificate(a0, rho, opt).alpha_min;
}

/// Single-mode abstraction {alpha = alpha_min, beta, rho_0 = rho}; beta defaults to alpha.
inline AbstractionParams build_nominal_abstraction(const Matrix& a0, double rho,
                                                   std::optional<double> beta = std::nullopt,
                                                   const NominalOptions& opt = {}) {
  const auto cert = make_nominal_certificate(a0, rho, opt);
  if (beta && !(*beta >= cert.alpha_min)) {
    throw ParameterError("nominal abstraction: beta=" + std::to_string(*beta) +
                         " is below alpha_min=" + std::to_string(cert.alpha_min));
  }
  AbstractionParams p;
  p.alpha = cert.alpha_min;
  p.beta = beta.value_or(cert.alpha_min);
  p.rho[kNominalMode] = rho;
  p.method = AbstractionMethod::nominal;
  p.diagnostics.k_tilde = cert.k_tilde;
  p.diagnostics.alpha_min = cert.alpha_min;
  return p;
}

struct RhoSweepPoint {
  double rho;
  std::size_t k_tilde;
  double alpha_min;
};

/// Geometric grid of admissible rho values from spectral_radius*(1+eps) towards 1,
/// reporting the decay/overshoot trade-off at each point.
inline std::vector<RhoSweepPoint> sweep_rho(const Matrix& a0, std::size_t points,
                                            double eps = 1e-3, const NominalOptions& opt = {}) {
  const double sr = spectral_radius(a0, opt.numeric);
  if (!(sr < 1.0)) {
    throw ParameterError("rho sweep: A0 is not Schur-stable (spectral radius " +
                         std::to_string(sr) + ")");
  }
  const double lo = std::max(sr * (1.0 + eps), eps);
  std::vector<RhoSweepPoint> out;
  if (!(lo < 1.0)) return out;
  for (std::size_t i = 0; i < points; ++i) {
    const double rho = lo * std::pow(1.0 / lo, static_cast<double>(i) / static_cast<double>(points));
    const auto cert = make_nominal_certificate(a0, rho, opt);
    out.push_back({rho, cert.k_tilde, cert.alpha_min});
  }
  return out;
}

}  // namespace rateabs
