#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"
#include "rateabs/numerics.hpp"

namespace rateabs {

/// Execution mode index; 0 is the nominal (deadline-meeting) closed loop.
using ModeId = std::uint32_t;

inline constexpr ModeId kNominalMode = 0;

/// Mode-indexed family of n x n transition matrices x_{k+1} = A_sigma x_k + w_k.
class SystemModel {
 public:
  SystemModel() = default;

  explicit SystemModel(std::map<ModeId, Matrix> modes,
                       std::optional<double> disturbance_bound = std::nullopt,
                       std::optional<Matrix> cost_weight = std::nullopt,
                       std::optional<double> lipschitz = std::nullopt)
      : modes_(std::move(modes)),
        disturbance_bound_(disturbance_bound),
        cost_weight_(std::move(cost_weight)),
        lipschitz_(lipschitz) {
    validate();
  }

  std::size_t dimension() const { return modes_.at(kNominalMode).rows(); }
  const std::map<ModeId, Matrix>& modes() const noexcept { return modes_; }
  const Matrix& nominal() const { return modes_.at(kNominalMode); }
  bool has_mode(ModeId id) const { return modes_.contains(id); }

  const Matrix& mode(ModeId id) const {
    const auto it = modes_.find(id);
    if (it == modes_.end()) {
      throw ParameterError("mode " + std::to_string(id) + " is not declared by the system");
    }
    return it->second;
  }

  std::vector<ModeId> mode_ids() const {
    std::vector<ModeId> ids;
    for (const auto& [id, _] : modes_) ids.push_back(id);
    return ids;
  }

  const std::optional<double>& disturbance_bound() const noexcept { return disturbance_bound_; }
  const std::optional<Matrix>& cost_weight() const noexcept { return cost_weight_; }
  const std::optional<double>& lipschitz() const noexcept { return lipschitz_; }

  friend bool operator==(const SystemModel&, const SystemModel&) = default;

 private:
  void validate() const {
    if (!modes_.contains(kNominalMode)) {
      throw ParameterError("system model: nominal mode 0 is missing");
    }
    const std::size_t n = modes_.at(kNominalMode).rows();
    for (const auto& [id, a] : modes_) {
      require_square_finite(a, "system model");
      if (a.rows() != n) {
        throw DimensionError("system model: mode " + std::to_string(id) + " is " + a.shape() +
                             ", expected " + std::to_string(n) + "x" + std::to_string(n));
      }
    }
    if (disturbance_bound_ && !(*disturbance_bound_ >= 0.0)) {
      throw ParameterError("system model: disturbance bound must be nonnegative");
    }
    if (lipschitz_ && !(*lipschitz_ >= 0.0)) {
      throw ParameterError("system model: Lipschitz constant must be nonnegative");
    }
    if (cost_weight_) {
      require_square_finite(*cost_weight_, "cost weight");
      if (cost_weight_->rows() != n) {
        throw DimensionError("system model: cost weight is " + cost_weight_->shape());
      }
      if (!is_symmetric(*cost_weight_)) {
        throw ParameterError("system model: cost weight must be symmetric");
      }
      const auto ev = symmetric_eigenvalues(*cost_weight_);
      if (ev.front() < -1e-12 * std::max(1.0, ev.back())) {
        throw ParameterError("system model: cost weight must be positive semidefinite");
      }
    }
  }

  std::map<ModeId, Matrix> modes_;
  std::optional<double> disturbance_bound_;
  std::optional<Matrix> cost_weight_;
  std::optional<double> lipschitz_;
};

enum class AbstractionMethod { nominal, robustness, lyapunov };

inline std::string_view to_string(AbstractionMethod m) {
  switch (m) {
    case AbstractionMethod::nominal:
      return "nominal";
    case AbstractionMethod::robustness:
      return "robustness";
    case AbstractionMethod::lyapunov:
      return "lyapunov";
  }
  return "unknown";
}

/// Side information produced while building abstraction parameters.
struct BuildDiagnostics {
  std::optional<std::size_t> k_tilde;
  std::optional<double> alpha_min;
  std::optional<double> p_condition;
  std::vector<std::string> warnings;
};

/// Parameters of the scalar abstraction
///   vbar_{k+1} = rho_{sigma_k} vbar_k + beta |w_k|,   vbar_0 = alpha |x_0|,
/// which upper-bounds |x_k| at every step.
struct AbstractionParams {
  double alpha = 1.0;
  double beta = 1.0;
  std::map<ModeId, double> rho;
  AbstractionMethod method = AbstractionMethod::nominal;
  std::optional<Matrix> lyapunov_P;
  BuildDiagnostics diagnostics;

  double rate(ModeId id) const {
    const auto it = rho.find(id);
    if (it == rho.end()) {
      throw ParameterError("abstraction has no rate for mode " + std::to_string(id));
    }
    return it->second;
  }

  std::vector<ModeId> mode_ids() const {
    std::vector<ModeId> ids;
    for (const auto& [id, _] : rho) ids.push_back(id);
    return ids;
  }
};

/// Checks the structural invariants of hand-authored parameters.
inline void validate_params(const AbstractionParams& p) {
  if (!(p.alpha >= 1.0) || !std::isfinite(p.alpha)) {
    throw ParameterError("abstraction: alpha must be a finite value >= 1");
  }
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) {
    throw ParameterError("abstraction: beta must be a finite positive value");
  }
  if (p.rho.empty()) throw ParameterError("abstraction: rate map is empty");
  for (const auto& [id, r] : p.rho) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw ParameterError("abstraction: rate of mode " + std::to_string(id) +
                           " must be finite and nonnegative");
    }
  }
  if (p.method == AbstractionMethod::lyapunov && !p.lyapunov_P) {
    throw ParameterError("abstraction: Lyapunov parameters without P");
  }
}

}  // namespace rateabs
