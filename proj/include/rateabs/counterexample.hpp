#pragma once

// Three-state system that is exponentially stable under (1,2)-weak execution
// but unstable under (2,4)-weak execution, although both constraints have the
// same skip ratio.  Default parameters a = 1/2, c = 1000.

#include "rateabs/matrix.hpp"
#include "rateabs/model.hpp"

namespace rateabs::counterexample {

inline Matrix nominal_matrix(double a = 0.5) {
  return Matrix{{a, 0.0, a}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
}

inline Matrix skip_matrix(double a = 0.5, double c = 1000.0) {
  return Matrix{{a, 0.0, 0.0}, {c, 0.0, 0.0}, {0.0, 1.0, 0.0}};
}

inline SystemModel system(double a = 0.5, double c = 1000.0) {
  return SystemModel({{0, nominal_matrix(a)}, {1, skip_matrix(a, c)}});
}

/// Nonzero eigenvalue a^4 + c a^2 of A1^2 A0^2.
inline double dominant_eigenvalue(double a = 0.5, double c = 1000.0) {
  return a * a * a * a + c * a * a;
}

}  // namespace rateabs::counterexample
