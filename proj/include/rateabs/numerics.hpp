#pragma once

// Dense linear algebra on small square matrices: spectral norm, eigenvalues,
// Cholesky, linear solves and the discrete Lyapunov equation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"

namespace rateabs {

struct NumericOptions {
  double factorization_tol = 1e-12;
  double residual_tol = 1e-9;
  double symmetry_tol = 1e-10;
  std::size_t qr_iterations_per_eigenvalue = 100;
  std::size_t jacobi_sweeps = 100;
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> symmetric_eigenvalues(const Matrix& s, const NumericOptions& opt = {}) {
  require_square_finite(s, "symmetric_eigenvalues");
  const std::size_t n = s.rows();
  Matrix a = symmetrize(s);
  for (std::size_t sweep = 0; sweep < opt.jacobi_sweeps; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    }
    if (off <= 1e-32 * total || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Largest singular value, computed as sqrt(lambda_max(A^T A)).
inline double spectral_norm(const Matrix& a, const NumericOptions& opt = {}) {
  require_square_finite(a, "spectral_norm");
  const double scale = a.max_abs();
  if (scale == 0.0) return 0.0;
  // Scale first so A^T A cannot overflow.
  const Matrix b = a * (1.0 / scale);
  const auto ev = symmetric_eigenvalues(b.transpose() * b, opt);
  return scale * std::sqrt(std::max(0.0, ev.back()));
}

namespace detail {

/// Householder reduction to upper Hessenberg form (similarity transform).
inline Matrix hessenberg(Matrix h) {
  const std::size_t n = h.rows();
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += h(i, k) * h(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) continue;
    if (h(k + 1, k) > 0) alpha = -alpha;
    std::vector<double> v(n, 0.0);
    v[k + 1] = h(k + 1, k) - alpha;
    for (std::size_t i = k + 2; i < n; ++i) v[i] = h(i, k);
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    // H <- (I - 2vv^T/|v|^2) H (I - 2vv^T/|v|^2)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += v[i] * h(i, j);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k + 1; i < n; ++i) h(i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += h(i, j) * v[j];
      s *= 2.0 / vnorm2;
      for (std::size_t j = k + 1; j < n; ++j) h(i, j) -= s * v[j];
    }
    for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
  }
  return h;
}

/// LU factorization with partial pivoting, in place. Returns false on an
/// exactly singular pivot unless `perturb_singular` replaces it by a tiny value.
inline bool lu_factor(Matrix& a, std::vector<std::size_t>& piv, bool perturb_singular) {
  const std::size_t n = a.rows();
  piv.resize(n);
  const double tiny = std::max(a.max_abs(), 1.0) * std::numeric_limits<double>::epsilon();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    piv[k] = p;
    if (p != k)
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    if (a(k, k) == 0.0) {
      if (!perturb_singular) return false;
      a(k, k) = tiny;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return true;
}

inline Vector lu_solve(const Matrix& lu, const std::vector<std::size_t>& piv, Vector b) {
  const std::size_t n = lu.rows();
  for (std::size_t k = 0; k < n; ++k) std::swap(b[k], b[piv[k]]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) b[i] -= lu(i, j) * b[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) b[i] -= lu(i, j) * b[j];
    b[i] /= lu(i, i);
  }
  return b;
}

}  // namespace detail

/// Solves A x = b by LU with partial pivoting.
inline Vector solve_linear(Matrix a, Vector b) {
  require_square_finite(a, "solve_linear");
  if (b.size() != a.rows()) {
    throw DimensionError("solve_linear: right-hand side has length " + std::to_string(b.size()) +
                         ", expected " + std::to_string(a.rows()));
  }
  std::vector<std::size_t> piv;
  if (!detail::lu_factor(a, piv, false)) {
    throw NumericError("solve_linear: matrix is singular");
  }
  return detail::lu_solve(a, piv, std::move(b));
}

/// All eigenvalues (with multiplicity) via Hessenberg reduction followed by
/// single-shift complex QR iteration with Wilkinson shifts.
inline std::vector<std::complex<double>> eigenvalues(const Matrix& a,
                                                     const NumericOptions& opt = {}) {
  using cd = std::complex<double>;
  require_square_finite(a, "eigenvalues");
  const std::size_t n = a.rows();
  const double scale = a.max_abs();
  std::vector<cd> ev(n, cd(0.0, 0.0));
  if (scale == 0.0) return ev;

  const Matrix hr = detail::hessenberg(a * (1.0 / scale));
  std::vector<cd> h(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h[i * n + j] = hr(i, j);
  auto H = [&](std::size_t i, std::size_t j) -> cd& { return h[i * n + j]; };

  double hnorm = 0.0;
  for (const cd& v : h) hnorm = std::max(hnorm, std::abs(v));
  const double eps = std::numeric_limits<double>::epsilon();

  const std::size_t max_iter = opt.qr_iterations_per_eigenvalue * n;
  std::size_t total_iter = 0;
  std::size_t iter_since_deflation = 0;
  std::vector<std::pair<double, cd>> rot(n);

  std::size_t hi = n - 1;
  while (hi > 0) {
    std::size_t lo = hi;
    while (lo > 0) {
      const double s = std::abs(H(lo - 1, lo - 1)) + std::abs(H(lo, lo));
      const double ref = s == 0.0 ? hnorm : s;
      if (std::abs(H(lo, lo - 1)) <= eps * ref) {
        H(lo, lo - 1) = 0.0;
        break;
      }
      --lo;
    }
    if (lo == hi) {
      ev[hi] = H(hi, hi);
      --hi;
      iter_since_deflation = 0;
      continue;
    }
    if (++total_iter > max_iter) {
      throw NumericError("eigenvalues: QR iteration did not converge after " +
                         std::to_string(total_iter - 1) + " iterations (active block " +
                         std::to_string(lo) + ".." + std::to_string(hi) + ", subdiagonal " +
                         std::to_string(std::abs(H(hi, hi - 1)) * scale) + ")");
    }
    ++iter_since_deflation;

    cd mu;
    if (iter_since_deflation % 11 == 0) {
      // Exceptional shift to break cycles.
      mu = H(hi, hi) + 0.75 * std::abs(H(hi, hi - 1));
    } else {
      const cd a11 = H(hi - 1, hi - 1), a12 = H(hi - 1, hi);
      const cd a21 = H(hi, hi - 1), a22 = H(hi, hi);
      const cd tr = a11 + a22;
      const cd det = a11 * a22 - a12 * a21;
      const cd disc = std::sqrt(tr * tr * 0.25 - det);
      const cd l1 = tr * 0.5 + disc;
      const cd l2 = tr * 0.5 - disc;
      mu = std::abs(l1 - a22) < std::abs(l2 - a22) ? l1 : l2;
    }

    for (std::size_t i = lo; i <= hi; ++i) H(i, i) -= mu;
    for (std::size_t k = lo; k < hi; ++k) {
      const cd x = H(k, k);
      const cd y = H(k + 1, k);
      const double r = std::hypot(std::abs(x), std::abs(y));
      double c;
      cd s;
      if (r == 0.0) {
        c = 1.0;
        s = 0.0;
      } else if (std::abs(x) == 0.0) {
        c = 0.0;
        s = 1.0;
      } else {
        c = std::abs(x) / r;
        s = (x / std::abs(x)) * std::conj(y) / r;
      }
      rot[k] = {c, s};
      for (std::size_t j = k; j <= hi; ++j) {
        const cd u = H(k, j);
        const cd v = H(k + 1, j);
        H(k, j) = c * u + s * v;
        H(k + 1, j) = -std::conj(s) * u + c * v;
      }
    }
    for (std::size_t k = lo; k < hi; ++k) {
      const auto [c, s] = rot[k];
      const std::size_t last = std::min(k + 2, hi);
      for (std::size_t i = lo; i <= last; ++i) {
        const cd u = H(i, k);
        const cd v = H(i, k + 1);
        H(i, k) = u * c + v * std::conj(s);
        H(i, k + 1) = -u * s + v * c;
      }
    }
    for (std::size_t i = lo; i <= hi; ++i) H(i, i) += mu;
  }
  ev[0] = H(0, 0);

  for (cd& l : ev) {
    l *= scale;
    // Real input: drop round-off imaginary parts of real eigenvalues.
    if (std::abs(l.imag()) <= 64 * eps * scale) l = cd(l.real(), 0.0);
  }
  return ev;
}

inline double spectral_radius(const Matrix& a, const NumericOptions& opt = {}) {
  double r = 0.0;
  for (const auto& l : eigenvalues(a, opt)) r = std::max(r, std::abs(l));
  return r;
}

/// Upper-triangular R with R^T R = P.
inline Matrix cholesky(const Matrix& p, const NumericOptions& opt = {}) {
  require_square_finite(p, "cholesky");
  if (!is_symmetric(p, opt.symmetry_tol)) {
    throw ParameterError("cholesky: input is not symmetric");
  }
  const std::size_t n = p.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(p(i, i)));
  Matrix r(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = p(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= r(k, j) * r(k, j);
    if (!(d > opt.factorization_tol * max_diag)) {
      throw NotPositiveDefiniteError(
          "cholesky: not positive definite (leading minor " + std::to_string(j + 1) +
              " has pivot " + std::to_string(d) + ")",
          j + 1);
    }
    r(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = p(j, i);
      for (std::size_t k = 0; k < j; ++k) s -= r(k, j) * r(k, i);
      r(j, i) = s / r(j, j);
    }
  }
  return r;
}

inline Matrix upper_triangular_inverse(const Matrix& r) {
  require_square_finite(r, "upper_triangular_inverse");
  const std::size_t n = r.rows();
  Matrix inv(n, n);
  for (std::size_t i = n; i-- > 0;) {
    if (r(i, i) == 0.0) throw NumericError("upper_triangular_inverse: zero on the diagonal");
    inv(i, i) = 1.0 / r(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = i + 1; k <= j; ++k) s += r(i, k) * inv(k, j);
      inv(i, j) = -s / r(i, i);
    }
  }
  return inv;
}

inline double lyapunov_residual(const Matrix& a, const Matrix& p, const Matrix& q,
                                const NumericOptions& opt = {}) {
  return spectral_norm(a.transpose() * p * a - p + q, opt);
}

/// Solves A^T P A - P = -Q for symmetric positive definite P.
inline Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q,
                                      const NumericOptions& opt = {}) {
  require_square_finite(a, "solve_discrete_lyapunov");
  require_square_finite(q, "solve_discrete_lyapunov");
  const std::size_t n = a.rows();
  if (q.rows() != n) {
    throw DimensionError("solve_discrete_lyapunov: A is " + a.shape() + " but Q is " + q.shape());
  }
  (void)cholesky(q, opt);  // Q must be SPD
  const double sr = spectral_radius(a, opt);
  if (!(sr < 1.0)) {
    throw NoStableSolutionError("solve_discrete_lyapunov: no stable solution, spectral radius " +
                                std::to_string(sr) + " >= 1");
  }

  // Unknown P(i,j) at index i*n+j:  P(i,j) - sum_{k,l} A(k,i) P(k,l) A(l,j) = Q(i,j).
  const std::size_t m = n * n;
  Matrix sys(m, m);
  Vector rhs(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t row = i * n + j;
      rhs[row] = q(i, j);
      for (std::size_t k = 0; k < n; ++k) {
        const double aki = a(k, i);
        if (aki == 0.0) continue;
        for (std::size_t l = 0; l < n; ++l) sys(row, k * n + l) -= aki * a(l, j);
      }
      sys(row, row) += 1.0;
    }
  }
  Vector vec_p;
  try {
    vec_p = solve_linear(std::move(sys), std::move(rhs));
  } catch (const NumericError&) {
    throw NumericError("solve_discrete_lyapunov: vectorized system is singular");
  }
  Matrix p(n, n);
  std::copy(vec_p.begin(), vec_p.end(), p.data().begin());
  p = symmetrize(p);

  const double res = lyapunov_residual(a, p, q, opt);
  const double qn = spectral_norm(q, opt);
  if (!(res <= opt.residual_tol * std::max(qn, 1.0))) {
    throw NumericError("solve_discrete_lyapunov: residual " + std::to_string(res) +
                       " exceeds tolerance");
  }
  return p;
}

/// Unit eigenvector for a real eigenvalue `lambda` of `a` by inverse iteration.
inline Vector real_eigenvector(const Matrix& a, double lambda, std::size_t iterations = 8) {
  require_square_finite(a, "real_eigenvector");
  const std::size_t n = a.rows();
  const double shift = lambda + 1e-10 * std::max(1.0, std::abs(lambda));
  Matrix m = a;
  for (std::size_t i = 0; i < n; ++i) m(i, i) -= shift;
  std::vector<std::size_t> piv;
  detail::lu_factor(m, piv, true);
  Vector x(n, 1.0);
  for (std::size_t it = 0; it < iterations; ++it) {
    x = detail::lu_solve(m, piv, std::move(x));
    const double nx = norm2(x);
    if (!(nx > 0.0) || !std::isfinite(nx)) throw NumericError("real_eigenvector: iteration failed");
    for (double& v : x) v /= nx;
  }
  // Fix the sign so the largest-magnitude component is positive.
  const auto it = std::max_element(x.begin(), x.end(),
                                   [](double l, double r) { return std::abs(l) < std::abs(r); });
  if (*it < 0)
    for (double& v : x) v = -v;
  return x;
}

/// A^k by repeated multiplication.
inline Matrix matrix_power(const Matrix& a, std::size_t k) {
  Matrix p = Matrix::identity(a.rows());
  for (std::size_t i = 0; i < k; ++i) p = a * p;
  return p;
}

}  // namespace rateabs
