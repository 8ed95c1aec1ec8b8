// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>

#include "generators.hpp"
#include "rateabs/counterexample.hpp"
#include "rateabs/rateabs.hpp"

using namespace rateabs;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double quadratic_form(const Matrix& q, const Vector& x) {
  const Vector qx = q * x;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * qx[i];
  return s;
}

std::vector<Vector> zeros(std::size_t n, std::size_t horizon) {
  return std::vector<Vector>(horizon, Vector(n, 0.0));
}

Outcome counterexample_norms() {
  Outcome o;
  const double a = 0.5, c = 1000.0;
  const Matrix a0 = counterexample::nominal_matrix(a);
  const Matrix a1 = counterexample::skip_matrix(a, c);
  if (!close(spectral_norm(a0), std::sqrt(2.0) * a, 1e-9)) o.fail("||A0||");
  if (!close(spectral_norm(a1), std::sqrt(a * a + c * c), 1e-9)) o.fail("||A1||");
  if (!close(spectral_norm(a0 * a1), std::sqrt(std::pow(a, 4) + a * a), 1e-9)) o.fail("||A0 A1||");

  auto ev = eigenvalues(a1 * a1 * a0 * a0);
  std::sort(ev.begin(), ev.end(), [](auto x, auto y) { return std::abs(x) < std::abs(y); });
  const double expected[] = {0.0, 0.0, 250.0625};
  for (std::size_t i = 0; i < 3; ++i) {
    if (std::abs(ev[i] - std::complex<double>(expected[i], 0.0)) > 1e-6) o.fail("eigenvalues");
  }
  o.detail = o.pass ? "norms within 1e-9, eig(A1^2 A0^2) = {0, 0, 250.0625}" : o.detail;
  return o;
}

Outcome averaged_radius() {
  Outcome o;
  const auto sys = counterexample::system();
  const auto r12 = averaged_spectral_radius(sys, MkConstraint(1, 2), 24);
  const auto r24 = averaged_spectral_radius(sys, MkConstraint(2, 4), 24);
  if (!(r12.rho_hat >= 0.70 && r12.rho_hat <= 0.72 && r12.rho_hat < 0.9)) o.fail("(1,2) range");
  if (!(r24.rho_hat >= 3.976 && r24.rho_hat <= 3.977)) o.fail("(2,4) range");
  // The argmax is the periodic pattern itself, so equality holds up to round-off.
  if (!(r24.rho_hat >= std::pow(250.0625, 0.25) * (1.0 - 1e-12))) o.fail("(2,4) lower bound");
  std::ostringstream d;
  d.precision(8);
  d << "rho_hat_24(1,2)=" << r12.rho_hat << " rho_hat_24(2,4)=" << r24.rho_hat;
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome mk_closed_forms() {
  Outcome o;
  gen::Rng rng(1001);
  for (int t = 0; t < 500; ++t) {
    const double r0 = gen::uniform(rng, 0.05, 0.99);
    const double r1 = r0 * gen::uniform(rng, 1.0, 4.0);
    const std::size_t K = gen::index(rng, 1, 12);
    if (mk_rho_tilde(r0, r1, MkConstraint(K, K)) != r0) o.fail("rho_tilde(m=K) != rho0");
    if (mk_rho_tilde(r0, r1, MkConstraint(0, K)) != r1) o.fail("rho_tilde(m=0) != rho1");
    const auto mk = gen::mk(rng, 12);
    const double rt = mk_rho_tilde(r0, r1, mk);
    const double at = mk_alpha_tilde(r0, r1, mk);
    if (std::abs(at - std::pow(rt / r0, static_cast<double>(mk.K()))) > 1e-10 * std::max(1.0, at)) {
      o.fail("alpha_tilde identity");
    }
    AbstractionParams p;
    p.rho = {{0, r0}, {1, r1}};
    const auto base = mk_verdict(p, mk);
    for (std::size_t c : {2u, 3u, 5u}) {
      const auto scaled = mk_verdict(p, MkConstraint(c * mk.m(), c * mk.K()));
      if (std::abs(scaled.rho_tilde - base.rho_tilde) > 1e-12 * base.rho_tilde ||
          scaled.proven_stable != base.proven_stable) {
        o.fail("scale invariance at c=" + std::to_string(c));
      }
    }
  }
  if (o.pass) o.detail = "500 random rate pairs, c in {2,3,5}";
  return o;
}

Outcome skip_bound() {
  Outcome o;
  for (std::size_t K = 1; K <= 5; ++K) {
    for (std::size_t skips = 0; skips <= K; ++skips) {
      const auto mk = MkConstraint::from_skips(skips, K);
      const auto worst = worst_case_sequence(mk, 12);
      for (std::size_t k = 0; k <= 12; ++k) {
        std::size_t brute = 0;
        for (std::uint32_t bits = 0; bits < (1u << k); ++bits) {
          ModeSequence s(k);
          for (std::size_t i = 0; i < k; ++i) s[i] = (bits >> i) & 1u;
          if (validate_mk(s, mk)) brute = std::max<std::size_t>(brute, std::popcount(bits));
        }
        if (skip_count_bound(mk, k) != brute) o.fail("bound mismatch at " + mk.to_string());
        const auto prefix = std::count(worst.begin(), worst.begin() + static_cast<long>(k), 1u);
        if (static_cast<std::size_t>(prefix) != brute) o.fail("worst case not tight");
      }
    }
  }
  if (o.pass) o.detail = "all (skips,K,k) with K<=5, k<=12";
  return o;
}

// Shared random trial for criteria 5, 6 and 9.
struct TrialStats {
  std::size_t trials = 0;
  std::size_t guarantee_violations = 0;
  std::size_t proven = 0;
  std::size_t transfer_violations = 0;
  std::size_t cost_checks = 0;
  std::size_t cost_violations = 0;
};

TrialStats run_guarantee_trials() {
  TrialStats st;
  gen::Rng rng(2024);
  for (int t = 0; t < 600; ++t) {
    const std::size_t n = gen::index(rng, 1, 5);
    const double w_bar = gen::uniform(rng, 0.0, 0.5);
    const auto sys = gen::two_mode_system(rng, n, w_bar);
    const Matrix q = gen::spd_matrix(rng, n);
    for (int route = 0; route < 2; ++route) {
      const AbstractionParams p = route == 0
          ? build_robustness_abstraction(sys, gen::valid_rho(rng, sys.nominal()))
          : lyapunov_abstraction(sys, Matrix::identity(n));
      const auto mk = gen::mk(rng, 8);
      const auto seq = gen::admissible_sequence(rng, mk, 100);
      const Vector x0 = gen::vector(rng, n);
      const auto trace = co_simulate(sys, p, seq,
                                     DisturbanceSpec::random(rng(), w_bar), x0, 100, q);
      ++st.trials;
      if (trace.diverged || !check_guarantee(trace).holds) ++st.guarantee_violations;

      for (const auto& row : trace.rows) {
        ++st.cost_checks;
        if (quadratic_form(q, row.x) > *row.cost_bound * (1.0 + 1e-9) + 1e-300) {
          ++st.cost_violations;
        }
      }

      const auto v = mk_verdict(p, mk);
      if (!v.proven_stable) continue;
      ++st.proven;
      const auto worst = worst_case_sequence(mk, 100);
      const auto xs = simulate_plant(sys, worst, zeros(n, 100), x0, 100);
      for (std::size_t k = 0; k < xs.size(); ++k) {
        const double env = v.alpha * v.alpha_tilde *
                           std::pow(v.rho_tilde, static_cast<double>(k)) * norm2(x0);
        if (norm2(xs[k]) > env * (1.0 + 1e-9)) {
          ++st.transfer_violations;
          break;
        }
      }
    }
  }
  return st;
}

Outcome numerics() {
  Outcome o;
  gen::Rng rng(3003);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = gen::index(rng, 1, 8);
    const Matrix a = gen::stable_matrix(rng, n);
    const Matrix q = gen::spd_matrix(rng, n);
    const Matrix p = solve_discrete_lyapunov(a, q);
    if (lyapunov_residual(a, p, q) > 1e-9 * spectral_norm(q)) o.fail("dlyap residual");
    const SystemModel sys({{0, a}});
    if (!(lyapunov_abstraction(sys, q).rate(0) < 1.0)) o.fail("Lyapunov rho0 >= 1");

    const Matrix r = cholesky(p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (r(i, j) != 0.0) o.fail("cholesky factor not upper triangular");
    if ((r.transpose() * r - p).max_abs() > 1e-10 * p.max_abs()) o.fail("R^T R != P");

    const Matrix m = gen::matrix(rng, n, n);
    const double s = spectral_norm(m);
    if (std::abs(s * s - symmetric_eigenvalues(m.transpose() * m).back()) > 1e-9 * s * s) {
      o.fail("||A||^2 != lambda_max(A^T A)");
    }
    if (spectral_radius(m) > s * (1.0 + 1e-12)) o.fail("spectral radius above norm");
    if (s > m.frobenius_norm() * (1.0 + 1e-12)) o.fail("norm above Frobenius");
  }
  if (o.pass) o.detail = "100 systems, n <= 8";
  return o;
}

Outcome scheduler_soundness() {
  Outcome o;
  gen::Rng rng(4004);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = gen::index(rng, 1, 4);
    const auto sys = gen::two_mode_system(rng, n);
    const auto p = t % 2 == 0
        ? build_robustness_abstraction(sys, gen::valid_rho(rng, sys.nominal()))
        : lyapunov_abstraction(sys, Matrix::identity(n));
    const double rho_hat = gen::uniform(rng, p.rate(0), 0.999);
    const double alpha_hat = gen::uniform(rng, 1.0, 20.0);
    ScheduleRunOptions opt;
    opt.steps = 1000;
    const auto recs = run_schedule(make_exponential_state(rho_hat, alpha_hat), p,
                                   make_greedy_policy(default_preference(p)), opt);
    ModeSequence seq;
    for (const auto& r : recs) {
      if (r.alarm) o.fail("alarm in an unforced run");
      seq.push_back(r.chosen);
    }
    // kappa is evaluated incrementally; the product form would underflow slowly anyway.
    double log_kappa = 0.0;
    for (std::size_t k = 0;; ++k) {
      if (log_kappa > std::log(alpha_hat) + k * std::log(rho_hat) + 1e-9) {
        o.fail("kappa above alpha_hat rho_hat^k");
        break;
      }
      if (k == seq.size()) break;
      log_kappa += std::log(p.rate(seq[k]));
    }
    const Vector x0 = gen::vector(rng, n);
    const auto xs = simulate_plant(sys, seq, zeros(n, seq.size()), x0, seq.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double env = p.alpha * alpha_hat * std::pow(rho_hat, static_cast<double>(k)) * norm2(x0);
      if (norm2(xs[k]) > env * (1.0 + 1e-9) + 1e-300) {
        o.fail("plant above alpha alpha_hat rho_hat^k |x0|");
        break;
      }
    }

    // practical mode on a disturbed copy of the same plant
    const double w_bar = gen::uniform(rng, 0.0, 0.1);
    const SystemModel noisy(sys.modes(), w_bar);
    const auto pn = build_robustness_abstraction(noisy, gen::valid_rho(rng, noisy.nominal()));
    const double v0 = pn.alpha * norm2(x0);
    const double C =
        std::max(v0, pn.beta * w_bar / (1.0 - pn.rate(0))) * gen::uniform(rng, 1.05, 3.0);
    ScheduleRunOptions popt;
    popt.steps = 1000;
    popt.w_bar = {w_bar};
    const auto precs = run_schedule(make_practical_state(C, v0), pn,
                                    make_greedy_policy(default_preference(pn)), popt);
    ModeSequence pseq;
    for (const auto& r : precs) {
      if (r.alarm || *r.vbar > C) o.fail("practical vbar above C");
      pseq.push_back(r.chosen);
    }
    const auto trace = co_simulate(noisy, pn, pseq, DisturbanceSpec::random(rng(), w_bar), x0,
                                   pseq.size());
    for (const auto& row : trace.rows) {
      if (row.vbar > C * (1.0 + 1e-12) || row.x_norm > C * (1.0 + 1e-9)) {
        o.fail("practical |x| above C");
        break;
      }
    }
  }
  if (o.pass) o.detail = "100 exponential + 100 practical runs, horizon 1000";
  return o;
}

Outcome cost_transform_identity() {
  Outcome o;
  gen::Rng rng(5005);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = gen::index(rng, 1, 6);
    const Matrix q = gen::spd_matrix(rng, n);
    const Matrix r = cost_transform(q);
    const Vector x = gen::vector(rng, n, 10.0);
    const double lhs = quadratic_form(q, x);
    const double rx = norm2(r * x);
    if (std::abs(lhs - rx * rx) > 1e-10 * std::max(1.0, lhs)) o.fail("x^T Q x != |R x|^2");
  }
  return o;
}

struct Captured {
  int code = -1;
  std::string out;
};

Captured run_cli(const std::string& args) {
  Captured c;
  const std::string cmd = std::string(RATEABS_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return c;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) c.out.append(buf, got);
  const int status = pclose(p);
  c.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return c;
}

Outcome documented_conservatism() {
  Outcome o;
  const auto r = run_cli("repro-counterexample");
  if (r.code != 0) o.fail("repro-counterexample exited " + std::to_string(r.code));
  const std::regex mk_line(R"(mk-check \(1,2\):.*not proven)");
  const std::regex jsr_line(R"(jsr +\(1,2\): rho_hat_24=([0-9.]+))");
  std::smatch m;
  if (!std::regex_search(r.out, mk_line)) o.fail("no 'not proven' line for (1,2)");
  if (!std::regex_search(r.out, m, jsr_line)) {
    o.fail("no jsr line for (1,2)");
  } else {
    const double v = std::stod(m[1].str());
    if (!(v >= 0.70 && v <= 0.72)) o.fail("jsr rho_hat_24 " + m[1].str() + " not near 0.71");
    if (o.pass) o.detail = "mk-check not proven, rho_hat_24=" + m[1].str();
  }
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    char time_buf[32];
    std::snprintf(time_buf, sizeof time_buf, "%.2fs", secs);
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << title << " (" << time_buf
              << ")" << (o.detail.empty() ? "" : ": " + o.detail) << std::endl;
  };

  TrialStats stats;
  bool trials_ran = false;
  const auto trials = [&]() -> const TrialStats& {
    if (!trials_ran) {
      stats = run_guarantee_trials();
      trials_ran = true;
    }
    return stats;
  };

  report(1, "counterexample norms and eigenvalues", counterexample_norms);
  report(2, "brute-force averaged spectral radius", averaged_radius);
  report(3, "(m,K) closed forms and scale invariance", mk_closed_forms);
  report(4, "skip-count bound tightness", skip_bound);
  report(5, "abstraction guarantee property suite", [&] {
    Outcome o;
    const auto& s = trials();
    if (s.trials < 1000) o.fail("only " + std::to_string(s.trials) + " trials");
    if (s.guarantee_violations) o.fail(std::to_string(s.guarantee_violations) + " violations");
    if (o.pass) o.detail = std::to_string(s.trials) + " trials, both routes, zero violations";
    return o;
  });
  report(6, "stability transfer on the worst-case sequence", [&] {
    Outcome o;
    const auto& s = trials();
    if (s.proven == 0) o.fail("no trial was proven stable");
    if (s.transfer_violations) o.fail(std::to_string(s.transfer_violations) + " violations");
    if (o.pass) o.detail = std::to_string(s.proven) + " proven trials checked";
    return o;
  });
  report(7, "numerics invariants", numerics);
  report(8, "scheduler soundness", scheduler_soundness);
  report(9, "cost bounds", [&] {
    Outcome o = cost_transform_identity();
    const auto& s = trials();
    if (s.cost_violations) o.fail(std::to_string(s.cost_violations) + " cost bound violations");
    if (o.pass) o.detail = std::to_string(s.cost_checks) + " trace rows, 500 transform checks";
    return o;
  });
  report(10, "documented conservatism", documented_conservatism);

  return failures == 0 ? 0 : 1;
}
