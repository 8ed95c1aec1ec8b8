// rateabs: convergence rate abstractions for weakly-hard control loops.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "rateabs/rateabs.hpp"

namespace rateabs::cli {
namespace {

void add_param_options(CLI::App* cmd, ParamOptions& p) {
  cmd->add_option("--method", p.method, "robust | lyapunov")->capture_default_str();
  cmd->add_option("--rho", p.rho, "nominal decay rate (robust method)");
  cmd->add_option("--beta", p.beta, "disturbance gain (defaults to its smallest valid value)");
  cmd->add_option("--Q", p.q, "Lyapunov weight: 'identity' or rows 'a,b;c,d'")
      ->capture_default_str();
}

void print_params(std::ostream& os, const AbstractionParams& p) {
  os << "method: " << to_string(p.method) << '\n';
  os << "alpha: " << fmt(p.alpha, 12) << '\n';
  os << "beta: " << fmt(p.beta, 12) << '\n';
  for (const auto& [id, r] : p.rho) os << "rho[" << id << "]: " << fmt(r, 12) << '\n';
  if (p.diagnostics.k_tilde) os << "k_tilde: " << *p.diagnostics.k_tilde << '\n';
  if (p.diagnostics.alpha_min) os << "alpha_min: " << fmt(*p.diagnostics.alpha_min, 12) << '\n';
  if (p.diagnostics.p_condition) {
    os << "P_condition: " << fmt(*p.diagnostics.p_condition, 12) << '\n';
  }
  for (const auto& w : p.diagnostics.warnings) os << "warning: " << w << '\n';
}

struct AnalyzeArgs {
  std::string system;
  ParamOptions params;
  std::string out;
  std::size_t sweep = 0;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const auto model = load_document(a.system).to_model();
  const auto params = build_params(model, a.params);
  print_params(std::cout, params);
  if (a.sweep > 0) {
    std::cout << "rho sweep (rho, k_tilde, alpha_min):\n";
    for (const auto& pt : sweep_rho(model.nominal(), a.sweep)) {
      std::cout << "  " << fmt(pt.rho, 8) << ' ' << pt.k_tilde << ' ' << fmt(pt.alpha_min, 8)
                << '\n';
    }
  }
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw UsageError("cannot write '" + a.out + "'");
    f << params_to_json(params).dump(2) << '\n';
  }
  return kOk;
}

struct MkArgs {
  std::string system;
  ParamOptions params;
  std::size_t m = 0;
  std::size_t K = 1;
  std::optional<double> r0;
  bool json = false;
};

int cmd_mk_check(const MkArgs& a) {
  const auto model = load_document(a.system).to_model();
  const auto params = build_params(model, a.params);
  const MkConstraint mk(a.m, a.K);
  const auto v = mk_verdict(params, mk, params.alpha, a.r0);
  if (a.json) {
    nlohmann::json j;
    j["m"] = mk.m();
    j["K"] = mk.K();
    j["method"] = std::string(to_string(params.method));
    j["rho0"] = v.rho0;
    j["rho1"] = v.rho1;
    j["rho_tilde"] = v.rho_tilde;
    j["alpha_tilde"] = v.alpha_tilde;
    j["alpha"] = v.alpha;
    j["combined_overshoot"] = v.combined_overshoot;
    j["proven_stable"] = v.proven_stable;
    if (v.safe_initial_radius) j["safe_initial_radius"] = *v.safe_initial_radius;
    j["notes"] = v.notes;
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "constraint: " << mk.to_string() << " (mbar=" << mk.m_bar() << ")\n"
              << "method: " << to_string(params.method) << '\n'
              << "rho0: " << fmt(v.rho0, 12) << '\n'
              << "rho1: " << fmt(v.rho1, 12) << '\n'
              << "rho_tilde: " << fmt(v.rho_tilde, 12) << '\n'
              << "alpha_tilde: " << fmt(v.alpha_tilde, 12) << '\n'
              << "alpha: " << fmt(v.alpha, 12) << '\n'
              << "combined_overshoot: " << fmt(v.combined_overshoot, 12) << '\n'
              << "verdict: " << (v.proven_stable ? "proven stable" : "not proven") << '\n';
    if (v.safe_initial_radius) {
      std::cout << "safe_initial_radius: " << fmt(*v.safe_initial_radius, 12) << '\n';
    }
    for (const auto& n : v.notes) std::cout << "note: " << n << '\n';
    if (!v.proven_stable) {
      std::cout << "hint: the criterion is sufficient only; run `rateabs jsr` for instability "
                   "evidence\n";
    }
  }
  return v.proven_stable ? kOk : kNotProven;
}

/// Resolves --sigma into a sequence of `steps` modes and the pattern period.
std::pair<ModeSequence, std::size_t> resolve_sigma(const std::string& spec, std::size_t steps) {
  ModeSequence period;
  const std::string prefix = "mk-worst:";
  if (spec.rfind(prefix, 0) == 0) {
    const auto parts = split(spec.substr(prefix.size()), ",");
    if (parts.size() != 2) throw UsageError("--sigma mk-worst:m,K expects two integers");
    const auto m = static_cast<std::size_t>(parse_double(parts[0], "--sigma m"));
    const auto K = static_cast<std::size_t>(parse_double(parts[1], "--sigma K"));
    period = worst_case_sequence(MkConstraint(m, K), K);
  } else if (std::ifstream(spec).good()) {
    period = parse_modes(read_file(spec), "sigma file '" + spec + "'");
  } else {
    period = parse_modes(spec, "--sigma");
  }
  ModeSequence seq(steps);
  for (std::size_t k = 0; k < steps; ++k) seq[k] = period[k % period.size()];
  return {seq, period.size()};
}

struct SimulateArgs {
  std::string system;
  ParamOptions params;
  std::string sigma = "0";
  std::size_t steps = 100;
  std::string x0;
  std::string w = "zero";
  std::string out;
};

Vector resolve_x0(const std::string& spec, const SystemModel& model, const ModeSequence& seq,
                  std::size_t period) {
  const std::size_t n = model.dimension();
  if (spec.empty()) {
    Vector e(n, 0.0);
    e[0] = 1.0;
    return e;
  }
  if (spec == "eig") {
    // Dominant eigenvector of the transition product over one pattern period.
    const ModeSequence one(seq.begin(), seq.begin() + std::min(period, seq.size()));
    const Matrix phi = transition_product(model, one);
    const auto ev = eigenvalues(phi);
    std::complex<double> dom = 0.0;
    for (const auto& l : ev)
      if (std::abs(l) > std::abs(dom)) dom = l;
    if (dom.imag() != 0.0) {
      throw UsageError("--x0 eig: dominant eigenvalue of the period product is complex");
    }
    return real_eigenvector(phi, dom.real());
  }
  Vector x = parse_vector(spec, "--x0");
  if (x.size() != n) {
    throw UsageError("--x0 has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(n));
  }
  return x;
}

DisturbanceSpec resolve_disturbance(const std::string& spec, const SystemModel& model) {
  if (spec == "zero") return DisturbanceSpec::zero();
  if (spec.rfind("const:", 0) == 0) {
    return DisturbanceSpec::constant(parse_double(spec.substr(6), "--w const"));
  }
  if (spec.rfind("seed:", 0) == 0) {
    const auto seed = static_cast<std::uint64_t>(std::stoull(spec.substr(5)));
    if (!model.disturbance_bound()) {
      throw UsageError("--w seed:<s> needs a disturbance_bound in the system document");
    }
    return DisturbanceSpec::random(seed, *model.disturbance_bound());
  }
  throw UsageError("--w expects zero, const:<v> or seed:<s>");
}

int cmd_simulate(const SimulateArgs& a) {
  const auto model = load_document(a.system).to_model();
  const auto params = build_params(model, a.params);
  const auto [seq, period] = resolve_sigma(a.sigma, a.steps);
  const Vector x0 = resolve_x0(a.x0, model, seq, period);
  const auto dist = resolve_disturbance(a.w, model);
  const auto trace = co_simulate(model, params, seq, dist, x0, a.steps, model.cost_weight());

  if (a.out.empty() || a.out == "-") {
    write_trace_csv(std::cout, trace);
  } else {
    std::ofstream f(a.out);
    if (!f) throw UsageError("cannot write '" + a.out + "'");
    write_trace_csv(f, trace);
  }
  if (trace.seed) std::cerr << "seed: " << *trace.seed << '\n';
  if (trace.diverged) std::cerr << "trace truncated: state diverged\n";
  const auto report = check_guarantee(trace);
  if (!report.holds) {
    std::cerr << "guarantee violated at k=" << *report.first_violation << '\n';
    return kNotProven;
  }
  std::cerr << "guarantee holds (max |x|/vbar = " << fmt(report.max_ratio, 8) << ")\n";
  return kOk;
}

struct JsrArgs {
  std::string system;
  std::size_t m = 0;
  std::size_t K = 1;
  std::size_t length = 24;
  std::size_t jobs = 1;
};

int cmd_jsr(const JsrArgs& a) {
  const auto model = load_document(a.system).to_model();
  JsrOptions opt;
  opt.jobs = a.jobs;
  const MkConstraint mk(a.m, a.K);
  AveragedSpectralRadius r;
  try {
    r = averaged_spectral_radius(model, mk, a.length, opt);
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << " (--length)\n";
    return kUsage;
  }
  std::cout << "constraint: " << mk.to_string() << '\n'
            << "length: " << a.length << '\n'
            << "rho_hat: " << fmt(r.rho_hat, 10) << '\n'
            << "argmax: " << format_sequence(r.argmax) << '\n'
            << "sequences: " << r.sequences_evaluated << '\n';
  return kOk;
}

struct ScheduleArgs {
  std::string system;
  ParamOptions params;
  std::optional<double> rho_hat;
  std::optional<double> alpha_hat;
  std::optional<double> C;
  std::optional<double> w_bar;
  double x0_norm = 1.0;
  std::size_t steps = 100;
  std::string policy = "greedy";
  std::uint64_t seed = 0;
  std::string force;
  std::string out;
};

int cmd_schedule(const ScheduleArgs& a) {
  const auto model = load_document(a.system).to_model();
  const auto params = build_params(model, a.params);
  SchedulerState state;
  ScheduleRunOptions opt;
  opt.steps = a.steps;
  if (a.C) {
    if (a.rho_hat || a.alpha_hat) throw UsageError("--C excludes --rho-hat/--alpha-hat");
    state = make_practical_state(*a.C, params.alpha * a.x0_norm);
    opt.w_bar = {a.w_bar.value_or(model.disturbance_bound().value_or(0.0))};
  } else {
    if (!a.rho_hat || !a.alpha_hat) {
      throw UsageError("schedule needs --rho-hat and --alpha-hat, or --C");
    }
    state = make_exponential_state(*a.rho_hat, *a.alpha_hat);
  }
  if (!a.force.empty()) opt.forced = parse_modes(a.force, "--force");

  Policy policy;
  if (a.policy == "greedy") {
    policy = make_greedy_policy(default_preference(params));
  } else if (a.policy == "round-robin") {
    policy = make_round_robin_policy();
  } else if (a.policy == "random") {
    policy = make_random_policy(a.seed);
  } else {
    throw UsageError("unknown --policy '" + a.policy + "'");
  }

  const auto records = run_schedule(state, params, policy, opt);
  if (a.out.empty() || a.out == "-") {
    write_schedule_csv(std::cout, records);
  } else {
    std::ofstream f(a.out);
    if (!f) throw UsageError("cannot write '" + a.out + "'");
    write_schedule_csv(f, records);
  }
  for (const auto& r : records) {
    if (r.alarm) {
      std::cerr << "alarm at k=" << r.k << ": " << r.alarm_reason
                << "; switching to nominal execution\n";
      return kNotProven;
    }
  }
  return kOk;
}

struct ReproArgs {
  double rho = 0.6;
  std::size_t length = 24;
  std::size_t jobs = 1;
};

int cmd_repro_counterexample(const ReproArgs& a) {
  const double av = 0.5, cv = 1000.0;
  const auto model = counterexample::system(av, cv);
  const Matrix& a0 = model.mode(0);
  const Matrix& a1 = model.mode(1);
  bool all_ok = true;
  auto row = [&](const std::string& name, double got, const std::string& ref, bool ok) {
    all_ok = all_ok && ok;
    std::printf("%-34s %-18s %-26s %s\n", name.c_str(), fmt(got, 12).c_str(), ref.c_str(),
                ok ? "PASS" : "FAIL");
  };
  std::printf("%-34s %-18s %-26s %s\n", "quantity", "computed", "reference", "status");

  const double n0 = spectral_norm(a0);
  const double n1 = spectral_norm(a1);
  const double n01 = spectral_norm(a0 * a1);
  row("||A0||_2", n0, "sqrt(2)*a ~ 0.707", std::abs(n0 - std::sqrt(2.0) * av) <= 1e-9);
  row("||A1||_2", n1, "sqrt(a^2+c^2) ~ 1000",
      std::abs(n1 - std::sqrt(av * av + cv * cv)) <= 1e-9);
  row("||A0 A1||_2", n01, "sqrt(a^4+a^2) ~ 0.559",
      std::abs(n01 - std::sqrt(std::pow(av, 4) + av * av)) <= 1e-9);

  auto ev = eigenvalues(a1 * a1 * a0 * a0);
  std::sort(ev.begin(), ev.end(),
            [](const auto& l, const auto& r) { return std::abs(l) < std::abs(r); });
  const double lam = counterexample::dominant_eigenvalue(av, cv);
  row("eig(A1^2 A0^2)[0]", std::abs(ev[0]), "0", std::abs(ev[0]) <= 1e-6);
  row("eig(A1^2 A0^2)[1]", std::abs(ev[1]), "0", std::abs(ev[1]) <= 1e-6);
  row("eig(A1^2 A0^2)[2]", ev[2].real(), "a^4+c*a^2 = 250.0625",
      std::abs(ev[2] - std::complex<double>(lam, 0.0)) <= 1e-6);

  JsrOptions jo;
  jo.jobs = a.jobs;
  const auto j12 = averaged_spectral_radius(model, MkConstraint(1, 2), a.length, jo);
  const auto j24 = averaged_spectral_radius(model, MkConstraint(2, 4), a.length, jo);
  const std::string L = std::to_string(a.length);
  const bool full = a.length == 24;
  row("rho_hat_" + L + " (1,2)", j12.rho_hat, full ? "~0.71, < 0.9" : "< 0.9",
      j12.rho_hat < 0.9 && (!full || (j12.rho_hat >= 0.70 && j12.rho_hat <= 0.72)));
  const double periodic = std::pow(lam, 0.25);
  // The periodic pattern attains the bound exactly, so compare with a relative slack.
  row("rho_hat_" + L + " (2,4)", j24.rho_hat, full ? "~3.9766, >= 250.0625^(1/4)" : ">= 250.0625^(1/4)",
      j24.rho_hat >= periodic * (1.0 - 1e-12) && j24.rho_hat > 3.97635 &&
          (!full || (j24.rho_hat >= 3.976 && j24.rho_hat <= 3.977)));

  // The robustness abstraction cannot prove (1,2) stability although the
  // brute-force radius above shows the system is stable.
  const auto params = build_robustness_abstraction(model, a.rho);
  const auto v12 = mk_verdict(params, MkConstraint(1, 2));
  std::printf("\nconservatism of the scalar abstraction (robust, rho=%s):\n",
              fmt(a.rho, 6).c_str());
  std::printf("  mk-check (1,2): rho_tilde=%s -> %s\n", fmt(v12.rho_tilde, 8).c_str(),
              v12.proven_stable ? "proven stable" : "not proven");
  std::printf("  jsr      (1,2): rho_hat_%s=%s -> stable (rho_hat < 1)\n", L.c_str(),
              fmt(j12.rho_hat, 8).c_str());
  std::printf("  argmax (2,4): %s\n", format_sequence(j24.argmax).c_str());
  const bool conservative = !v12.proven_stable && j12.rho_hat < 1.0;
  row("abstraction conservative at (1,2)", v12.rho_tilde, "not proven while rho_hat < 1",
      conservative);
  return all_ok ? kOk : kNotProven;
}

int run(int argc, char** argv) {
  CLI::App app{"Convergence rate abstractions for weakly-hard control loops"};
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Build abstraction parameters for a system");
  c_an->add_option("system", an.system, "system document (JSON)")->required();
  add_param_options(c_an, an.params);
  c_an->add_option("--out", an.out, "write parameters as JSON");
  c_an->add_option("--sweep", an.sweep, "report alpha_min over N admissible rho values");

  MkArgs mk;
  auto* c_mk = app.add_subcommand("mk-check", "Closed-form (m,K) stability verdict");
  c_mk->add_option("system", mk.system, "system document (JSON)")->required();
  add_param_options(c_mk, mk.params);
  c_mk->add_option("--m", mk.m, "minimum nominal executions per window")->required();
  c_mk->add_option("--K", mk.K, "window length")->required();
  c_mk->add_option("--r0", mk.r0, "radius of the nominal region of attraction");
  c_mk->add_flag("--json", mk.json, "print a JSON record");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Co-simulate plant and abstraction as CSV");
  c_sim->add_option("system", sim.system, "system document (JSON)")->required();
  add_param_options(c_sim, sim.params);
  c_sim->add_option("--sigma", sim.sigma, "mk-worst:m,K | comma list | file (repeated)")
      ->capture_default_str();
  c_sim->add_option("--steps", sim.steps, "horizon")->capture_default_str();
  c_sim->add_option("--x0", sim.x0, "initial state (comma list) or 'eig'");
  c_sim->add_option("--w", sim.w, "zero | const:<v> | seed:<s>")->capture_default_str();
  c_sim->add_option("--out", sim.out, "CSV output path (default stdout)");

  JsrArgs js;
  auto* c_js = app.add_subcommand("jsr", "Brute-force averaged spectral radius");
  c_js->add_option("system", js.system, "system document (JSON)")->required();
  c_js->add_option("--m", js.m, "minimum nominal executions per window")->required();
  c_js->add_option("--K", js.K, "window length")->required();
  c_js->add_option("--length", js.length, "sequence length L")->capture_default_str();
  c_js->add_option("--jobs", js.jobs, "worker threads")->capture_default_str();

  ScheduleArgs sc;
  auto* c_sc = app.add_subcommand("schedule", "Run the online scheduling gate");
  c_sc->add_option("system", sc.system, "system document (JSON)")->required();
  add_param_options(c_sc, sc.params);
  c_sc->add_option("--rho-hat", sc.rho_hat, "target decay rate");
  c_sc->add_option("--alpha-hat", sc.alpha_hat, "target overshoot");
  c_sc->add_option("--C", sc.C, "practical-stability bound on vbar");
  c_sc->add_option("--wbar", sc.w_bar, "per-step disturbance bound (practical mode)");
  c_sc->add_option("--x0-norm", sc.x0_norm, "|x0| for vbar_0 (practical mode)")
      ->capture_default_str();
  c_sc->add_option("--steps", sc.steps, "number of periods")->capture_default_str();
  c_sc->add_option("--policy", sc.policy, "greedy | round-robin | random")
      ->capture_default_str();
  c_sc->add_option("--seed", sc.seed, "seed for the random policy")->capture_default_str();
  c_sc->add_option("--force", sc.force, "impose this mode script regardless of the gate");
  c_sc->add_option("--out", sc.out, "CSV output path (default stdout)");

  ReproArgs rp;
  auto* c_rp = app.add_subcommand("repro-counterexample",
                                  "Reproduce the (1,2)-stable, (2,4)-unstable example");
  c_rp->add_option("--rho", rp.rho, "nominal rate for the abstraction")->capture_default_str();
  c_rp->add_option("--length", rp.length, "sequence length L")->capture_default_str();
  c_rp->add_option("--jobs", rp.jobs, "worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (c_an->parsed()) return cmd_analyze(an);
    if (c_mk->parsed()) return cmd_mk_check(mk);
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_js->parsed()) return cmd_jsr(js);
    if (c_sc->parsed()) return cmd_schedule(sc);
    if (c_rp->parsed()) return cmd_repro_counterexample(rp);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace
}  // namespace rateabs::cli

int main(int argc, char** argv) { return rateabs::cli::run(argc, argv); }
