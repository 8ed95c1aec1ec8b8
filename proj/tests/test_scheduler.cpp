#include <gtest/gtest.h>

#include <sstream>

#include "generators.hpp"
#include "rateabs/builders.hpp"
#include "rateabs/scheduler.hpp"
#include "rateabs/sequences.hpp"
#include "rateabs/simulation.hpp"

using namespace rateabs;

namespace {

AbstractionParams rates(double r0, double r1, double beta = 1.0) {
  AbstractionParams p;
  p.beta = beta;
  p.rho = {{0, r0}, {1, r1}};
  return p;
}

}  // namespace

TEST(KappaHat, Examples) {
  const auto p = rates(0.5, 1.2);
  auto s = make_exponential_state(0.9, 2.0);
  EXPECT_EQ(s.kappa_hat(), 1.0);
  const auto once = kappa_hat_step(s, 0, p);
  EXPECT_NEAR(once.kappa_hat(), 0.5 / 0.9, 1e-15);
  EXPECT_EQ(once.k, 1u);

  const auto same = kappa_hat_step(s, 0, rates(0.9, 1.2));
  EXPECT_NEAR(same.kappa_hat(), 1.0, 1e-15);

  const auto twice = kappa_hat_step(kappa_hat_step(s, 1, p), 1, p);
  EXPECT_NEAR(twice.kappa_hat(), 16.0 / 9.0, 1e-14);
}

TEST(KappaHat, ZeroRateIsAbsorbing) {
  const auto p = rates(0.0, 1.2);
  auto s = kappa_hat_step(make_exponential_state(0.9, 2.0), 0, p);
  EXPECT_EQ(s.kappa_hat(), 0.0);
  s = kappa_hat_step(s, 1, p);
  EXPECT_EQ(s.kappa_hat(), 0.0);
}

TEST(KappaHat, InvalidTargetsRejected) {
  EXPECT_THROW(make_exponential_state(1.0, 2.0), ParameterError);
  EXPECT_THROW(make_exponential_state(0.9, 0.5), ParameterError);
  EXPECT_THROW(make_practical_state(0.0, 1.0), ParameterError);
}

TEST(AdmissibleModes, Examples) {
  const auto p = rates(0.5, 1.2);
  auto s = make_exponential_state(0.9, 2.0);
  EXPECT_EQ(admissible_modes(s, p), (std::vector<ModeId>{0, 1}));

  s = kappa_hat_step(kappa_hat_step(s, 1, p), 1, p);
  EXPECT_EQ(admissible_modes(s, p), (std::vector<ModeId>{0}));

  auto generous = make_exponential_state(0.9, 1e9);
  generous = kappa_hat_step(generous, 1, p);
  EXPECT_EQ(admissible_modes(generous, p), (std::vector<ModeId>{0, 1}));
}

TEST(GreedyPolicy, Examples) {
  const auto p = rates(0.5, 1.2);
  const auto pref = default_preference(p);
  auto s = make_exponential_state(0.9, 2.0);
  EXPECT_EQ(greedy_policy(s, p, pref), 1u);
  s = kappa_hat_step(kappa_hat_step(s, 1, p), 1, p);
  EXPECT_EQ(greedy_policy(s, p, pref), 0u);

  AbstractionParams three;
  three.rho = {{0, 0.5}, {1, 0.6}, {2, 0.7}};
  const Preference flat{{0, 0}, {1, 0}, {2, 0}};
  EXPECT_EQ(greedy_policy(make_exponential_state(0.9, 2.0), three, flat), 0u);
  const Preference skip_first{{0, 0}, {1, 5}, {2, 5}};
  EXPECT_EQ(greedy_policy(make_exponential_state(0.9, 2.0), three, skip_first), 1u);
}

TEST(GreedyPolicy, EmptySetGivesNothing) {
  const auto p = rates(0.95, 1.2);
  auto s = make_exponential_state(0.9, 1.0);
  s = kappa_hat_step(s, 1, p);
  EXPECT_TRUE(admissible_modes(s, p).empty());
  EXPECT_FALSE(greedy_policy(s, p, default_preference(p)));
}

TEST(PracticalStep, Examples) {
  const auto p = rates(0.5, 1.2);
  const auto a = practical_step(make_practical_state(2.0, 1.0), 0, 0.4, p);
  EXPECT_TRUE(a.admissible);
  EXPECT_NEAR(*a.state.v_bar, 0.9, 1e-15);

  const auto b = practical_step(make_practical_state(2.0, 1.8), 1, 0.0, p);
  EXPECT_FALSE(b.admissible);
  EXPECT_NEAR(*b.state.v_bar, 2.16, 1e-15);

  const auto c = practical_step(make_practical_state(2.0, 2.0), 0, 0.0, rates(1.0, 1.0));
  EXPECT_TRUE(c.admissible);
  EXPECT_THROW(practical_step(make_practical_state(2.0, 1.0), 0, -0.1, p), ParameterError);
}

TEST(Supervisor, Examples) {
  const auto p = rates(0.5, 1.2);
  EXPECT_FALSE(supervisor_check(make_exponential_state(0.9, 2.0), p).alarm);

  ScheduleRunOptions opt;
  opt.steps = 6;
  opt.forced = {1, 1, 1, 1, 1, 1};
  const auto recs = run_schedule(make_exponential_state(0.9, 2.0), p,
                                 make_greedy_policy(default_preference(p)), opt);
  // kappa_hat after two forced skips is 1.78, after three 2.37 > 2
  std::size_t first = recs.size();
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (recs[i].alarm) {
      first = i;
      break;
    }
  EXPECT_EQ(first, 3u);
  EXPECT_EQ(recs[3].alarm_reason, "quality-of-control invariant violated");
  for (std::size_t i = 3; i < recs.size(); ++i) EXPECT_EQ(recs[i].chosen, 0u);

  auto prac = make_practical_state(2.0, 1.5);
  const auto spike = supervisor_check(prac, p, 5.0);
  EXPECT_TRUE(spike.alarm);
  EXPECT_EQ(spike.reason, "no admissible mode");
  EXPECT_EQ(spike.threshold, 2.0);
  EXPECT_EQ(spike.value, 1.5);
}

TEST(Supervisor, PayloadCarriesStepAndThreshold) {
  const auto p = rates(0.5, 1.2);
  auto s = make_exponential_state(0.9, 1.5);
  s = kappa_hat_step(kappa_hat_step(s, 1, p), 1, p);
  const auto r = supervisor_check(s, p);
  EXPECT_TRUE(r.alarm);
  EXPECT_EQ(r.step, 2u);
  EXPECT_NEAR(r.value, 16.0 / 9.0, 1e-14);
  EXPECT_EQ(r.threshold, 1.5);
}

TEST(RunSchedule, GenerousTargetSkipsOften) {
  const auto p = rates(0.5, 1.2);
  ScheduleRunOptions opt;
  opt.steps = 200;
  const auto recs = run_schedule(make_exponential_state(0.9, 10.0), p,
                                 make_greedy_policy(default_preference(p)), opt);
  std::size_t skips = 0;
  for (const auto& r : recs) {
    EXPECT_FALSE(r.alarm);
    skips += r.chosen;
  }
  EXPECT_GT(skips, 60u);
}

TEST(RunSchedule, TightTargetNeverSkips) {
  const auto p = rates(0.6, 1.3);
  ScheduleRunOptions opt;
  opt.steps = 50;
  for (const auto& r : run_schedule(make_exponential_state(0.6, 1.0), p,
                                    make_greedy_policy(default_preference(p)), opt)) {
    EXPECT_EQ(r.chosen, 0u);
    EXPECT_FALSE(r.alarm);
  }
}

TEST(RunSchedule, SoundnessOnRandomRuns) {
  gen::Rng rng(71);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = gen::index(rng, 1, 4);
    const auto sys = gen::two_mode_system(rng, n);
    const auto p = build_robustness_abstraction(sys, gen::valid_rho(rng, sys.nominal()));
    const double rho_hat = gen::uniform(rng, p.rate(0), 0.999);
    const double alpha_hat = gen::uniform(rng, 1.0, 20.0);
    ScheduleRunOptions opt;
    opt.steps = 300;
    const Policy policy = t % 3 == 0   ? make_greedy_policy(default_preference(p))
                          : t % 3 == 1 ? make_round_robin_policy()
                                       : make_random_policy(static_cast<std::uint64_t>(t));
    const auto recs = run_schedule(make_exponential_state(rho_hat, alpha_hat), p, policy, opt);
    ModeSequence seq;
    for (const auto& r : recs) {
      ASSERT_FALSE(r.alarm);
      seq.push_back(r.chosen);
    }
    for (std::size_t k = 0; k <= seq.size(); ++k) {
      const double env = alpha_hat * std::pow(rho_hat, static_cast<double>(k));
      ASSERT_LE(kappa(p, seq, 0, k), env * (1.0 + 1e-9)) << "trial " << t << " k " << k;
    }
  }
}

TEST(RunSchedule, StaticMkPatternIsNeverRejected) {
  // A worst-case (m,K) pattern with rho_tilde <= rho_hat and alpha_tilde <= alpha_hat
  // stays inside the gate at every step.
  gen::Rng rng(72);
  for (int t = 0; t < 200; ++t) {
    const double r0 = gen::uniform(rng, 0.1, 0.9);
    const double r1 = r0 * gen::uniform(rng, 1.0, 3.0);
    const auto mk = gen::mk(rng, 8);
    const auto p = rates(r0, r1);
    const double rt = mk_rho_tilde(r0, r1, mk);
    if (!(rt < 1.0)) continue;
    const double rho_hat = std::max(rt, r0 * (1.0 + 1e-12));
    if (!(rho_hat < 1.0)) continue;
    const double alpha_hat = mk_alpha_tilde(r0, r1, mk);
    auto s = make_exponential_state(rho_hat, alpha_hat);
    for (ModeId m : worst_case_sequence(mk, 5 * mk.K())) {
      const auto adm = admissible_modes(s, p);
      ASSERT_NE(std::find(adm.begin(), adm.end(), m), adm.end())
          << mk.to_string() << " step " << s.k;
      s = kappa_hat_step(s, m, p);
    }
  }
}

TEST(RunSchedule, PracticalModeKeepsBound) {
  gen::Rng rng(73);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = gen::index(rng, 1, 3);
    const double w_bar = gen::uniform(rng, 0.0, 0.1);
    const auto sys = gen::two_mode_system(rng, n, w_bar);
    const auto p = build_robustness_abstraction(sys, gen::valid_rho(rng, sys.nominal()));
    const Vector x0 = gen::vector(rng, n);
    const double v0 = p.alpha * norm2(x0);
    const double C = std::max(v0, p.beta * w_bar / (1.0 - p.rate(0))) * gen::uniform(rng, 1.05, 3.0);
    ScheduleRunOptions opt;
    opt.steps = 200;
    opt.w_bar = {w_bar};
    const auto recs = run_schedule(make_practical_state(C, v0), p,
                                   make_greedy_policy(default_preference(p)), opt);
    ModeSequence seq;
    for (const auto& r : recs) {
      ASSERT_FALSE(r.alarm) << "trial " << t;
      ASSERT_LE(*r.vbar, C);
      seq.push_back(r.chosen);
    }
    const auto trace = co_simulate(sys, p, seq,
                                   DisturbanceSpec::random(static_cast<std::uint64_t>(t), w_bar),
                                   x0, seq.size());
    for (const auto& row : trace.rows) ASSERT_LE(row.x_norm, C * (1.0 + 1e-9));
  }
}

TEST(RunSchedule, Deterministic) {
  const auto p = rates(0.5, 1.2);
  ScheduleRunOptions opt;
  opt.steps = 100;
  std::ostringstream a, b;
  write_schedule_csv(a, run_schedule(make_exponential_state(0.9, 3.0), p, make_random_policy(5), opt));
  write_schedule_csv(b, run_schedule(make_exponential_state(0.9, 3.0), p, make_random_policy(5), opt));
  EXPECT_EQ(a.str(), b.str());
}

TEST(ScheduleCsv, ColumnContract) {
  const auto p = rates(0.5, 1.2);
  ScheduleRunOptions opt;
  opt.steps = 2;
  std::ostringstream os;
  write_schedule_csv(os, run_schedule(make_exponential_state(0.9, 2.0), p,
                                      make_greedy_policy(default_preference(p)), opt));
  EXPECT_EQ(os.str(),
            "k,chosen_sigma,admissible_set,kappa_hat,vbar,alarm\n"
            "0,1,0;1,1,,0\n"
            "1,1,0;1,1.3333333333333333,,0\n");
}
