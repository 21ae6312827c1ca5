#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "harmonic/chain.hpp"
#include "harmonic/harmonic.hpp"
#include "harmonic/ladder.hpp"
#include "harmonic/stationary.hpp"

using namespace harmonic;

namespace {

const LatticeWalk kPm(1, {0.7, 0.0, 0.3});
const double kBeta = std::log(7.0 / 3.0);

std::vector<int> sample_states(int lo, int hi, int step) {
  std::vector<int> v;
  for (int i = lo; i <= hi; i += step) v.push_back(i);
  return v;
}

// Shared solves; the K = 4000 chains take a few hundredths of a second each.
struct Solved {
  ChainFamily chain;
  StationaryResult st;
  int K;
};

const Solved& lindley() {
  static const Solved s{lindley_chain(kPm), stationary_solve(lindley_chain(kPm), 400), 400};
  return s;
}
const Solved& example3() {
  static const Solved s{alternating_chain(0.3, 0.7, 0.05), stationary_solve(alternating_chain(0.3, 0.7, 0.05), 4000), 4000};
  return s;
}
const Solved& power_drift() {
  static const Solved s{power_drift_chain(0.3, 0.05, 0.6), stationary_solve(power_drift_chain(0.3, 0.05, 0.6), 4000), 4000};
  return s;
}

double total_variation(const Row& a, const Row& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

}  // namespace

TEST(StationarySolve, LindleyGeometric) {
  const StationaryResult& st = lindley().st;
  for (int i = 0; i <= 400; ++i) {
    const double expect = std::log(4.0 / 7.0) + i * std::log(3.0 / 7.0);
    EXPECT_NEAR(std::expm1(st.log_pi[static_cast<std::size_t>(i)] - expect), 0.0, 1e-10) << i;
  }
  EXPECT_LE(st.doubling_difference, 1e-8);
  EXPECT_LE(st.normalization_error, 1e-12);
  EXPECT_LE(st.residual, 1e-10);
  EXPECT_NEAR(st.pi(3), (4.0 / 7.0) * std::pow(3.0 / 7.0, 3), 1e-14);
  EXPECT_THROW(st.pi(401), RangeError);
}

TEST(StationarySolve, PointMassAtZero) {
  std::vector<Row> rows;
  for (int i = 0; i <= 5; ++i) {
    Row r(6, 0.0);
    r[static_cast<std::size_t>(5 - i)] = 1.0;  // jump to 0
    rows.push_back(r);
  }
  const StationaryResult st = stationary_solve_kernel(StochasticKernel(TransitionKernel(5, 0, rows)));
  EXPECT_NEAR(st.pi(0), 1.0, 1e-15);
  for (int i = 1; i <= 5; ++i) EXPECT_EQ(st.pi(i), 0.0);
}

TEST(StationarySolve, Errors) {
  EXPECT_THROW(stationary_solve(lindley_chain(LatticeWalk(1, {0.3, 0.0, 0.7})), 100), DomainError);
  EXPECT_THROW(stationary_solve(lindley_chain(kPm), 0), InvalidArgument);
}

TEST(BirthDeath, ConstantRatesAreGeometric) {
  const auto lp = birth_death_closed_form([](int) { return 0.3; }, [](int) { return 0.7; }, 50);
  for (int i = 0; i <= 50; ++i) EXPECT_NEAR(lp[static_cast<std::size_t>(i)], std::log(4.0 / 7.0) + i * std::log(3.0 / 7.0), 1e-12);
}

TEST(BirthDeath, SureStepFromZeroMatchesSolver) {
  const int K = 60;
  std::vector<Row> rows{{0.0, 0.0, 1.0}};
  for (int i = 1; i < K; ++i) rows.push_back({0.6, 0.0, 0.4});
  rows.push_back({0.6, 0.4, 0.0});
  const StationaryResult st = stationary_solve_kernel(StochasticKernel(TransitionKernel(1, 1, rows)));
  const auto lp = birth_death_closed_form([K](int i) { return i == 0 ? 1.0 : (i < K ? 0.4 : 0.0); },
                                          [](int) { return 0.6; }, K);
  for (int i = 0; i <= K; ++i) EXPECT_NEAR(std::expm1(st.log_pi[static_cast<std::size_t>(i)] - lp[static_cast<std::size_t>(i)]), 0.0, 1e-10);
  EXPECT_THROW(birth_death_closed_form(lindley_chain(LatticeWalk::from_map({{-2, 0.5}, {1, 0.5}})), 10), UnsupportedInput);
}

TEST(StationarySolve, Example3MatchesBirthDeath) {
  const Solved& s = example3();
  const auto lp = birth_death_closed_form(s.chain, s.K);
  double worst = 0.0;
  for (int i = 0; i <= s.K; ++i)
    worst = std::max(worst, std::abs(std::expm1(s.st.log_pi[static_cast<std::size_t>(i)] - lp[static_cast<std::size_t>(i)])));
  EXPECT_LE(worst, 1e-10);
}

TEST(TailExtract, LindleyConstant) {
  const TailModel m = build_beta_fn(lindley().chain, TailModel::Mode::constant);
  EXPECT_NEAR(m.beta, kBeta, 1e-12);
  EXPECT_TRUE(m.hypotheses_verified);
  const TailFit f = tail_extract(lindley().st, m, 200, 300, 1e-8);
  EXPECT_NEAR(f.c, 4.0 / 7.0, 1e-9);
  EXPECT_LE(f.variation, 1e-8);
  EXPECT_TRUE(f.passed);
}

TEST(TailExtract, ExactExponentialGivesOne) {
  StationaryResult st;
  st.K = 100;
  for (int i = 0; i <= 100; ++i) st.log_pi.push_back(-0.5 * i);
  const TailFit f = tail_extract(st, [](int i) { return 0.5 * i; }, 10, 90, 1e-12);
  EXPECT_NEAR(f.c, 1.0, 1e-14);
  EXPECT_LE(f.variation, 1e-13);
  EXPECT_THROW(tail_extract(st, [](int i) { return 0.5 * i; }, 50, 101, 1e-3), RangeError);
}

TEST(TailExtract, Example3ConvergesWithinOnePercent) {
  const TailModel m = build_beta_fn(example3().chain, TailModel::Mode::constant);
  EXPECT_NEAR(m.beta, kBeta, 1e-12);
  EXPECT_FALSE(m.hypotheses_verified);  // tabulated perturbation, summability not certified
  const TailFit f = tail_extract(example3().st, m, 2000, 3000, 0.01);
  EXPECT_GT(f.c, 0.0);
  EXPECT_LE(f.variation, 0.01);
}

TEST(TailExtract, PowerDriftNeedsCorrection) {
  const Solved& s = power_drift();
  const TailFit naive = tail_extract(s.st, build_beta_fn(s.chain, TailModel::Mode::constant), 2000, 3000, 0.01);
  EXPECT_GT(naive.variation, 0.01);
  EXPECT_FALSE(naive.passed);
  const TailModel corr = build_beta_fn(s.chain, TailModel::Mode::alpha_over_m);
  EXPECT_TRUE(corr.hypotheses_verified);
  const TailFit fixed = tail_extract(s.st, corr, 2000, 3000, 0.02);
  EXPECT_LE(fixed.variation, 0.02);
  EXPECT_TRUE(fixed.passed);
  BetaFnOptions o;
  o.order = 2;
  const TailFit second = tail_extract(s.st, build_beta_fn(s.chain, TailModel::Mode::cramer_series, o), 2000, 3000, 0.02);
  EXPECT_LE(second.variation, fixed.variation);
}

TEST(LogEnvelope, TopOfWindow) {
  for (const Solved* s : {&lindley(), &example3(), &power_drift()}) {
    const int top = 3 * s->K / 4;
    EXPECT_LE(std::abs(s->st.log_pi[static_cast<std::size_t>(top)] / top + kBeta), 0.05) << s->chain.name;
  }
}

TEST(BetaFn, PredictLogTailClosedForms) {
  const TailModel flat = build_beta_fn(lindley().chain, TailModel::Mode::constant);
  EXPECT_NEAR(predict_log_tail(flat, 37), -kBeta * 37, 1e-12);

  const ChainFamily& pd = power_drift().chain;
  const TailModel m1 = build_beta_fn(pd, TailModel::Mode::alpha_over_m);
  const double mean = m1.m[0];
  for (int i : {0, 1, 10, 500, 3000}) {
    const double a = (std::pow(1.0 + i, 0.4) - 1.0) / 0.4;
    EXPECT_NEAR(predict_log_tail(m1, i), -kBeta * i + 0.05 / mean * a, 1e-9 * std::max(1.0, kBeta * i));
  }
  EXPECT_NEAR(m1.beta_at(7.0), kBeta - 0.05 * std::pow(8.0, -0.6) / mean, 1e-14);

  BetaFnOptions o;
  o.order = 2;
  const TailModel m2 = build_beta_fn(pd, TailModel::Mode::cramer_series, o);
  ASSERT_EQ(m2.order(), 2);
  EXPECT_NEAR(m2.r[0], -1.0 / mean, 1e-14);
  for (int i : {1, 10, 500, 3000}) {
    const double extra = -m2.r[1] * 0.05 * 0.05 * (std::pow(1.0 + i, -0.2) - 1.0) / -0.2;
    EXPECT_NEAR(predict_log_tail(m2, i) - predict_log_tail(m1, i), extra, 1e-9);
  }
}

TEST(BetaFn, AlphaOverMeanCoefficient) {
  const TailModel m = build_beta_fn(power_drift().chain, TailModel::Mode::alpha_over_m);
  EXPECT_NEAR(m.m[0], 0.4, 1e-12);  // 0.7 - 0.3 after the tilt
  EXPECT_EQ(m.r[0], -1.0 / m.m[0]);
  // a limit law with tilted mean 2 halves the perturbation
  TailModel two = m;
  two.m = {2.0};
  two.r = cramer_coefficients(two.m, {}, 1);
  EXPECT_NEAR(two.beta_at(3.0), two.beta - two.alpha.at(3.0) / 2.0, 1e-15);
}

TEST(BetaFn, FittedExpansionIsFlagged) {
  // tabulated nearest-neighbour chain with a perturbation profile given as a table
  std::vector<Row> table;
  std::vector<double> alpha;
  const double k = 0.7 / 0.3 - 0.3 / 0.7;
  for (int i = 0; i <= 600; ++i) {
    const double a = 0.05 * std::pow(1.0 + i, -0.6);
    const double up = 0.3 + a / k;
    table.push_back(i == 0 ? Row{0.0, 1.0 - up, up} : Row{1.0 - up, 0.0, up});
    alpha.push_back(a);
  }
  table.push_back({0.7, 0.0, 0.3});
  ChainFamily f = tabulated_chain("table", 1, 1, table);
  f.perturbation = Perturbation::tabulated(alpha);
  BetaFnOptions o;
  o.order = 2;
  o.fit_to = 500;
  const TailModel m = build_beta_fn(f, TailModel::Mode::cramer_series, o);
  EXPECT_TRUE(m.d_fitted);
  EXPECT_FALSE(m.hypotheses_verified);
  EXPECT_FALSE(m.warning.empty());
  // the analytic coefficient for this family is (q/p + p/q) / k
  EXPECT_NEAR(m.d[0][0], (0.7 / 0.3 + 0.3 / 0.7) / k, 1e-6);
}

TEST(DoobTransform, ConstantOnStochasticIsIdentity) {
  const StochasticKernel p = lindley().chain.kernel(50);
  HarmonicEstimate one;
  one.values.assign(60, 1.0);
  const DoobResult d = doob_transform(p, one, -1);
  for (int i = 0; i < 55; ++i)
    for (int j = std::max(0, i - 1); j <= i + 1; ++j) EXPECT_NEAR(d.kernel.weight(i, j), p.weight(i, j), 1e-15);
  EXPECT_EQ(d.identity_rows, 0);
}

TEST(DoobTransform, RejectsNonHarmonic) {
  const StochasticKernel p = lindley().chain.kernel(50);
  HarmonicEstimate h;
  for (int i = 0; i < 60; ++i) h.values.push_back(1.0 + i);
  EXPECT_THROW(doob_transform(p, h, -1), NotHarmonicError);
}

// Walk killed on leaving Z+, written as the reflected chain killed at 0 and
// shifted by one, with h from the ladder representation.
TEST(DoobTransform, ConditionedWalkFromLadderHarmonic) {
  const int top = 200;
  const StochasticKernel p = lindley().chain.kernel(top + 5);
  const KilledWalkAnalysis a = analyze_killed_walk(kPm, top + 2);
  HarmonicEstimate h;
  h.values.push_back(0.0);
  for (int i = 1; i <= top + 2; ++i) h.values.push_back(a.doney(i - 1));
  const DoobResult d = doob_transform(p, h, 0);
  EXPECT_LE(d.max_row_deviation, 1e-10);
  EXPECT_EQ(d.identity_rows, 1);
  double mean = 0.0;
  d.kernel.for_each(top, [&](int j, double w) { mean += (j - top) * w; });
  EXPECT_NEAR(mean, kPm.moment(1, kBeta), 1e-12);
  EXPECT_NEAR(kPm.moment(1, kBeta), 0.4, 1e-12);
}

TEST(RenewalMeasure, HomogeneousStartFarAbove) {
  const StochasticKernel up(TransitionKernel(1, 1, {Row{0.0, 0.3, 0.7}}, TailRule::homogeneous({0.3, 0.0, 0.7})));
  std::vector<double> init(101, 0.0);
  init[100] = 1.0;
  const auto u = renewal_measure(up, init, 300);
  for (int i = 100; i <= 300; ++i) EXPECT_NEAR(u[static_cast<std::size_t>(i)], 2.5, 1e-9) << i;
}

TEST(RenewalMeasure, DeterministicStep) {
  const StochasticKernel step(TransitionKernel(0, 1, {Row{0.0, 1.0}}, TailRule::homogeneous({0.0, 1.0})));
  const std::vector<double> init{1.0};
  const auto u = renewal_measure(step, init, 50);
  for (double x : u) EXPECT_NEAR(x, 1.0, 1e-14);
}

TEST(GreenMeasure, ReachableAbsorbingStateIsRejected) {
  const TransitionKernel q(1, 1, {Row{0.0, 0.0, 1.0}, Row{0.0, 1.0, 0.0}}, TailRule::homogeneous({0.3, 0.0, 0.7}));
  const std::vector<double> init{1.0};
  EXPECT_THROW(green_measure(q, init, 10), SolverFailure);
  // the same absorbing row is harmless when unreachable
  const TransitionKernel r(1, 1, {Row{0.0, 1.0, 0.0}, Row{0.0, 0.0, 1.0}}, TailRule::homogeneous({0.0, 0.0, 1.0}));
  const std::vector<double> from_one{0.0, 1.0};
  const auto g = green_measure(r, from_one, 10);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_NEAR(g[5], 1.0, 1e-14);
}

// Regeneration identity, transform consistency and the second route to the
// constant, on the Lindley and Example-3 chains.
class RenewalIdentities : public ::testing::TestWithParam<int> {};

TEST_P(RenewalIdentities, HoldToOneInAMillion) {
  const Solved& s = GetParam() == 0 ? lindley() : example3();
  const int N = GetParam() == 0 ? 2 : 10;
  const int K = s.K;
  const std::vector<int> states = sample_states(N + 1, 3 * K / 4, K / 40);

  EXPECT_LE(regeneration_identity_error(s.chain.reflected_kernel(K), s.st, kBeta, N, states), 1e-6);

  const StochasticKernel p = s.chain.kernel(K + 400);
  SolveOptions so;
  so.doubling_check = false;
  const HarmonicEstimate h = tilted_killed_harmonic(p, kBeta, N, K + 400, 1e-9, so);
  EXPECT_LE(verify_harmonicity(tilt(p, 0.0, N), h, sample_states(N + 1, K + 400, 1)), 1e-8);

  const DoobResult d = doob_transform(p, h, N);
  EXPECT_LE(d.max_row_deviation, 1e-8);
  const TransformConsistency tc = transform_consistency(s.st, h, d.kernel, N, K, states);
  EXPECT_LE(tc.max_deviation, 1e-6);

  // jump law of the transformed chain against the tilted limit law
  const int top = 3 * K / 4;
  const Row limit = tilt_walk(s.chain.limit, kBeta).pmf();
  EXPECT_LE(total_variation(d.kernel.row(top), limit), 1e-3);

  const TailFit fit = tail_extract(s.st, build_beta_fn(s.chain, TailModel::Mode::constant), K / 2, top, 0.01);
  EXPECT_NEAR(renewal_tail_constant(tc.constant, s.chain.limit, kBeta) / fit.c, 1.0, GetParam() == 0 ? 1e-6 : 0.01);

  // conditioned walk: U -> 1 / E xi^ at the window top
  EXPECT_NEAR(tc.renewal[static_cast<std::size_t>(top)] * s.chain.limit.moment(1, kBeta), 1.0, 0.01);
}

INSTANTIATE_TEST_SUITE_P(Chains, RenewalIdentities, ::testing::Values(0, 1),
                         [](const auto& info) { return info.param == 0 ? "Lindley" : "Alternating"; });

TEST(KillLevel, LindleyNeedsNoKilling) {
  const KillLevelChoice k = select_kill_level(lindley().chain.kernel(400), kBeta, 10);
  EXPECT_TRUE(k.certified);
  EXPECT_EQ(k.N, 0);
  EXPECT_EQ(k.delta, 0.0);
}

TEST(KillLevel, ChoiceIsConsistent) {
  const KillLevelChoice k = select_kill_level(example3().chain.kernel(4000), kBeta, 20);
  EXPECT_GE(k.N, 0);
  EXPECT_LE(k.N, 20);
  EXPECT_EQ(k.certified, k.delta < 0.1 * k.gamma_available);
}
