#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "harmonic/harmonic.hpp"
#include "harmonic/kernel.hpp"
#include "harmonic/ladder.hpp"
#include "harmonic/rng.hpp"

using namespace harmonic;

namespace {

// +1 w.p. p, -1 w.p. 1-p, holding at 0 instead of stepping down.
StochasticKernel simple_walk(double p) {
  return StochasticKernel(TransitionKernel(1, 1, {Row{0.0, 1.0 - p, p}}, TailRule::homogeneous({1.0 - p, 0.0, p})));
}

Row random_row(std::mt19937_64& gen, int width) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Row r(static_cast<std::size_t>(width));
  double s = 0.0;
  for (double& x : r) s += (x = u(gen));
  for (double& x : r) x /= s;
  return r;
}

}  // namespace

TEST(TotalMass, Example1Rows) {
  const TransitionKernel q = example1_kernel(2.0, 0.7);
  EXPECT_DOUBLE_EQ(total_mass(q, 0), 2.0);
  EXPECT_NEAR(total_mass(q, 5), 1.0, 1e-15);
  EXPECT_NEAR(log_mass(q, 0), std::log(2.0), 1e-15);
}

TEST(TotalMass, StochasticKernelHasUnitRows) {
  const StochasticKernel p = simple_walk(0.3);
  for (int i = 0; i < 30; ++i) EXPECT_NEAR(total_mass(p, i), 1.0, 1e-15);
}

TEST(TotalMass, Errors) {
  const TransitionKernel finite(1, 1, {Row{0.0, 0.5, 0.5}, Row{0.5, 0.0, 0.0}});
  EXPECT_THROW(total_mass(finite, 2), RangeError);
  EXPECT_THROW(total_mass(finite, -1), RangeError);
  const TransitionKernel killed = kill(simple_walk(0.3), {1});
  EXPECT_NO_THROW(total_mass(killed, 0));
  const TransitionKernel dead(1, 1, {Row{0.0, 0.0, 0.0}}, TailRule::homogeneous({0.5, 0.0, 0.5}));
  EXPECT_THROW(total_mass(dead, 0), DegenerateRowError);
}

TEST(TransitionKernel, RejectsBadRows) {
  EXPECT_THROW(TransitionKernel(1, 1, {Row{0.0, -0.1, 1.1}}), InvalidArgument);
  EXPECT_THROW(TransitionKernel(1, 1, {Row{0.5, 0.5, 0.0}}), InvalidArgument);  // mass below 0
  EXPECT_THROW(TransitionKernel(1, 1, {Row{0.5, 0.5}}), InvalidArgument);
  EXPECT_THROW(TransitionKernel(1, 1, {Row{0.0, NAN, 1.0}}), InvalidArgument);
  EXPECT_THROW(StochasticKernel(TransitionKernel(0, 1, {Row{0.5, 0.6}})), InvalidArgument);
}

TEST(Embed, NormalizesRows) {
  const TransitionKernel q(1, 1, {Row{0.0, 0.0, 0.8}, Row{0.2, 0.0, 0.6}}, TailRule::homogeneous({0.2, 0.0, 0.6}));
  const StochasticKernel p = embed(q);
  EXPECT_NEAR(p.weight(1, 2), 0.75, 1e-15);
  EXPECT_NEAR(p.weight(1, 0), 0.25, 1e-15);
  EXPECT_NEAR(p.weight(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(p.weight(7, 8), 0.75, 1e-15);
}

TEST(Embed, Example1RowZero) {
  const StochasticKernel p = embed(example1_kernel(2.0, 0.7));
  EXPECT_DOUBLE_EQ(p.weight(0, 1), 1.0);
  EXPECT_NEAR(p.weight(3, 4), 0.7, 1e-15);
}

TEST(Embed, IdempotentOnStochastic) {
  const StochasticKernel p = simple_walk(0.3);
  const StochasticKernel e = embed(p.kernel());
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 12; ++j) EXPECT_DOUBLE_EQ(e.weight(i, j), p.weight(i, j));
}

TEST(Embed, UnitMassPropertyOnRandomKernels) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Row> rows;
    for (int i = 0; i < 40; ++i) {
      Row r = random_row(gen, 5);
      for (int d = -2; d < -i; ++d) r[static_cast<std::size_t>(d + 2)] = 0.0;
      const double s = scale(gen);
      for (double& x : r) x *= s;
      rows.push_back(r);
    }
    Row tail = random_row(gen, 5);
    for (double& x : tail) x *= scale(gen);
    const StochasticKernel p = embed(TransitionKernel(2, 2, rows, TailRule::homogeneous(tail)));
    for (int i = 0; i < 60; ++i) EXPECT_NEAR(total_mass(p, i), 1.0, 1e-12);
  }
}

TEST(Kill, OnlyUpJumpSurvives) {
  const TransitionKernel k = kill(simple_walk(0.3), {0});
  EXPECT_NEAR(total_mass(k, 1), 0.3, 1e-15);
  EXPECT_NEAR(total_mass(k, 5), 1.0, 1e-15);
}

TEST(Kill, EmptySetLeavesKernel) {
  const StochasticKernel p = simple_walk(0.3);
  const TransitionKernel k = kill(p, {});
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 12; ++j) EXPECT_DOUBLE_EQ(k.weight(i, j), p.weight(i, j));
}

TEST(Kill, BlockBelowLevel) {
  const int N = 4;
  std::vector<int> block;
  for (int i = 0; i <= N; ++i) block.push_back(i);
  const TransitionKernel k = kill(simple_walk(0.3), block);
  EXPECT_DOUBLE_EQ(k.weight(N + 1, N), 0.0);
  EXPECT_NEAR(k.weight(N + 1, N + 2), 0.3, 1e-15);
  EXPECT_NEAR(k.mass(N + 1), 0.3, 1e-15);
  EXPECT_THROW(kill(simple_walk(0.3), {-1}), InvalidArgument);
}

TEST(Kill, EmbedDefinedExactlyOnSurvivingRows) {
  // three-point chain where row 1 only jumps into the killed state 0
  const StochasticKernel p(TransitionKernel(1, 1, {Row{0.0, 0.5, 0.5}, Row{1.0, 0.0, 0.0}, Row{0.5, 0.0, 0.5}},
                                            TailRule::homogeneous({0.5, 0.0, 0.5})));
  const TransitionKernel k = kill(p, {0});
  EXPECT_THROW(embed(k), DegenerateRowError);
  const StochasticKernel e = embed(k, true);
  EXPECT_FALSE(e.in_domain(1));
  EXPECT_TRUE(e.in_domain(0));
  EXPECT_TRUE(e.in_domain(2));
  EXPECT_NEAR(total_mass(e, 2), 1.0, 1e-15);
}

TEST(Tilt, CramerTiltIsStochasticInInterior) {
  const double beta = std::log(7.0 / 3.0);
  const TransitionKernel t = tilt(simple_walk(0.3), beta, -1);
  for (int i = 1; i < 40; ++i) EXPECT_NEAR(t.mass(i), 1.0, 1e-12);
  EXPECT_NEAR(t.weight(3, 4), 0.7, 1e-12);
  EXPECT_NEAR(t.weight(3, 2), 0.3, 1e-12);
}

TEST(Tilt, KilledRowOne) {
  const TransitionKernel t = tilt(simple_walk(0.3), std::log(7.0 / 3.0), 0);
  EXPECT_NEAR(t.mass(1), 0.7, 1e-12);
}

TEST(Tilt, ZeroTiltIsIdentity) {
  const StochasticKernel p = simple_walk(0.3);
  const TransitionKernel t = tilt(p, 0.0, -1);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 12; ++j) EXPECT_DOUBLE_EQ(t.weight(i, j), p.weight(i, j));
}

TEST(Tilt, MassMatchesTruncatedMgfProperty) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ub(0.0, 1.5);
  std::uniform_int_distribution<int> un(-1, 6);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Row> rows;
    for (int i = 0; i < 12; ++i) {
      Row r = random_row(gen, 6);  // offsets -3..2
      for (int d = -3; d < -i; ++d) r[static_cast<std::size_t>(d + 3)] = 0.0;
      const double s = TransitionKernel::row_sum(r);
      for (double& x : r) x /= s;
      rows.push_back(r);
    }
    const StochasticKernel p(TransitionKernel(3, 2, rows, TailRule::homogeneous(rows.back())));
    const double beta = ub(gen);
    const int N = un(gen);
    const TransitionKernel t = tilt(p, beta, N);
    for (int i = 0; i < 20; ++i) {
      const Row r = p.row(i);
      double expect = 0.0;
      for (int d = -3; d <= 2; ++d)
        if (i + d > N) expect += std::exp(beta * d) * r[static_cast<std::size_t>(d + 3)];
      EXPECT_NEAR(t.mass(i), expect, 1e-12) << "trial " << trial << " i " << i;
    }
  }
}

TEST(Tilt, TinyWeightsAreDroppedAndRecorded) {
  const StochasticKernel p(TransitionKernel(1, 1, {Row{0.0, 1.0 - 1e-10, 1e-10}}, TailRule::homogeneous({0.5, 0.0, 0.5})));
  const TransitionKernel t = tilt(p, -12.0, -1);  // e^{-12} * 1e-10 < 1e-15
  EXPECT_DOUBLE_EQ(t.weight(0, 1), 0.0);
  EXPECT_GT(t.dropped_mass(), 0.0);
}

TEST(Apply, ConstantOnStochastic) {
  const StochasticKernel p = simple_walk(0.3);
  const std::function<double(int)> one = [](int) { return 1.0; };
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(apply(p.kernel(), one, i), 1.0, 1e-15);
}

TEST(Apply, Example1ClosedFormIsHarmonic) {
  const TransitionKernel q = example1_kernel(2.0, 0.7);
  // f(0) = 8, f(i) = 1 + 7 (3/7)^i
  const std::function<double(int)> f = [](int i) { return i == 0 ? 8.0 : 1.0 + 7.0 * std::pow(3.0 / 7.0, i); };
  for (int i = 0; i <= 20; ++i) EXPECT_NEAR(apply(q, f, i), f(i), 1e-12);
}

TEST(Apply, IdentityFunctionGivesDrift) {
  const StochasticKernel p = simple_walk(0.3);
  const std::function<double(int)> id = [](int j) { return static_cast<double>(j); };
  for (int i = 1; i < 20; ++i) EXPECT_NEAR(apply(p.kernel(), id, i), i + 0.3 - 0.7, 1e-12);
}

TEST(Apply, LinearProperty) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const TransitionKernel q = example1_kernel(2.0, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f(40), g(40), h(40);
    const double a = n(gen), b = n(gen);
    for (int j = 0; j < 40; ++j) {
      f[static_cast<std::size_t>(j)] = n(gen);
      g[static_cast<std::size_t>(j)] = n(gen);
      h[static_cast<std::size_t>(j)] = a * f[static_cast<std::size_t>(j)] + b * g[static_cast<std::size_t>(j)];
    }
    for (int i = 0; i < 38; ++i)
      EXPECT_NEAR(apply(q, std::span<const double>(h), i),
                  a * apply(q, std::span<const double>(f), i) + b * apply(q, std::span<const double>(g), i), 1e-10);
  }
}

TEST(Irreducible, Cases) {
  EXPECT_TRUE(irreducible(example1_kernel(2.0, 0.7), 50));
  const TransitionKernel up(0, 1, {Row{0.5, 0.5}}, TailRule::homogeneous({0.5, 0.5}));
  EXPECT_FALSE(irreducible(up, 10));
  const TransitionKernel killed = kill(simple_walk(0.3), {0});
  EXPECT_TRUE(irreducible(killed, 1, 50));
  EXPECT_FALSE(irreducible(killed, 0, 50));
}

TEST(StreamRng, DeterministicAndUniform) {
  StreamRng a(42, 7, 3), b(42, 7, 3), c(42, 7, 4);
  int differ = 0;
  double sum = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double x = a.uniform();
    ASSERT_EQ(x, b.uniform());
    if (x != c.uniform()) ++differ;
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
    sum += x;
  }
  EXPECT_GT(differ, 9990);
  EXPECT_NEAR(sum / 10000, 0.5, 0.02);
}
