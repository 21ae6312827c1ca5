#ifndef HARMONIC_LADDER_HPP
#define HARMONIC_LADDER_HPP

// Lattice random walks with negative drift: Cramér root, exponential tilt,
// strict descending ladder heights, the ladder renewal mass function and the
// two representations of the harmonic function of the walk killed on leaving
// the nonnegative integers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "harmonic/errors.hpp"
#include "harmonic/kernel.hpp"

namespace harmonic {

/// Jump law on offsets [-lo, hi] of a random walk on Z.
class LatticeWalk {
 public:
  static constexpr double kSumTolerance = 1e-12;

  LatticeWalk(int lo, std::vector<double> pmf) : lo_(lo), pmf_(std::move(pmf)) {
    if (lo_ < 0) throw InvalidArgument("walk: lo must be >= 0");
    if (pmf_.empty() || static_cast<int>(pmf_.size()) < lo_ + 1)
      throw InvalidArgument("walk: pmf must cover offsets -lo..0 at least");
    double s = 0.0;
    for (double p : pmf_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("walk: negative or non-finite probability");
      s += p;
    }
    if (std::abs(s - 1.0) > kSumTolerance)
      throw InvalidArgument("walk: probabilities sum to " + std::to_string(s) + ", expected 1");
  }

  static LatticeWalk from_map(const std::map<int, double>& law) {
    if (law.empty()) throw InvalidArgument("walk: empty law");
    const int lo = std::max(0, -law.begin()->first);
    const int hi = std::max(0, law.rbegin()->first);
    std::vector<double> pmf(static_cast<std::size_t>(lo + hi + 1), 0.0);
    for (auto [d, p] : law) pmf[static_cast<std::size_t>(d + lo)] += p;
    return LatticeWalk(lo, std::move(pmf));
  }

  int lo() const noexcept { return lo_; }
  int hi() const noexcept { return static_cast<int>(pmf_.size()) - 1 - lo_; }
  const std::vector<double>& pmf() const noexcept { return pmf_; }

  double prob(int offset) const {
    if (offset < -lo_ || offset > hi()) return 0.0;
    return pmf_[static_cast<std::size_t>(offset + lo_)];
  }

  /// E xi^k e^{s xi}
  double moment(int k, double s = 0.0) const {
    double acc = 0.0;
    for (int d = -lo_; d <= hi(); ++d) {
      const double p = prob(d);
      if (p > 0.0) acc += std::pow(static_cast<double>(d), k) * std::exp(s * d) * p;
    }
    return acc;
  }

  double mean() const { return moment(1); }
  double mgf(double s) const { return moment(0, s); }

  int max_up() const {
    for (int d = hi(); d > 0; --d)
      if (prob(d) > 0.0) return d;
    return 0;
  }
  int max_down() const {
    for (int d = -lo_; d < 0; ++d)
      if (prob(d) > 0.0) return -d;
    return 0;
  }

  /// gcd of the support offsets; 1 for aperiodic lattice walks.
  int span() const {
    int g = 0;
    for (int d = -lo_; d <= hi(); ++d)
      if (prob(d) > 0.0) g = std::gcd(g, std::abs(d));
    return g;
  }

  /// Law of -xi.
  LatticeWalk reflected() const {
    std::vector<double> r(pmf_.rbegin(), pmf_.rend());
    return LatticeWalk(hi(), std::move(r));
  }

 private:
  int lo_;
  std::vector<double> pmf_;
};

/// Positive root of E e^{beta xi} = 1 for a walk with negative mean.
inline double cramer_root(const LatticeWalk& walk, double tol = 1e-13) {
  if (!(walk.mean() < 0.0)) throw InvalidArgument("cramer_root: walk mean must be negative");
  const int up = walk.max_up();
  if (up == 0) throw NoCramerRoot("cramer_root: no positive jumps, E e^{beta xi} < 1 for all beta > 0");
  const double overflow_bound = 700.0 / up;
  auto g = [&](double s) { return walk.mgf(s) - 1.0; };
  double hi = 1.0;
  while (g(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > overflow_bound) throw NoCramerRoot("cramer_root: root exceeds the overflow-safe bound");
  }
  // g is convex with g(0)=0 and g'(0)<0: its minimizer is a valid left end.
  double lo = 0.0;
  {
    double a = 0.0, b = hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (walk.moment(1, mid) < 0.0) a = mid; else b = mid;
    }
    lo = a;
  }
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (g(mid) <= 0.0) lo = mid; else hi = mid;
  }
  const double beta = std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;
  if (std::abs(g(beta)) > tol)
    throw ConvergenceError(std::abs(g(beta)), "cramer_root: tolerance not reached");
  return beta;
}

/// Law e^{beta j} P{xi = j}; beta must be the Cramér root (or 0).
inline LatticeWalk tilt_walk(const LatticeWalk& walk, double beta) {
  std::vector<double> p = walk.pmf();
  double s = 0.0;
  for (int d = -walk.lo(); d <= walk.hi(); ++d) {
    auto& w = p[static_cast<std::size_t>(d + walk.lo())];
    w *= std::exp(beta * d);
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-10)
    throw ConsistencyError("tilt_walk: tilted mass " + std::to_string(s) + " is not 1; beta is not the Cramér root");
  for (double& w : p) w /= s;
  return LatticeWalk(walk.lo(), std::move(p));
}

/// Strict descending ladder data: chi[x] = P{chi_1 = x} for x = 1..lo
/// (chi[0] = 0), defect = P{tau_1 = infinity}, u = renewal mass function.
struct LadderData {
  std::vector<double> chi;
  double defect = 0.0;
  std::vector<double> u;
  /// Bound on ladder mass not yet harvested when the iteration stopped.
  double residual_bound = 0.0;
  /// Mass trimmed from negligible top levels of the alive measure.
  double trimmed_mass = 0.0;
  int iterations = 0;

  int max_height() const { return static_cast<int>(chi.size()) - 1; }
  /// E e^{-s chi_1; chi_1 < infinity}
  double laplace(double s) const {
    double acc = 0.0;
    for (int x = 1; x <= max_height(); ++x) acc += std::exp(-s * x) * chi[static_cast<std::size_t>(x)];
    return acc;
  }
};

/// Law of -S_tau, tau = min{n >= 1 : S_n < 0}, by iterating the sub-probability
/// measure of the walk kept on Z+. For walks with positive drift the not yet
/// harvested mass is bounded by sum_x alive(x) e^{-theta (x+1)} where theta is
/// the Cramér root of -xi.
inline LadderData ladder_height(const LatticeWalk& walk, double mass_tol = 1e-13,
                                int max_iter = 2'000'000) {
  const int L = walk.max_down();
  const int U = walk.max_up();
  LadderData out;
  out.chi.assign(static_cast<std::size_t>(std::max(L, 0) + 1), 0.0);
  if (L == 0) {
    out.defect = 1.0;
    return out;
  }
  const double mean = walk.mean();
  double theta = 0.0;
  if (mean > 0.0) theta = cramer_root(walk.reflected());

  std::vector<double> alive{1.0}, next;
  const double trim_eps = mass_tol * 1e-4;
  for (int it = 1; it <= max_iter; ++it) {
    next.assign(alive.size() + static_cast<std::size_t>(U), 0.0);
    for (std::size_t x = 0; x < alive.size(); ++x) {
      const double a = alive[x];
      if (a == 0.0) continue;
      for (int d = -L; d <= U; ++d) {
        const double p = walk.prob(d);
        if (p == 0.0) continue;
        const long y = static_cast<long>(x) + d;
        if (y < 0) out.chi[static_cast<std::size_t>(-y)] += a * p;
        else next[static_cast<std::size_t>(y)] += a * p;
      }
    }
    // trim negligible mass at the top
    double top = 0.0;
    while (!next.empty() && top + next.back() < trim_eps && next.size() > 1) {
      top += next.back();
      next.pop_back();
    }
    out.trimmed_mass += top;
    alive.swap(next);
    out.iterations = it;

    const double total = std::accumulate(alive.begin(), alive.end(), 0.0);
    if (mean < 0.0) {
      if (total < mass_tol) {
        out.residual_bound = total;
        break;
      }
    } else if (mean > 0.0) {
      double bound = 0.0;
      for (std::size_t x = 0; x < alive.size(); ++x) bound += alive[x] * std::exp(-theta * (static_cast<double>(x) + 1.0));
      if (bound < mass_tol) {
        out.residual_bound = bound;
        break;
      }
    }
    if (it == max_iter)
      throw ConvergenceError(total, "ladder_height: iteration cap reached with alive mass " + std::to_string(total));
  }
  const double harvested = std::accumulate(out.chi.begin(), out.chi.end(), 0.0);
  out.defect = std::clamp(1.0 - harvested, 0.0, 1.0);
  return out;
}

/// u(j) = sum_k P{chi_1 + ... + chi_k = j}, j = 0..J.
inline std::vector<double> renewal_mass(const LadderData& ladder, int J) {
  if (J < 0) throw InvalidArgument("renewal_mass: J must be >= 0");
  std::vector<double> u(static_cast<std::size_t>(J + 1), 0.0);
  u[0] = 1.0;
  const int L = ladder.max_height();
  for (int j = 1; j <= J; ++j) {
    double s = 0.0;
    for (int x = 1; x <= std::min(j, L); ++x)
      s += ladder.chi[static_cast<std::size_t>(x)] * u[static_cast<std::size_t>(j - x)];
    u[static_cast<std::size_t>(j)] = s;
  }
  return u;
}

/// Ladder heights with the renewal mass function filled up to J.
inline LadderData ladder_with_renewal(const LatticeWalk& walk, int J, double mass_tol = 1e-13) {
  LadderData d = ladder_height(walk, mass_tol);
  d.u = renewal_mass(d, J);
  return d;
}

/// log of sum_{j<=i} e^{beta(i-j)} u(j).
inline double log_doney_harmonic(const LadderData& ladder, double beta, int i) {
  if (i < 0 || i >= static_cast<int>(ladder.u.size()))
    throw RangeError("doney_harmonic: renewal mass function not computed up to " + std::to_string(i));
  double s = 0.0;
  for (int j = 0; j <= i; ++j) s += std::exp(-beta * j) * ladder.u[static_cast<std::size_t>(j)];
  return beta * i + std::log(s);
}

/// Harmonic function of the walk killed on leaving Z+, as a ladder renewal sum.
/// `ladder` must belong to the untilted walk.
inline double doney_harmonic(const LadderData& ladder, double beta, int i) {
  return std::exp(log_doney_harmonic(ladder, beta, i));
}

/// Both ladder structures of a negative-drift walk and its Cramér tilt.
struct KilledWalkAnalysis {
  LatticeWalk walk;
  LatticeWalk tilted;
  double beta;
  LadderData original;         // ladder of the walk, with u
  LadderData tilted_ladder;    // ladder of the tilted walk, with u

  /// 1 - E e^{-beta chi_1}, from the original ladder.
  double multiplier() const { return 1.0 - original.laplace(beta); }
  /// P{tau_1 = infinity} of the tilted walk, from its own ladder.
  double tilted_defect() const { return tilted_ladder.defect; }

  /// P{min_n S^(beta)_n >= -i} from the tilted ladder renewal function.
  double min_survival(int i) const {
    check(i);
    double s = 0.0;
    for (int l = 0; l <= i; ++l) s += tilted_ladder.u[static_cast<std::size_t>(l)];
    return tilted_ladder.defect * s;
  }

  /// Same probability from the untilted ladder: P{min = -l} = defect e^{-beta l} u(l).
  double min_survival_via_original(int i) const {
    check(i);
    double s = 0.0;
    for (int l = 0; l <= i; ++l) s += std::exp(-beta * l) * original.u[static_cast<std::size_t>(l)];
    return multiplier() * s;
  }

  double log_tilted_min_harmonic(int i) const { return beta * i + std::log(min_survival(i)); }
  double tilted_min_harmonic(int i) const { return std::exp(log_tilted_min_harmonic(i)); }
  double doney(int i) const { return doney_harmonic(original, beta, i); }

 private:
  void check(int i) const {
    if (i < 0 || i >= static_cast<int>(original.u.size()) || i >= static_cast<int>(tilted_ladder.u.size()))
      throw RangeError("killed walk analysis computed only up to " + std::to_string(original.u.size() - 1));
  }
};

inline KilledWalkAnalysis analyze_killed_walk(const LatticeWalk& walk, int J, double mass_tol = 1e-13) {
  const double beta = cramer_root(walk);
  LatticeWalk tilted = tilt_walk(walk, beta);
  LadderData orig = ladder_with_renewal(walk, J, mass_tol);
  LadderData til = ladder_with_renewal(tilted, J, mass_tol);
  return KilledWalkAnalysis{walk, std::move(tilted), beta, std::move(orig), std::move(til)};
}

/// e^{beta i} P{min_n S^(beta)_n >= -i}; both ladder routes are evaluated and
/// must agree to 1e-8 relative.
inline double tilted_min_harmonic(const LatticeWalk& walk, double beta, int i) {
  KilledWalkAnalysis a = analyze_killed_walk(walk, i);
  if (std::abs(a.beta - beta) > 1e-9 * std::max(1.0, beta))
    throw InvalidArgument("tilted_min_harmonic: beta is not the Cramér root of the walk");
  const double direct = a.min_survival(i);
  const double via = a.min_survival_via_original(i);
  if (std::abs(direct - via) > 1e-8 * std::max(direct, 1e-300))
    throw ConsistencyError("tilted_min_harmonic: ladder routes disagree");
  return std::exp(beta * i) * direct;
}

struct EquivalenceMultiplier {
  double value;          // 1 - E e^{-beta chi_1}
  double tilted_defect;  // P{tau_1^(beta) = infinity}
};

/// Proportionality constant between the tilted-minimum and ladder-renewal
/// harmonic functions, computed twice.
inline EquivalenceMultiplier equivalence_multiplier(const LatticeWalk& walk, double beta, double tol = 1e-8) {
  if (!(beta > 0.0)) throw InvalidArgument("equivalence_multiplier: beta must be positive");
  const LadderData orig = ladder_height(walk);
  const LadderData til = ladder_height(tilt_walk(walk, beta));
  EquivalenceMultiplier m{1.0 - orig.laplace(beta), til.defect};
  if (std::abs(m.value - m.tilted_defect) > tol)
    throw ConsistencyError("equivalence_multiplier: 1 - E e^{-beta chi} = " + std::to_string(m.value) +
                           " but tilted defect = " + std::to_string(m.tilted_defect));
  return m;
}

/// Kernel of the walk killed on leaving Z+ (jumps below 0 removed).
inline TransitionKernel killed_walk_kernel(const LatticeWalk& walk) {
  const int lo = walk.lo();
  const int hi = walk.hi();
  std::vector<Row> rows;
  for (int i = 0; i < lo; ++i) {
    Row r = walk.pmf();
    for (int d = -lo; d < -i; ++d) r[static_cast<std::size_t>(d + lo)] = 0.0;
    rows.push_back(std::move(r));
  }
  return TransitionKernel(lo, hi, std::move(rows), TailRule::homogeneous(walk.pmf()));
}

}  // namespace harmonic

#endif  // HARMONIC_LADDER_HPP
