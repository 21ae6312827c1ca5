#ifndef HARMONIC_CHAIN_HPP
#define HARMONIC_CHAIN_HPP

// Asymptotically homogeneous Markov chains on Z+ described by their per-state
// jump laws xi(i), together with the jump-law envelopes (stochastic minorant,
// majorant, down-jump majorant) used by the hypothesis checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "harmonic/errors.hpp"
#include "harmonic/kernel.hpp"
#include "harmonic/ladder.hpp"

namespace harmonic {

/// The perturbation alpha(x) = E e^{beta xi(x)} - 1 as a function of a real
/// argument, with exact integrals of its powers.
struct Perturbation {
  enum class Kind { none, power_law, tabulated };

  Kind kind = Kind::none;
  double scale = 0.0;     // power_law: alpha(x) = scale * (1 + x)^(-exponent)
  double exponent = 0.0;
  std::vector<double> table;  // tabulated: alpha(i), linear in between

  static Perturbation none() { return {}; }
  static Perturbation power_law(double scale, double exponent) {
    return {Kind::power_law, scale, exponent, {}};
  }
  static Perturbation tabulated(std::vector<double> values) {
    return {Kind::tabulated, 0.0, 0.0, std::move(values)};
  }

  bool analytic() const { return kind != Kind::tabulated; }

  double at(double x) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::power_law:
        return scale * std::pow(1.0 + x, -exponent);
      case Kind::tabulated: {
        if (x < 0.0 || x > static_cast<double>(table.size() - 1))
          throw RangeError("perturbation table does not cover x = " + std::to_string(x));
        const auto k = static_cast<std::size_t>(std::floor(x));
        if (k + 1 >= table.size()) return table.back();
        const double t = x - static_cast<double>(k);
        return (1.0 - t) * table[k] + t * table[k + 1];
      }
    }
    return 0.0;
  }

  /// |alpha'(x)|
  double derivative_magnitude(double x) const {
    if (kind == Kind::power_law) return std::abs(scale * exponent) * std::pow(1.0 + x, -exponent - 1.0);
    if (kind == Kind::none) return 0.0;
    const auto k = std::min(static_cast<std::size_t>(std::floor(std::max(x, 0.0))), table.size() - 2);
    return std::abs(table[k + 1] - table[k]);
  }

  /// integral_0^x alpha(y)^k dy
  double integral_power(int k, double x) const {
    if (x < 0.0) throw RangeError("perturbation integral needs x >= 0");
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::power_law: {
        const double e = 1.0 - k * exponent;
        const double c = std::pow(scale, k);
        if (std::abs(e) < 1e-14) return c * std::log1p(x);
        return c * (std::pow(1.0 + x, e) - 1.0) / e;
      }
      case Kind::tabulated: {
        // Gauss-Legendre 5 points per unit segment: exact for powers of a linear segment up to 9.
        static constexpr double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                            0.5384693101056831, 0.9061798459386640};
        static constexpr double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                              0.4786286704993665, 0.2369268850561891};
        double acc = 0.0;
        double a = 0.0;
        while (a < x) {
          const double b = std::min(std::floor(a) + 1.0, x);
          const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
          for (int q = 0; q < 5; ++q) acc += weights[q] * half * std::pow(at(mid + half * nodes[q]), k);
          a = b;
        }
        return acc;
      }
    }
    return 0.0;
  }
};

/// Markov chain on Z+ given by per-state jump laws. jump_pmf(i) is indexed by
/// offset + band_lo and puts no mass on offsets below -i.
struct ChainFamily {
  std::string name;
  int band_lo = 0;
  int band_hi = 0;
  std::function<Row(int)> jump_pmf;
  LatticeWalk limit;
  Perturbation perturbation;
  /// Analytic D_{k,j} of the moment expansion, when known: d[k-1][j-1].
  std::optional<std::vector<std::vector<double>>> moment_expansion;

  Row jump(int i) const {
    Row r = jump_pmf(i);
    if (r.size() != static_cast<std::size_t>(band_lo + band_hi + 1))
      throw InvalidArgument(name + ": jump pmf has the wrong width at state " + std::to_string(i));
    double s = 0.0;
    for (int k = 0; k < static_cast<int>(r.size()); ++k) {
      if (!(r[k] >= 0.0)) throw InvalidArgument(name + ": negative probability at state " + std::to_string(i));
      if (r[k] > 0.0 && i + k - band_lo < 0)
        throw InvalidArgument(name + ": jump below 0 from state " + std::to_string(i));
      s += r[k];
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw InvalidArgument(name + ": jump pmf at state " + std::to_string(i) + " sums to " + std::to_string(s));
    return r;
  }

  /// E xi(i)^k e^{s xi(i)}
  double moment(int i, int k, double s) const {
    const Row r = jump(i);
    double acc = 0.0;
    for (int d = -band_lo; d <= band_hi; ++d) {
      const double p = r[static_cast<std::size_t>(d + band_lo)];
      if (p > 0.0) acc += std::pow(static_cast<double>(d), k) * std::exp(s * d) * p;
    }
    return acc;
  }

  /// E e^{beta xi(i)} - 1 evaluated from the jump law.
  double alpha(int i, double beta) const { return moment(i, 0, beta) - 1.0; }

  /// Kernel with explicit rows 0..K and the jump laws as parametric tail.
  StochasticKernel kernel(int K) const {
    std::vector<Row> rows;
    rows.reserve(static_cast<std::size_t>(K + 1));
    for (int i = 0; i <= K; ++i) rows.push_back(jump(i));
    auto gen = [f = *this](int i) { return f.jump(i); };
    return StochasticKernel(TransitionKernel(band_lo, band_hi, std::move(rows), TailRule::parametric(gen)));
  }

  /// Kernel on {0..K} with every transition above K redirected to K.
  StochasticKernel reflected_kernel(int K) const {
    std::vector<Row> rows;
    rows.reserve(static_cast<std::size_t>(K + 1));
    for (int i = 0; i <= K; ++i) {
      Row r = jump(i);
      for (int d = 1; d <= band_hi; ++d)
        if (i + d > K) {
          r[static_cast<std::size_t>(K - i + band_lo)] += r[static_cast<std::size_t>(d + band_lo)];
          r[static_cast<std::size_t>(d + band_lo)] = 0.0;
        }
      rows.push_back(std::move(r));
    }
    return StochasticKernel(TransitionKernel(band_lo, band_hi, std::move(rows)));
  }

  bool nearest_neighbor() const { return band_lo <= 1 && band_hi <= 1; }
};

namespace detail {

inline Row nn_row(double up, int i) {
  if (!(up > 0.0 && up < 1.0)) throw InvalidArgument("up probability out of (0,1) at state " + std::to_string(i));
  if (i == 0) return {0.0, 1.0 - up, up};
  return {1.0 - up, 0.0, up};
}

}  // namespace detail

/// Reflected random walk W_{n+1} = (W_n + xi)^+.
inline ChainFamily lindley_chain(const LatticeWalk& walk) {
  ChainFamily f{"lindley", walk.lo(), walk.hi(), {}, walk, Perturbation::none(), {}};
  f.jump_pmf = [walk](int i) {
    Row r = walk.pmf();
    const int lo = walk.lo();
    for (int d = -lo; d < -i; ++d) {
      r[static_cast<std::size_t>(-i + lo)] += r[static_cast<std::size_t>(d + lo)];
      r[static_cast<std::size_t>(d + lo)] = 0.0;
    }
    return r;
  };
  return f;
}

/// Nearest-neighbour chain with up-probability up(i), staying at 0 otherwise.
inline ChainFamily nearest_neighbor_chain(std::string name, std::function<double(int)> up, double p_limit) {
  ChainFamily f{std::move(name), 1, 1, {}, LatticeWalk(1, {1.0 - p_limit, 0.0, p_limit}), {}, {}};
  f.jump_pmf = [up = std::move(up)](int i) { return detail::nn_row(up(i), i); };
  return f;
}

/// Up-probability p + phi(i), phi(i) = c0 (-1)^i (1+i)^{-gamma}.
inline ChainFamily alternating_chain(double p, double gamma, double c0) {
  if (!(p > 0.0 && p < 0.5)) throw InvalidArgument("alternating chain: p must lie in (0, 1/2)");
  if (!(p + std::abs(c0) < 1.0 && p - std::abs(c0) > 0.0))
    throw InvalidArgument("alternating chain: p +- c0 must stay in (0,1)");
  auto phi = [gamma, c0](int i) { return (i % 2 == 0 ? c0 : -c0) * std::pow(1.0 + i, -gamma); };
  ChainFamily f = nearest_neighbor_chain("alternating", [p, phi](int i) { return p + phi(i); }, p);
  // E e^{beta xi(i)} - 1 = phi(i) (q/p - p/q) away from 0
  const double q = 1.0 - p;
  const double k = q / p - p / q;
  std::vector<double> tab;
  tab.reserve(65536);
  for (int i = 0; i < 65536; ++i) tab.push_back(phi(i) * k);
  f.perturbation = Perturbation::tabulated(std::move(tab));
  return f;
}

/// Up-probability p + alpha(i) / (q/p - p/q) with alpha(x) = c0 (1+x)^{-s}, so
/// that E e^{beta xi(i)} - 1 = alpha(i) exactly for i >= 1.
inline ChainFamily power_drift_chain(double p, double c0, double s) {
  if (!(p > 0.0 && p < 0.5)) throw InvalidArgument("power drift chain: p must lie in (0, 1/2)");
  const double q = 1.0 - p;
  const double k = q / p - p / q;
  if (!(p + std::abs(c0) / k < 1.0 && p - std::abs(c0) / k > 0.0))
    throw InvalidArgument("power drift chain: perturbation pushes the up-probability out of (0,1)");
  ChainFamily f = nearest_neighbor_chain(
      "power-drift", [p, c0, s, k](int i) { return p + c0 * std::pow(1.0 + i, -s) / k; }, p);
  f.perturbation = Perturbation::power_law(c0, s);
  // m_k(i) = m_k + alpha(i) (q/p - (-1)^k p/q) / (q/p - p/q)
  std::vector<std::vector<double>> d;
  for (int kk = 1; kk <= 8; ++kk) {
    std::vector<double> row(8, 0.0);
    row[0] = (q / p - (kk % 2 == 0 ? 1.0 : -1.0) * p / q) / k;
    d.push_back(std::move(row));
  }
  f.moment_expansion = std::move(d);
  return f;
}

/// Chain given by an explicit per-state table; rows above the table repeat the last one.
inline ChainFamily tabulated_chain(std::string name, int band_lo, int band_hi, std::vector<Row> table) {
  if (table.empty()) throw InvalidArgument("tabulated chain: empty table");
  const int last = static_cast<int>(table.size()) - 1;
  if (last < band_lo) throw InvalidArgument("tabulated chain: table must extend to state band_lo");
  LatticeWalk limit(band_lo, table.back());
  ChainFamily f{std::move(name), band_lo, band_hi, {}, limit, {}, {}};
  f.jump_pmf = [table = std::move(table), last](int i) { return table[static_cast<std::size_t>(std::min(i, last))]; };
  return f;
}

// Jump-law envelopes ---------------------------------------------------------

/// Greatest stochastic minorant: P{eta > j} = inf_i P{xi(i) > j} over the rows.
/// Rows are indexed by offset + lo and must be probability vectors.
inline LatticeWalk stochastic_minorant(int lo, int hi, const std::vector<Row>& rows) {
  const int w = lo + hi + 1;
  // tail[k] = P{xi > k - lo - 1}, k = 0..w
  std::vector<double> tail(static_cast<std::size_t>(w + 1), 1.0);
  tail[static_cast<std::size_t>(w)] = 0.0;
  for (const Row& r : rows) {
    double above = 0.0;
    for (int k = w - 1; k >= 0; --k) {
      above += r[static_cast<std::size_t>(k)];
      tail[static_cast<std::size_t>(k)] = std::min(tail[static_cast<std::size_t>(k)], std::min(above, 1.0));
    }
  }
  std::vector<double> pmf(static_cast<std::size_t>(w));
  for (int k = 0; k < w; ++k) pmf[static_cast<std::size_t>(k)] = std::max(0.0, tail[static_cast<std::size_t>(k)] - tail[static_cast<std::size_t>(k + 1)]);
  pmf[0] += 1.0 - std::accumulate(pmf.begin(), pmf.end(), 0.0);
  return LatticeWalk(lo, std::move(pmf));
}

/// Least stochastic majorant: P{Xi > j} = sup_i P{xi(i) > j}.
inline LatticeWalk stochastic_majorant(int lo, int hi, const std::vector<Row>& rows) {
  const int w = lo + hi + 1;
  std::vector<double> tail(static_cast<std::size_t>(w + 1), 0.0);
  for (const Row& r : rows) {
    double above = 0.0;
    for (int k = w - 1; k >= 0; --k) {
      above += r[static_cast<std::size_t>(k)];
      tail[static_cast<std::size_t>(k)] = std::max(tail[static_cast<std::size_t>(k)], std::min(above, 1.0));
    }
  }
  tail[0] = 1.0;
  std::vector<double> pmf(static_cast<std::size_t>(w));
  for (int k = 0; k < w; ++k) pmf[static_cast<std::size_t>(k)] = std::max(0.0, tail[static_cast<std::size_t>(k)] - tail[static_cast<std::size_t>(k + 1)]);
  pmf[static_cast<std::size_t>(w - 1)] += 1.0 - std::accumulate(pmf.begin(), pmf.end(), 0.0);
  return LatticeWalk(lo, std::move(pmf));
}

/// P{escape}: probability that the walk with law eta started at 0 stays >= 1
/// at every n >= 1. Zero unless E eta > 0.
inline double minorant_escape_probability(const LatticeWalk& eta) {
  if (!(eta.mean() > 0.0)) return 0.0;
  const int up = eta.max_up();
  const LadderData lad = ladder_with_renewal(eta, up);
  double p = 0.0;
  double cum = 0.0;
  for (int k = 1; k <= up; ++k) {
    cum += lad.u[static_cast<std::size_t>(k - 1)];
    // after the first jump to k the walk must never lose more than k-1
    p += eta.prob(k) * lad.defect * cum;
  }
  return p;
}

/// theta > 0 with P{walk with law eta ever drops by d} <= e^{-theta d};
/// +infinity when eta has no negative jumps, 0 when E eta <= 0.
inline double lundberg_exponent(const LatticeWalk& eta) {
  if (!(eta.mean() > 0.0)) return 0.0;
  if (eta.max_down() == 0) return std::numeric_limits<double>::infinity();
  return cramer_root(eta.reflected());
}

}  // namespace harmonic

#endif  // HARMONIC_CHAIN_HPP
