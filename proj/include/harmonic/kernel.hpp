#ifndef HARMONIC_KERNEL_HPP
#define HARMONIC_KERNEL_HPP

// Banded nonnegative transition kernels on the nonnegative integers.
//
// A kernel stores explicit rows for states 0..K and a tail rule for the
// states above K. Row vectors are indexed by offset + band_lo, so entry
// r[d + band_lo] is the weight of the transition i -> i + d.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "harmonic/errors.hpp"

namespace harmonic {

using Row = std::vector<double>;
using RowGenerator = std::function<Row(int state)>;

/// Weights below this threshold are removed after every transform.
inline constexpr double kDropThreshold = 1e-15;

/// Rows of the kernel above the explicit truncation.
struct TailRule {
  enum class Kind { none, homogeneous, parametric };

  Kind kind = Kind::none;
  Row row;                  // homogeneous
  RowGenerator generator;   // parametric

  static TailRule none() { return {}; }
  static TailRule homogeneous(Row r) { return {Kind::homogeneous, std::move(r), {}}; }
  static TailRule parametric(RowGenerator g) { return {Kind::parametric, {}, std::move(g)}; }
};

class TransitionKernel {
 public:
  TransitionKernel(int band_lo, int band_hi, std::vector<Row> rows, TailRule tail = {},
                   double dropped_mass = 0.0)
      : band_lo_(band_lo), band_hi_(band_hi), rows_(std::move(rows)), tail_(std::move(tail)),
        dropped_mass_(dropped_mass) {
    if (band_lo_ < 0 || band_hi_ < 0) throw InvalidArgument("kernel band limits must be >= 0");
    if (rows_.empty() && tail_.kind == TailRule::Kind::none)
      throw InvalidArgument("kernel needs explicit rows or a tail rule");
    for (std::size_t i = 0; i < rows_.size(); ++i) check_row(static_cast<int>(i), rows_[i]);
    if (tail_.kind == TailRule::Kind::homogeneous) {
      check_row(truncation() + 1, tail_.row);
      if (truncation() + 1 < band_lo_) {
        for (int d = -band_lo_; d < -(truncation() + 1); ++d)
          if (tail_.row[d + band_lo_] > 0.0)
            throw InvalidArgument("homogeneous tail would jump below state 0");
      }
    }
    if (tail_.kind == TailRule::Kind::parametric && !tail_.generator)
      throw InvalidArgument("parametric tail rule without generator");
  }

  int band_lo() const noexcept { return band_lo_; }
  int band_hi() const noexcept { return band_hi_; }
  int width() const noexcept { return band_lo_ + band_hi_ + 1; }
  /// Largest state with an explicitly stored row (-1 when all rows come from the tail).
  int truncation() const noexcept { return static_cast<int>(rows_.size()) - 1; }
  const TailRule& tail() const noexcept { return tail_; }
  double dropped_mass() const noexcept { return dropped_mass_; }

  bool representable(int i) const noexcept {
    return i >= 0 && (i <= truncation() || tail_.kind != TailRule::Kind::none);
  }

  Row row(int i) const {
    if (!representable(i))
      throw RangeError("state " + std::to_string(i) + " is outside the kernel's range");
    if (i <= truncation()) return rows_[static_cast<std::size_t>(i)];
    if (tail_.kind == TailRule::Kind::homogeneous) return tail_.row;
    Row r = tail_.generator(i);
    check_row(i, r);
    return r;
  }

  /// Row storage for explicit states; avoids a copy in hot loops.
  const Row& explicit_row(int i) const { return rows_.at(static_cast<std::size_t>(i)); }

  double weight(int i, int j) const {
    const int d = j - i;
    if (d < -band_lo_ || d > band_hi_ || j < 0) return 0.0;
    if (i >= 0 && i <= truncation()) return rows_[static_cast<std::size_t>(i)][d + band_lo_];
    return row(i)[d + band_lo_];
  }

  /// Raw row sum Q(i, Z+); zero for rows removed by killing.
  double mass(int i) const {
    if (i >= 0 && i <= truncation()) return row_sum(rows_[static_cast<std::size_t>(i)]);
    return row_sum(row(i));
  }

  /// Calls fn(j, w) for every destination j with positive weight w.
  template <class Fn>
  void for_each(int i, Fn&& fn) const {
    auto visit = [&](const Row& r) {
      for (int k = 0; k < width(); ++k)
        if (r[k] > 0.0) fn(i + k - band_lo_, r[k]);
    };
    if (i >= 0 && i <= truncation()) {
      visit(rows_[static_cast<std::size_t>(i)]);
    } else {
      visit(row(i));
    }
  }

  static double row_sum(const Row& r) { return std::accumulate(r.begin(), r.end(), 0.0); }

 private:
  void check_row(int i, const Row& r) const {
    if (r.size() != static_cast<std::size_t>(width()))
      throw InvalidArgument("row " + std::to_string(i) + " has width " + std::to_string(r.size()) +
                            ", expected " + std::to_string(width()));
    for (int k = 0; k < width(); ++k) {
      const double w = r[k];
      if (!(w >= 0.0) || !std::isfinite(w))
        throw InvalidArgument("row " + std::to_string(i) + " has a negative or non-finite weight");
      if (w > 0.0 && i + k - band_lo_ < 0)
        throw InvalidArgument("row " + std::to_string(i) + " puts mass below state 0");
    }
  }

  int band_lo_;
  int band_hi_;
  std::vector<Row> rows_;
  TailRule tail_;
  double dropped_mass_;
};

/// Kernel with unit row sums on every row of its domain. Rows of zero mass
/// (created by killing) lie outside the domain.
class StochasticKernel {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit StochasticKernel(TransitionKernel k) : k_(std::move(k)) {
    for (int i = 0; i <= k_.truncation(); ++i) check(i, TransitionKernel::row_sum(k_.explicit_row(i)));
    if (k_.tail().kind == TailRule::Kind::homogeneous)
      check(k_.truncation() + 1, TransitionKernel::row_sum(k_.tail().row));
  }

  const TransitionKernel& kernel() const noexcept { return k_; }
  int band_lo() const noexcept { return k_.band_lo(); }
  int band_hi() const noexcept { return k_.band_hi(); }
  int truncation() const noexcept { return k_.truncation(); }
  bool representable(int i) const noexcept { return k_.representable(i); }
  bool in_domain(int i) const { return k_.mass(i) > 0.0; }
  Row row(int i) const { return k_.row(i); }
  double weight(int i, int j) const { return k_.weight(i, j); }
  template <class Fn>
  void for_each(int i, Fn&& fn) const {
    k_.for_each(i, std::forward<Fn>(fn));
  }

 private:
  static void check(int i, double s) {
    if (s != 0.0 && std::abs(s - 1.0) > kSumTolerance)
      throw InvalidArgument("row " + std::to_string(i) + " of a stochastic kernel sums to " +
                            std::to_string(s));
  }

  TransitionKernel k_;
};

namespace detail {

inline double drop_small(Row& r) {
  double dropped = 0.0;
  for (double& w : r)
    if (w > 0.0 && w < kDropThreshold) {
      dropped += w;
      w = 0.0;
    }
  return dropped;
}

inline Row normalized(Row r, int i) {
  const double s = TransitionKernel::row_sum(r);
  if (!(s > 0.0)) throw DegenerateRowError(i, "row has zero total mass");
  for (double& w : r) w /= s;
  return r;
}

}  // namespace detail

/// Q(i, Z+). Throws RangeError outside the kernel, DegenerateRowError on a killed row.
inline double total_mass(const TransitionKernel& q, int i) {
  if (!q.representable(i))
    throw RangeError("state " + std::to_string(i) + " is outside the kernel's range");
  const double m = q.mass(i);
  if (!(m > 0.0)) throw DegenerateRowError(i, "row has zero total mass");
  return m;
}

inline double total_mass(const StochasticKernel& p, int i) { return total_mass(p.kernel(), i); }

/// delta(i) = log Q(i, Z+).
inline double log_mass(const TransitionKernel& q, int i) { return std::log(total_mass(q, i)); }

/// Divide every row by its mass. With restrict_domain, zero rows are kept as
/// zero rows (outside the domain) instead of raising.
inline StochasticKernel embed(const TransitionKernel& q, bool restrict_domain = false) {
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(q.truncation() + 1));
  double dropped = q.dropped_mass();
  for (int i = 0; i <= q.truncation(); ++i) {
    Row r = q.explicit_row(i);
    if (restrict_domain && TransitionKernel::row_sum(r) == 0.0) {
      rows.push_back(std::move(r));
      continue;
    }
    r = detail::normalized(std::move(r), i);
    dropped += detail::drop_small(r);
    rows.push_back(detail::normalized(std::move(r), i));
  }
  TailRule tail = q.tail();
  if (tail.kind == TailRule::Kind::homogeneous) {
    tail.row = detail::normalized(std::move(tail.row), q.truncation() + 1);
  } else if (tail.kind == TailRule::Kind::parametric) {
    tail.generator = [g = q.tail().generator](int i) {
      Row r = detail::normalized(g(i), i);
      detail::drop_small(r);
      return detail::normalized(std::move(r), i);
    };
  }
  return StochasticKernel(
      TransitionKernel(q.band_lo(), q.band_hi(), std::move(rows), std::move(tail), dropped));
}

namespace detail {

/// Explicit rows of p up to max(K, last), so that tail rows above `last`
/// can be kept unchanged by transforms that only act below `last`.
inline std::vector<Row> materialize(const TransitionKernel& p, int last) {
  std::vector<Row> rows;
  const int top = std::max(p.truncation(), last);
  if (top > p.truncation() && p.tail().kind == TailRule::Kind::none)
    throw RangeError("kernel has no tail rule to extend rows up to state " + std::to_string(top));
  rows.reserve(static_cast<std::size_t>(top + 1));
  for (int i = 0; i <= top; ++i) rows.push_back(p.row(i));
  return rows;
}

}  // namespace detail

/// Remove every transition into the finite set `killed`.
/// Rows whose entire mass lands in the set become zero rows (outside the domain).
inline TransitionKernel kill(const StochasticKernel& p, std::vector<int> killed) {
  const TransitionKernel& k = p.kernel();
  std::sort(killed.begin(), killed.end());
  killed.erase(std::unique(killed.begin(), killed.end()), killed.end());
  if (!killed.empty() && killed.front() < 0) throw InvalidArgument("kill set contains a negative state");
  if (killed.empty()) return k;
  std::vector<Row> rows = detail::materialize(k, killed.back() + k.band_lo());
  double dropped = k.dropped_mass();
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    for (int d = -k.band_lo(); d <= k.band_hi(); ++d)
      if (std::binary_search(killed.begin(), killed.end(), i + d)) rows[i][d + k.band_lo()] = 0.0;
    dropped += detail::drop_small(rows[i]);
  }
  return TransitionKernel(k.band_lo(), k.band_hi(), std::move(rows), k.tail(), dropped);
}

/// Exponential change of measure e^{beta (j-i)} P(i,j) with transitions into
/// {0..kill_level} removed. kill_level = -1 keeps every transition.
inline TransitionKernel tilt(const StochasticKernel& p, double beta, int kill_level) {
  const TransitionKernel& k = p.kernel();
  const int lo = k.band_lo();
  auto tilt_row = [beta, lo](Row r) {
    for (int idx = 0; idx < static_cast<int>(r.size()); ++idx) r[idx] *= std::exp(beta * (idx - lo));
    return r;
  };
  std::vector<Row> rows = detail::materialize(k, kill_level + lo);
  double dropped = k.dropped_mass();
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    rows[i] = tilt_row(std::move(rows[i]));
    for (int d = -lo; d <= k.band_hi(); ++d)
      if (i + d <= kill_level) rows[i][d + lo] = 0.0;
    dropped += detail::drop_small(rows[i]);
  }
  TailRule tail = k.tail();
  if (tail.kind == TailRule::Kind::homogeneous) {
    tail.row = tilt_row(std::move(tail.row));
    detail::drop_small(tail.row);
  } else if (tail.kind == TailRule::Kind::parametric) {
    tail.generator = [g = k.tail().generator, tilt_row](int i) {
      Row r = tilt_row(g(i));
      detail::drop_small(r);
      return r;
    };
  }
  return TransitionKernel(lo, k.band_hi(), std::move(rows), std::move(tail), dropped);
}

/// (Qf)(i) = sum_j Q(i,j) f(j) for f given on 0..f.size()-1.
inline double apply(const TransitionKernel& q, std::span<const double> f, int i) {
  double s = 0.0;
  q.for_each(i, [&](int j, double w) {
    if (j >= static_cast<int>(f.size()))
      throw DomainError("function is undefined at state " + std::to_string(j));
    s += w * f[static_cast<std::size_t>(j)];
  });
  return s;
}

inline double apply(const TransitionKernel& q, const std::function<double(int)>& f, int i) {
  double s = 0.0;
  q.for_each(i, [&](int j, double w) { s += w * f(j); });
  return s;
}

/// Strong connectivity of the positive-weight graph restricted to {first..last}.
inline bool irreducible(const TransitionKernel& q, int first, int last) {
  if (first < 0 || last < first) return false;
  const int n = last - first + 1;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n)), in(static_cast<std::size_t>(n));
  for (int i = first; i <= last; ++i)
    q.for_each(i, [&](int j, double) {
      if (j >= first && j <= last && j != i) {
        out[i - first].push_back(j - first);
        in[j - first].push_back(i - first);
      }
    });
  auto reaches_all = [n](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> todo;
    todo.push(0);
    seen[0] = 1;
    int count = 1;
    while (!todo.empty()) {
      const int v = todo.front();
      todo.pop();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          todo.push(w);
        }
    }
    return count == n;
  };
  return reaches_all(out) && reaches_all(in);
}

inline bool irreducible(const TransitionKernel& q, int n_states) { return irreducible(q, 0, n_states); }

}  // namespace harmonic

#endif  // HARMONIC_KERNEL_HPP
