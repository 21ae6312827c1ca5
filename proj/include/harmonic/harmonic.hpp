#ifndef HARMONIC_HARMONIC_HPP
#define HARMONIC_HARMONIC_HPP

// Construction of the harmonic function f(i) = E_i prod_n Q(X_n, Z+) of a
// nonnegative kernel: Monte Carlo over paths of the embedded chain, exact
// truncated linear solve, closed forms for the origin-perturbed walk, and the
// checks of the sufficient conditions for f(i) -> 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "harmonic/chain.hpp"
#include "harmonic/errors.hpp"
#include "harmonic/kernel.hpp"
#include "harmonic/ladder.hpp"
#include "harmonic/rng.hpp"

namespace harmonic {

struct HarmonicEstimate {
  enum class Method { monte_carlo, linear_solve, closed_form };

  Method method = Method::linear_solve;
  /// f(i) for i = 0..values.size()-1; NaN where not estimated.
  std::vector<double> values;
  std::vector<double> std_errors;
  /// Value assumed for every state above the stored range (solve boundary).
  std::optional<double> beyond;
  /// The represented function is e^{scale_rate * i} * values[i].
  double scale_rate = 0.0;
  double residual = 0.0;
  int truncation = -1;
  long n_paths = 0;
  long horizon = 0;
  long horizon_hits = 0;
  bool horizon_warning = false;
  double doubling_difference = std::numeric_limits<double>::quiet_NaN();

  /// Stored (unscaled) value at j.
  double at(int j) const {
    if (j >= 0 && j < static_cast<int>(values.size()) && !std::isnan(values[static_cast<std::size_t>(j)]))
      return values[static_cast<std::size_t>(j)];
    if (j >= static_cast<int>(values.size()) && beyond) return *beyond;
    throw DomainError("harmonic estimate is undefined at state " + std::to_string(j));
  }
};

struct McOptions {
  /// Paths stop once the certified probability of coming back is below this.
  double return_tolerance = 1e-8;
  unsigned threads = 0;  // 0: hardware concurrency
  /// Extra rows scanned above K when the tail rule is parametric.
  int parametric_scan = 256;
  /// Branch paths at weighted visits (unbiased, all particles of weight one)
  /// instead of carrying the product of weights along a single path.
  bool splitting = true;
  /// Population cap per path for the splitting estimator; reaching it counts as a horizon hit.
  long max_particles = 1000000;
};

namespace detail {

/// Cumulative jump tables of an embedded chain, materialized up to `top`.
class JumpSampler {
 public:
  JumpSampler(const StochasticKernel& p, int top) : p_(p), top_(top) {
    cum_.reserve(static_cast<std::size_t>(top + 1));
    for (int i = 0; i <= top; ++i) cum_.push_back(cumulative(p_.row(i)));
  }

  /// Next state from i given a uniform draw; -1 for a row outside the domain.
  int next(int i, double u) const {
    if (i <= top_) return pick(i, cum_[static_cast<std::size_t>(i)], u);
    return pick(i, cumulative(p_.row(i)), u);
  }

 private:
  static Row cumulative(Row r) {
    double s = 0.0;
    for (double& w : r) {
      s += w;
      w = s;
    }
    return r;
  }
  int pick(int i, const Row& c, double u) const {
    if (c.back() <= 0.0) return -1;
    const double x = u * c.back();
    const auto it = std::upper_bound(c.begin(), c.end(), x);
    auto k = static_cast<int>(it - c.begin());
    if (k >= static_cast<int>(c.size())) k = static_cast<int>(c.size()) - 1;
    while (k > 0 && c[k] - c[k - 1] <= 0.0) --k;
    return i + k - p_.band_lo();
  }

  const StochasticKernel& p_;
  int top_;
  std::vector<Row> cum_;
};

/// Domain rows of p for states above `level` (explicit rows and the tail).
inline std::vector<Row> rows_above(const StochasticKernel& p, int level, int parametric_scan) {
  std::vector<Row> rows;
  for (int i = std::max(level + 1, 0); i <= p.truncation(); ++i)
    if (p.in_domain(i)) rows.push_back(p.row(i));
  const auto& tail = p.kernel().tail();
  if (tail.kind == TailRule::Kind::homogeneous) {
    rows.push_back(tail.row);
  } else if (tail.kind == TailRule::Kind::parametric) {
    const int from = std::max(level + 1, p.truncation() + 1);
    for (int i = from; i < from + parametric_scan; ++i)
      if (p.in_domain(i)) rows.push_back(p.row(i));
  }
  return rows;
}

/// Level above `level` from which the embedded chain returns to {0..level}
/// with probability below tol, certified by the stochastic minorant of the
/// jumps above `level`. When the explicit rows spoil the minorant, the
/// certificate is taken for returns below the truncation instead, which
/// covers returns below `level`. INT_MAX when no certificate exists.
inline int certified_stop_level(const StochasticKernel& p, int level, double tol, int parametric_scan) {
  auto attempt = [&](int base) {
    const std::vector<Row> rows = rows_above(p, base, parametric_scan);
    if (rows.empty()) return std::numeric_limits<int>::max();
    const LatticeWalk eta = stochastic_minorant(p.band_lo(), p.band_hi(), rows);
    const double theta = lundberg_exponent(eta);
    if (theta == 0.0) return std::numeric_limits<int>::max();
    if (std::isinf(theta)) return base;
    return base + static_cast<int>(std::ceil(std::log(1.0 / tol) / theta));
  };
  const int stop = attempt(level);
  if (stop == std::numeric_limits<int>::max() && p.truncation() > level) return attempt(p.truncation());
  return stop;
}

/// Runs fn(path) for path = 0..n-1 across threads; fn must only touch its own slot.
template <class Fn>
void parallel_paths(long n, unsigned threads, Fn&& fn) {
  unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  t = static_cast<unsigned>(std::min<long>(t, std::max(1L, n / 1024)));
  if (t <= 1) {
    for (long k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (n + t - 1) / t;
  for (unsigned w = 0; w < t; ++w) {
    const long a = w * chunk, b = std::min(n, a + chunk);
    pool.emplace_back([a, b, &fn] {
      for (long k = a; k < b; ++k) fn(k);
    });
  }
  for (auto& th : pool) th.join();
}

struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};

struct PathOutcome {
  double value = 0.0;
  bool hit = false;
};

/// exp(sum over visits of log_mult(X_n)) along one path of the embedded chain,
/// stopped above `stop` or at the horizon.
template <class LogMult>
PathOutcome weighted_path(const JumpSampler& sampler, int start, int stop, long horizon, StreamRng& rng,
                          LogMult&& log_mult) {
  PathOutcome out;
  double logw = 0.0;
  int x = start;
  for (long n = 0;; ++n) {
    logw += log_mult(x);
    if (std::isinf(logw)) break;
    if (x > stop) break;
    if (n == horizon) {
      out.hit = true;
      break;
    }
    x = sampler.next(x, rng.uniform());
    if (x < 0) {
      logw = -std::numeric_limits<double>::infinity();
      break;
    }
  }
  out.value = std::exp(logw);
  return out;
}

/// Same expectation by branching: a visit with multiplier m replaces the
/// particle by floor(m) or floor(m)+1 copies (mean m); the value is the
/// number of particles that finish.
template <class LogMult>
PathOutcome branching_path(const JumpSampler& sampler, int start, int stop, long horizon, long max_particles,
                           StreamRng& rng, LogMult&& log_mult) {
  PathOutcome out;
  struct Particle {
    int x;
    long n;
  };
  std::vector<Particle> stack;
  long created = 0;
  auto visit = [&](int x, long n) {
    const double m = std::exp(log_mult(x));
    const double whole = std::floor(m);
    long copies = static_cast<long>(whole);
    if (m > whole && rng.uniform() < m - whole) ++copies;
    for (long c = 0; c < copies; ++c) stack.push_back({x, n});
    created += copies;
  };
  visit(start, 0);
  double finished = 0.0;
  while (!stack.empty()) {
    if (created > max_particles) {
      out.hit = true;
      finished += static_cast<double>(stack.size());
      break;
    }
    const Particle p = stack.back();
    stack.pop_back();
    if (p.x > stop) {
      finished += 1.0;
      continue;
    }
    if (p.n == horizon) {
      out.hit = true;
      finished += 1.0;
      continue;
    }
    const int y = sampler.next(p.x, rng.uniform());
    if (y < 0) continue;
    visit(y, p.n + 1);
  }
  out.value = finished;
  return out;
}

inline SampleStats stats(const std::vector<double>& x) {
  SampleStats s;
  const auto n = static_cast<double>(x.size());
  if (x.empty()) return s;
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.std_error = x.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return s;
}

}  // namespace detail

/// Monte Carlo estimate of f(i) = E_i exp(sum_j l(j) delta(j)) for the given
/// states. delta must vanish above some explicit level L; paths stop once
/// they sit above L with certified return probability below the tolerance,
/// or at the horizon.
inline HarmonicEstimate build_mc(const TransitionKernel& q, std::span<const int> states, long n_paths, long horizon,
                                 std::uint64_t seed, const McOptions& opt = {}) {
  if (n_paths <= 0) throw InvalidArgument("build_mc: n_paths must be positive");
  const auto& tail = q.tail();
  if (tail.kind == TailRule::Kind::parametric)
    throw UnsupportedInput("build_mc: parametric tail, the support of delta cannot be certified finite");
  if (tail.kind == TailRule::Kind::homogeneous && std::abs(std::log(TransitionKernel::row_sum(tail.row))) > 1e-15)
    throw UnsupportedInput("build_mc: tail rows have nonzero delta, perturbation support is infinite");
  if (tail.kind == TailRule::Kind::none)
    throw UnsupportedInput("build_mc: kernel needs a tail rule for paths leaving the stored rows");

  int L = -1;
  std::vector<double> delta;
  for (int i = 0; i <= q.truncation(); ++i) {
    const double m = q.mass(i);
    const double d = m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
    delta.push_back(d);
    if (std::abs(d) > 1e-15) L = i;
  }
  delta.resize(static_cast<std::size_t>(L + 1));

  const StochasticKernel p = embed(q, true);
  const int stop = detail::certified_stop_level(p, L, opt.return_tolerance, opt.parametric_scan);
  const int table_top = std::max(q.truncation(), stop == std::numeric_limits<int>::max() ? L : stop) + q.band_hi() + 1;
  const detail::JumpSampler sampler(p, table_top);

  HarmonicEstimate est;
  est.method = HarmonicEstimate::Method::monte_carlo;
  const int top_state = states.empty() ? -1 : *std::max_element(states.begin(), states.end());
  est.values.assign(static_cast<std::size_t>(top_state + 1), std::numeric_limits<double>::quiet_NaN());
  est.std_errors = est.values;
  est.n_paths = n_paths;
  est.horizon = horizon;
  est.truncation = q.truncation();

  for (int s : states) {
    if (s < 0) throw RangeError("build_mc: negative state");
    if (L < 0) {
      est.values[static_cast<std::size_t>(s)] = 1.0;
      est.std_errors[static_cast<std::size_t>(s)] = 0.0;
      continue;
    }
    auto log_mult = [&delta, L](int x) { return x <= L ? delta[static_cast<std::size_t>(x)] : 0.0; };
    std::vector<double> sample(static_cast<std::size_t>(n_paths));
    std::vector<char> hit(static_cast<std::size_t>(n_paths), 0);
    detail::parallel_paths(n_paths, opt.threads, [&](long k) {
      StreamRng rng(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(k));
      const auto out = opt.splitting ? detail::branching_path(sampler, s, stop, horizon, opt.max_particles, rng, log_mult)
                                     : detail::weighted_path(sampler, s, stop, horizon, rng, log_mult);
      sample[static_cast<std::size_t>(k)] = out.value;
      hit[static_cast<std::size_t>(k)] = out.hit;
    });
    const auto st = detail::stats(sample);
    est.values[static_cast<std::size_t>(s)] = st.mean;
    est.std_errors[static_cast<std::size_t>(s)] = st.std_error;
    for (char h : hit) est.horizon_hits += h;
  }
  est.horizon_warning = est.horizon_hits > 0.01 * static_cast<double>(n_paths) * static_cast<double>(states.size());
  return est;
}

/// Solution of f(i) = sum_j Q(i,j) f(j), i <= K, with f = 1 imposed above K.
/// No doubling check; throws SolverFailure on a singular system or a solution
/// with negative entries.
inline HarmonicEstimate solve_truncated(const TransitionKernel& q, int K, double tol) {
  if (K < 0) throw InvalidArgument("build_solve: K must be >= 0");
  const int n = K + 1;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  trips.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(q.width() + 1));
  for (int i = 0; i <= K; ++i) {
    trips.emplace_back(i, i, 1.0);
    q.for_each(i, [&](int j, double w) {
      if (j > K) rhs[i] += w;
      else trips.emplace_back(i, j, -w);
    });
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success)
    throw SolverFailure(SolverFailure::Reason::singular, 0.0, "build_solve: singular system at K = " + std::to_string(K));
  const Eigen::VectorXd f = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !f.allFinite())
    throw SolverFailure(SolverFailure::Reason::singular, 0.0, "build_solve: non-finite solution at K = " + std::to_string(K));

  HarmonicEstimate est;
  est.method = HarmonicEstimate::Method::linear_solve;
  est.values.assign(f.data(), f.data() + n);
  est.beyond = 1.0;
  est.truncation = K;
  const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
  const double fmin = f.minCoeff();
  if (fmin < -tol * scale)
    throw SolverFailure(SolverFailure::Reason::negative_solution, fmin,
                        "build_solve: solution has negative entries (min " + std::to_string(fmin) +
                            "), no positive harmonic function with f -> 1");
  for (double& v : est.values) v = std::max(v, 0.0);
  double res = 0.0;
  for (int i = 0; i <= K; ++i) {
    const double qf = apply(q, [&](int j) { return est.at(j); }, i);
    res = std::max(res, std::abs(qf - est.values[static_cast<std::size_t>(i)]) / std::max(1.0, est.values[static_cast<std::size_t>(i)]));
  }
  est.residual = res;
  if (res > tol)
    throw SolverFailure(SolverFailure::Reason::not_converged, res,
                        "build_solve: residual " + std::to_string(res) + " above tolerance");
  return est;
}

struct SolveOptions {
  bool doubling_check = true;
};

/// Truncated solve with the boundary f = 1 above K; with the doubling check,
/// the solutions at K and 2K must agree to tol on 0..K/2.
inline HarmonicEstimate build_solve(const TransitionKernel& q, int K, double tol, const SolveOptions& opt = {}) {
  HarmonicEstimate est = solve_truncated(q, K, tol);
  if (!opt.doubling_check) return est;
  HarmonicEstimate twice;
  try {
    twice = solve_truncated(q, 2 * K, tol);
  } catch (const SolverFailure& e) {
    if (e.reason() != SolverFailure::Reason::negative_solution) throw;
    throw SolverFailure(SolverFailure::Reason::doubling_mismatch, std::numeric_limits<double>::infinity(),
                        "build_solve: positive at K = " + std::to_string(K) + " but not at 2K; boundary f = 1 is not "
                        "compatible with the kernel");
  }
  double diff = 0.0;
  for (int i = 0; i <= K / 2; ++i) {
    const double a = est.values[static_cast<std::size_t>(i)], b = twice.values[static_cast<std::size_t>(i)];
    diff = std::max(diff, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  est.doubling_difference = diff;
  if (!(diff <= tol))
    throw SolverFailure(SolverFailure::Reason::doubling_mismatch, diff,
                        "build_solve: solutions at K = " + std::to_string(K) + " and 2K differ by " +
                            std::to_string(diff) + "; boundary f = 1 is not compatible with the kernel");
  return est;
}

/// Harmonic function of the walk with Q(0,1) = alpha, Q(i,i+1) = p, Q(i,i-1) = 1-p.
/// Normalized by f(i) -> 1 when alpha < p/q and by f(0) = 1 in the critical case.
inline double closed_form_example1(double alpha, double p, int i) {
  if (!(p > 0.5 && p < 1.0)) throw InvalidArgument("closed_form_example1: p must lie in (1/2, 1)");
  if (!(alpha > 0.0)) throw InvalidArgument("closed_form_example1: alpha must be positive");
  if (i < 0) throw RangeError("closed_form_example1: negative state");
  const double q = 1.0 - p;
  const double r = q / p;
  const double critical = p / q;
  if (std::abs(alpha - critical) <= 1e-12 * critical) return std::pow(r, i);
  if (alpha > critical)
    throw NoPositiveHarmonicFunction("closed_form_example1: alpha > p/q, no positive harmonic function exists");
  const double f0 = alpha * (1.0 - r) / (1.0 - alpha * r);
  if (i == 0) return f0;
  return f0 * (1.0 + (1.0 / alpha - 1.0) * (1.0 - std::pow(r, i)) / (1.0 - r));
}

inline HarmonicEstimate closed_form_example1_values(double alpha, double p, int K) {
  HarmonicEstimate est;
  est.method = HarmonicEstimate::Method::closed_form;
  est.truncation = K;
  for (int i = 0; i <= K; ++i) est.values.push_back(closed_form_example1(alpha, p, i));
  return est;
}

/// Q(0,1) = alpha; Q(i,i+1) = p, Q(i,i-1) = q for i >= 1.
inline TransitionKernel example1_kernel(double alpha, double p) {
  if (!(alpha > 0.0)) throw InvalidArgument("example1: alpha must be positive");
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("example1: p must lie in (0,1)");
  return TransitionKernel(1, 1, {Row{0.0, 0.0, alpha}}, TailRule::homogeneous(Row{1.0 - p, 0.0, p}));
}

/// Q(i,i+1) = alpha_i for i < N; Q(N,N+1) = p, Q(N,0) = q; nearest-neighbour walk above N.
inline TransitionKernel example2_kernel(const std::vector<double>& alphas, double p) {
  const int N = static_cast<int>(alphas.size());
  if (N == 0) throw InvalidArgument("example2: need at least one alpha");
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("example2: p must lie in (0,1)");
  const int lo = std::max(1, N);
  std::vector<Row> rows;
  for (int i = 0; i < N; ++i) {
    if (!(alphas[static_cast<std::size_t>(i)] > 0.0)) throw InvalidArgument("example2: alphas must be positive");
    Row r(static_cast<std::size_t>(lo + 2), 0.0);
    r[static_cast<std::size_t>(lo + 1)] = alphas[static_cast<std::size_t>(i)];
    rows.push_back(std::move(r));
  }
  Row rn(static_cast<std::size_t>(lo + 2), 0.0);
  rn[static_cast<std::size_t>(lo + 1)] = p;
  rn[static_cast<std::size_t>(lo - N)] += 1.0 - p;
  rows.push_back(std::move(rn));
  Row tail(static_cast<std::size_t>(lo + 2), 0.0);
  tail[static_cast<std::size_t>(lo - 1)] = 1.0 - p;
  tail[static_cast<std::size_t>(lo + 1)] = p;
  return TransitionKernel(lo, 1, std::move(rows), TailRule::homogeneous(std::move(tail)));
}

/// max_i |(Qf)(i) - f(i)| / max(1, f(i)) over the given states, in the frame
/// of the stored values when the estimate carries a scale rate.
inline double verify_harmonicity(const TransitionKernel& q, const HarmonicEstimate& f, std::span<const int> states) {
  double worst = 0.0;
  for (int i : states) {
    const double fi = f.at(i);
    double qf = 0.0;
    q.for_each(i, [&](int j, double w) { qf += w * std::exp(f.scale_rate * (j - i)) * f.at(j); });
    worst = std::max(worst, std::abs(qf - fi) / std::max(1.0, fi));
  }
  return worst;
}

// Local times ----------------------------------------------------------------

struct LocalTimeEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long horizon_hits = 0;
  bool horizon_warning = false;
};

/// Monte Carlo estimate of E_start e^{gamma l(target)} (target defaults to
/// start); paths stop above the level from which a return to target is
/// certified below the tolerance.
inline LocalTimeEstimate local_time_moment_mc(const StochasticKernel& p, int start, double gamma, long n_paths,
                                              long horizon, std::uint64_t seed, int target = -1,
                                              const McOptions& opt = {}) {
  if (gamma < 0.0) throw InvalidArgument("local_time_moment_mc: gamma must be >= 0");
  if (n_paths <= 0) throw InvalidArgument("local_time_moment_mc: n_paths must be positive");
  if (target < 0) target = start;
  LocalTimeEstimate out;
  if (gamma == 0.0) {
    out.estimate = 1.0;
    return out;
  }
  const int stop = detail::certified_stop_level(p, target, opt.return_tolerance, opt.parametric_scan);
  const int top = std::max({p.truncation(), start, stop == std::numeric_limits<int>::max() ? target : stop}) + p.band_hi() + 1;
  const detail::JumpSampler sampler(p, top);
  auto log_mult = [target, gamma](int x) { return x == target ? gamma : 0.0; };
  std::vector<double> sample(static_cast<std::size_t>(n_paths));
  std::vector<char> hit(static_cast<std::size_t>(n_paths), 0);
  const std::uint64_t stream = 0x4c7ULL ^ (static_cast<std::uint64_t>(start) << 32) ^ static_cast<std::uint64_t>(target);
  detail::parallel_paths(n_paths, opt.threads, [&](long k) {
    StreamRng rng(seed, stream, static_cast<std::uint64_t>(k));
    const auto o = opt.splitting ? detail::branching_path(sampler, start, stop, horizon, opt.max_particles, rng, log_mult)
                                 : detail::weighted_path(sampler, start, stop, horizon, rng, log_mult);
    sample[static_cast<std::size_t>(k)] = o.value;
    hit[static_cast<std::size_t>(k)] = o.hit;
  });
  const auto st = detail::stats(sample);
  out.estimate = st.mean;
  out.std_error = st.std_error;
  for (char h : hit) out.horizon_hits += h;
  out.horizon_warning = out.horizon_hits > 0.01 * static_cast<double>(n_paths);
  return out;
}

/// Monte Carlo estimates of E_start l(j) for every j in 0..top.
inline std::vector<LocalTimeEstimate> expected_local_times_mc(const StochasticKernel& p, int start, int top, long n_paths,
                                                              long horizon, std::uint64_t seed, const McOptions& opt = {}) {
  if (n_paths <= 0) throw InvalidArgument("expected_local_times_mc: n_paths must be positive");
  const int stop = detail::certified_stop_level(p, top, opt.return_tolerance, opt.parametric_scan);
  const int table = std::max({p.truncation(), start, stop == std::numeric_limits<int>::max() ? top : stop}) + p.band_hi() + 1;
  const detail::JumpSampler sampler(p, table);
  const auto width = static_cast<std::size_t>(top + 1);
  std::vector<double> visits(width * static_cast<std::size_t>(n_paths), 0.0);
  std::vector<char> hit(static_cast<std::size_t>(n_paths), 0);
  detail::parallel_paths(n_paths, opt.threads, [&](long k) {
    StreamRng rng(seed, 0x10ca1ULL + static_cast<std::uint64_t>(start), static_cast<std::uint64_t>(k));
    double* row = visits.data() + width * static_cast<std::size_t>(k);
    int x = start;
    for (long n = 0;; ++n) {
      if (x <= top) row[x] += 1.0;
      if (x > stop) break;
      if (n == horizon) {
        hit[static_cast<std::size_t>(k)] = 1;
        break;
      }
      x = sampler.next(x, rng.uniform());
      if (x < 0) break;
    }
  });
  long hits = 0;
  for (char h : hit) hits += h;
  std::vector<LocalTimeEstimate> out;
  std::vector<double> column(static_cast<std::size_t>(n_paths));
  for (std::size_t j = 0; j < width; ++j) {
    for (long k = 0; k < n_paths; ++k) column[static_cast<std::size_t>(k)] = visits[width * static_cast<std::size_t>(k) + j];
    const auto st = detail::stats(column);
    out.push_back({st.mean, st.std_error, hits, hits > 0.01 * static_cast<double>(n_paths)});
  }
  return out;
}

// Condition checks -----------------------------------------------------------

struct ConditionOptions {
  /// Certified bound on sum_{i>K} |delta(i)| for parametric tails.
  std::optional<double> tail_abs_delta_bound;
  /// Levels above the delta-support kept when computing return probabilities.
  int escape_margin = 400;
  /// Largest number of delta+ support states whose return probability is computed.
  int max_local_time_states = 256;
  int parametric_scan = 256;
};

struct ConditionReport {
  double sum_abs_delta = 0.0;       // over explicit domain rows
  double tail_abs_delta = 0.0;      // bound for rows above K
  double delta_plus_sum = 0.0;      // delta = sum delta^+
  double delta_minus_sum = 0.0;
  double minorant_mean = 0.0;       // E eta
  double minorant_escape_prob = 0.0;
  double gamma_available = 0.0;     // exponential local-time moments finite below this
  double drift_eps = 0.0;
  int drift_M = 0;
  double zeta_mean = 0.0;
  double max_return_prob = 0.0;     // over the delta+ support
  /// E_i e^{gamma l(i)} for (i, gamma) on the delta+ support, gamma = delta.
  std::map<std::pair<int, double>, double> local_time_moment_bound;
  int excluded_rows = 0;            // zero-mass rows (outside the domain)
  bool tail_certified = true;

  bool delta_summable = false;
  bool local_times_ok = false;
  bool lln = false;
  bool limit_one_applies = false;
  bool minorant_escapes = false;
  bool truncated_drift_holds = false;
};

/// Checks the summability, minorant and drift hypotheses for f(i) -> 1.
///
/// The exponential local-time condition is evaluated exactly on the
/// truncation for the states carrying delta^+ > 0: with r(i) the return
/// probability of the embedded chain, E_i e^{delta l(i)} = e^delta (1-r) / (1 - e^delta r).
inline ConditionReport check_conditions(const TransitionKernel& q, const ConditionOptions& opt = {}) {
  ConditionReport rep;
  const int K = q.truncation();
  const StochasticKernel p = embed(q, true);

  std::vector<int> support;
  for (int i = 0; i <= K; ++i) {
    const double m = q.mass(i);
    if (!(m > 0.0)) {
      ++rep.excluded_rows;
      continue;
    }
    const double d = std::log(m);
    rep.sum_abs_delta += std::abs(d);
    if (d > 0.0) {
      rep.delta_plus_sum += d;
      support.push_back(i);
    } else {
      rep.delta_minus_sum -= d;
    }
  }
  const auto& tail = q.tail();
  if (tail.kind == TailRule::Kind::homogeneous) {
    const double d = std::log(TransitionKernel::row_sum(tail.row));
    if (std::abs(d) > 1e-15) {
      rep.tail_abs_delta = std::numeric_limits<double>::infinity();
      if (d > 0.0) rep.delta_plus_sum = std::numeric_limits<double>::infinity();
    }
  } else if (tail.kind == TailRule::Kind::parametric) {
    if (opt.tail_abs_delta_bound) {
      rep.tail_abs_delta = *opt.tail_abs_delta_bound;
      rep.delta_plus_sum += *opt.tail_abs_delta_bound;
    } else {
      rep.tail_abs_delta = std::numeric_limits<double>::infinity();
      rep.tail_certified = false;
    }
  }
  rep.delta_summable = std::isfinite(rep.sum_abs_delta + rep.tail_abs_delta);

  // jump envelopes over every domain row
  const std::vector<Row> rows = detail::rows_above(p, -1, opt.parametric_scan);
  const int lo = q.band_lo(), hi = q.band_hi();
  if (!rows.empty()) {
    const LatticeWalk eta = stochastic_minorant(lo, hi, rows);
    rep.minorant_mean = eta.mean();
    rep.minorant_escapes = rep.minorant_mean > 0.0;
    rep.minorant_escape_prob = minorant_escape_probability(eta);
    rep.gamma_available = rep.minorant_escape_prob > 0.0 ? -std::log1p(-rep.minorant_escape_prob) : 0.0;

    rep.drift_eps = -std::numeric_limits<double>::infinity();
    for (int M = 0; M <= hi; ++M) {
      double eps = std::numeric_limits<double>::infinity();
      for (const Row& r : rows) {
        double e = 0.0;
        for (int d = -lo; d <= M; ++d) e += d * r[static_cast<std::size_t>(d + lo)];
        eps = std::min(eps, e);
      }
      if (eps > rep.drift_eps) {
        rep.drift_eps = eps;
        rep.drift_M = M;
      }
    }
    for (int j = 1; j <= lo; ++j) {
      double sup = 0.0;
      for (const Row& r : rows) {
        double t = 0.0;
        for (int d = -lo; d <= -j; ++d) t += r[static_cast<std::size_t>(d + lo)];
        sup = std::max(sup, t);
      }
      rep.zeta_mean += sup;
    }
    rep.truncated_drift_holds = rep.drift_eps > 0.0 && std::isfinite(rep.zeta_mean);
  }
  rep.lln = rep.minorant_escapes;

  // exact return probabilities on the delta+ support
  rep.local_times_ok = std::isfinite(rep.delta_plus_sum) && rep.tail_certified;
  if (!support.empty() && rep.local_times_ok) {
    if (static_cast<int>(support.size()) > opt.max_local_time_states) support.resize(static_cast<std::size_t>(opt.max_local_time_states));
    const int top = support.back() + opt.escape_margin;
    const int n = top + 1;
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i <= top; ++i) {
      trips.emplace_back(i, i, 1.0);
      p.for_each(i, [&](int j, double w) {
        if (j <= top) trips.emplace_back(i, j, -w);
      });
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    const double delta = rep.delta_plus_sum;
    for (int s : support) {
      double r = 1.0;
      if (lu.info() == Eigen::Success) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[s] = 1.0;
        const Eigen::VectorXd g = lu.solve(e);
        // g[s] = expected visits to s from s = 1 / (1 - r)
        if (std::isfinite(g[s]) && g[s] >= 1.0) r = 1.0 - 1.0 / g[s];
      }
      rep.max_return_prob = std::max(rep.max_return_prob, r);
      const double er = std::exp(delta) * r;
      const double moment = er < 1.0 ? std::exp(delta) * (1.0 - r) / (1.0 - er) : std::numeric_limits<double>::infinity();
      rep.local_time_moment_bound[{s, delta}] = moment;
      if (!std::isfinite(moment)) rep.local_times_ok = false;
    }
  }
  rep.limit_one_applies = rep.delta_summable && rep.lln && rep.local_times_ok;
  return rep;
}

}  // namespace harmonic

#endif  // HARMONIC_HARMONIC_HPP
