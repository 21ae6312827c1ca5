#ifndef HARMONIC_STATIONARY_HPP
#define HARMONIC_STATIONARY_HPP

// Stationary distributions of asymptotically homogeneous chains, their tail
// compensation by e^{int_0^i beta(y) dy}, Doob transforms by harmonic
// functions of the tilted killed kernel, and the renewal identities that tie
// the two together.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "harmonic/chain.hpp"
#include "harmonic/errors.hpp"
#include "harmonic/harmonic.hpp"
#include "harmonic/kernel.hpp"
#include "harmonic/ladder.hpp"
#include "harmonic/series.hpp"

namespace harmonic {

namespace detail {

inline double log_sum_exp(std::span<const double> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

using SparseLu = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;

}  // namespace detail

struct StationaryResult {
  int K = 0;
  std::vector<double> log_pi;
  double normalization_error = 0.0;
  /// max_j |(pi P)(j) - pi(j)| / pi(j) over states with pi(j) > 0
  double residual = 0.0;
  double doubling_difference = std::numeric_limits<double>::quiet_NaN();

  double pi(int i) const {
    if (i < 0 || i > K) throw RangeError("stationary result has no state " + std::to_string(i));
    return std::exp(log_pi[static_cast<std::size_t>(i)]);
  }
  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(log_pi.size());
    for (double x : log_pi) v.push_back(std::exp(x));
    return v;
  }
};

/// pi P = pi, sum pi = 1 for a kernel whose rows stay inside {0..K}.
/// The unknowns are pi(i) e^{scale i}, which keeps them of order one when
/// scale is the decay rate of pi; the equation at state 0 is replaced by the
/// normalization of that unknown.
inline StationaryResult stationary_solve_kernel(const StochasticKernel& p, double scale = 0.0) {
  const int K = p.truncation();
  const int n = K + 1;
  std::vector<Eigen::Triplet<double>> trips;
  trips.emplace_back(0, 0, 1.0);
  for (int j = 1; j <= K; ++j) trips.emplace_back(j, j, 1.0);
  for (int i = 0; i <= K; ++i) {
    p.for_each(i, [&](int j, double w) {
      if (j > K) throw InvalidArgument("stationary_solve: row " + std::to_string(i) + " leaves the truncation");
      if (j >= 1) trips.emplace_back(j, i, -std::exp(scale * (j - i)) * w);
    });
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[0] = 1.0;
  detail::SparseLu lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success)
    throw SolverFailure(SolverFailure::Reason::singular, 0.0, "stationary_solve: singular system (chain not irreducible through 0?)");
  const Eigen::VectorXd rho = lu.solve(rhs);
  if (!rho.allFinite())
    throw SolverFailure(SolverFailure::Reason::singular, 0.0, "stationary_solve: non-finite solution");
  const double top = rho.cwiseAbs().maxCoeff();
  if (rho.minCoeff() < -1e-10 * top)
    throw SolverFailure(SolverFailure::Reason::negative_solution, rho.minCoeff(),
                        "stationary_solve: negative stationary weights, chain is not positive recurrent on the truncation");

  StationaryResult r;
  r.K = K;
  r.log_pi.resize(static_cast<std::size_t>(n));
  for (int i = 0; i <= K; ++i)
    r.log_pi[static_cast<std::size_t>(i)] =
        rho[i] > 0.0 ? std::log(rho[i]) - scale * i : -std::numeric_limits<double>::infinity();
  const double z = detail::log_sum_exp(r.log_pi);
  for (double& v : r.log_pi) v -= z;

  double total = 0.0;
  for (double v : r.log_pi) total += std::exp(v);
  r.normalization_error = std::abs(total - 1.0);

  // relative stationarity residual in the scaled frame
  std::vector<double> flow(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i <= K; ++i) {
    if (!(rho[i] > 0.0)) continue;
    p.for_each(i, [&](int j, double w) { flow[static_cast<std::size_t>(j)] += std::exp(scale * (j - i)) * w * rho[i]; });
  }
  for (int j = 0; j <= K; ++j) {
    const double target = std::max(rho[j], 0.0);
    if (target > 0.0) r.residual = std::max(r.residual, std::abs(flow[static_cast<std::size_t>(j)] - target) / target);
    else r.residual = std::max(r.residual, flow[static_cast<std::size_t>(j)] / std::max(top, 1e-300));
  }
  return r;
}

struct StationaryOptions {
  bool doubling_check = true;
  double doubling_tol = 1e-8;
};

/// Stationary distribution of the chain reflected at K (excess up-mass moved
/// to K), with the K vs 2K agreement check on 0..K/2.
inline StationaryResult stationary_solve(const ChainFamily& chain, int K, const StationaryOptions& opt = {}) {
  if (K < 1) throw InvalidArgument("stationary_solve: K must be >= 1");
  const LatticeWalk& lim = chain.limit;
  if (!(lim.mean() < 0.0)) throw DomainError("stationary_solve: limit jump law must have negative mean");
  const double scale = lim.max_up() > 0 ? cramer_root(lim) : 0.0;
  StationaryResult r = stationary_solve_kernel(chain.reflected_kernel(K), scale);
  if (!opt.doubling_check) return r;
  const StationaryResult r2 = stationary_solve_kernel(chain.reflected_kernel(2 * K), scale);
  double diff = 0.0;
  for (int i = 0; i <= K / 2; ++i) {
    const double a = r.log_pi[static_cast<std::size_t>(i)], b = r2.log_pi[static_cast<std::size_t>(i)];
    if (std::isinf(a) && std::isinf(b)) continue;
    diff = std::max(diff, std::abs(std::expm1(a - b)));
  }
  r.doubling_difference = diff;
  if (!(diff <= opt.doubling_tol))
    throw SolverFailure(SolverFailure::Reason::doubling_mismatch, diff,
                        "stationary_solve: K and 2K solutions differ by " + std::to_string(diff));
  return r;
}

/// Detailed-balance solution of a nearest-neighbour chain, as log pi(0..K):
/// pi(i) proportional to prod_{j=1}^i up(j-1) / down(j).
inline std::vector<double> birth_death_closed_form(const std::function<double(int)>& up,
                                                   const std::function<double(int)>& down, int K) {
  std::vector<double> lp(static_cast<std::size_t>(K + 1), 0.0);
  for (int i = 1; i <= K; ++i) {
    const double u = up(i - 1), d = down(i);
    if (!(d > 0.0)) throw DomainError("birth_death_closed_form: zero down-probability at " + std::to_string(i));
    lp[static_cast<std::size_t>(i)] =
        lp[static_cast<std::size_t>(i - 1)] + (u > 0.0 ? std::log(u / d) : -std::numeric_limits<double>::infinity());
  }
  const double z = detail::log_sum_exp(lp);
  for (double& v : lp) v -= z;
  return lp;
}

inline std::vector<double> birth_death_closed_form(const ChainFamily& chain, int K) {
  if (!chain.nearest_neighbor()) throw UnsupportedInput("birth_death_closed_form: " + chain.name + " is not nearest-neighbour");
  auto at = [&chain](int i, int d) {
    const Row r = chain.jump(i);
    const int idx = d + chain.band_lo;
    return idx >= 0 && idx < static_cast<int>(r.size()) ? r[static_cast<std::size_t>(idx)] : 0.0;
  };
  return birth_death_closed_form([&](int i) { return at(i, 1); }, [&](int i) { return at(i, -1); }, K);
}

// Tail models ----------------------------------------------------------------

struct TailModel {
  enum class Mode { constant, alpha_over_m, cramer_series };

  Mode mode = Mode::constant;
  double beta = 0.0;
  Perturbation alpha;
  std::vector<double> m;                  // m_1..m_M, m_k = E xi^k e^{beta xi}
  std::vector<std::vector<double>> d;     // D_{k,j} at d[k-1][j-1]
  std::vector<double> r;                  // R_1..R_M (empty for constant mode)
  bool d_fitted = false;
  double d_fit_residual = 0.0;
  bool hypotheses_verified = false;
  std::string warning;

  int order() const { return static_cast<int>(r.size()); }

  double beta_at(double x) const {
    double b = beta;
    const double a = alpha.at(x);
    double ak = 1.0;
    for (double rk : r) {
      ak *= a;
      b += rk * ak;
    }
    return b;
  }

  /// int_0^x beta(y) dy
  double integral(double x) const {
    double s = beta * x;
    for (int k = 1; k <= order(); ++k) s += r[static_cast<std::size_t>(k - 1)] * alpha.integral_power(k, x);
    return s;
  }

  /// bound on |beta'(x)|
  double gamma_bound(double x) const {
    const double a = std::abs(alpha.at(x)), da = alpha.derivative_magnitude(x);
    double g = 0.0;
    for (int k = 1; k <= order(); ++k) g += k * std::abs(r[static_cast<std::size_t>(k - 1)]) * std::pow(a, k - 1) * da;
    return g;
  }
};

struct BetaFnOptions {
  int order = 1;        // M for cramer-series
  int fit_from = 1;     // states used when D has to be fitted
  int fit_to = 2000;
  double fit_tol = 1e-8;
};

namespace detail {

/// Least-squares fit of m_k(i) - m_k against alpha(i)^j, j = 1..M-k.
inline std::vector<std::vector<double>> fit_expansion(const ChainFamily& chain, double beta, const std::vector<double>& m,
                                                      int M, const BetaFnOptions& opt, double& residual) {
  std::vector<std::vector<double>> d(static_cast<std::size_t>(M));
  residual = 0.0;
  const int rows = opt.fit_to - opt.fit_from + 1;
  std::vector<double> a(static_cast<std::size_t>(rows));
  for (int i = opt.fit_from; i <= opt.fit_to; ++i) a[static_cast<std::size_t>(i - opt.fit_from)] = chain.alpha(i, beta);
  for (int k = 1; k < M; ++k) {
    const int cols = M - k;
    Eigen::MatrixXd x(rows, cols);
    Eigen::VectorXd y(rows);
    for (int t = 0; t < rows; ++t) {
      const int i = opt.fit_from + t;
      y[t] = chain.moment(i, k, beta) - m[static_cast<std::size_t>(k - 1)];
      double p = 1.0;
      for (int j = 0; j < cols; ++j) {
        p *= a[static_cast<std::size_t>(t)];
        x(t, j) = p;
      }
    }
    const Eigen::VectorXd coef = x.colPivHouseholderQr().solve(y);
    residual = std::max(residual, (x * coef - y).cwiseAbs().maxCoeff());
    d[static_cast<std::size_t>(k - 1)].assign(coef.data(), coef.data() + cols);
  }
  return d;
}

}  // namespace detail

/// beta(x) for the chosen regime: constant beta, beta - alpha(x)/m, or the
/// order-M Cramer series beta + sum_k R_k alpha(x)^k.
inline TailModel build_beta_fn(const ChainFamily& chain, TailModel::Mode mode, const BetaFnOptions& opt = {}) {
  const LatticeWalk& lim = chain.limit;
  if (!(lim.mean() < 0.0) || lim.max_up() == 0) throw NoCramerRoot("build_beta_fn: limit law has no Cramer root");
  TailModel t;
  t.mode = mode;
  t.beta = cramer_root(lim);
  t.alpha = chain.perturbation;
  const int M = mode == TailModel::Mode::cramer_series ? opt.order : 1;
  if (M < 1) throw InvalidArgument("build_beta_fn: order must be >= 1");
  for (int k = 1; k <= M; ++k) t.m.push_back(lim.moment(k, t.beta));

  const bool analytic = chain.perturbation.analytic();
  switch (mode) {
    case TailModel::Mode::constant: {
      // summable perturbation: none, or a power law decaying faster than 1/x
      const auto& a = chain.perturbation;
      t.hypotheses_verified = a.kind == Perturbation::Kind::none ||
                              (a.kind == Perturbation::Kind::power_law && a.exponent > 1.0);
      if (!t.hypotheses_verified) t.warning = "summability of the perturbation is not certified";
      break;
    }
    case TailModel::Mode::alpha_over_m:
      t.r = {-1.0 / t.m[0]};
      t.hypotheses_verified = analytic;
      break;
    case TailModel::Mode::cramer_series: {
      if (chain.moment_expansion) {
        t.d = *chain.moment_expansion;
      } else {
        t.d = detail::fit_expansion(chain, t.beta, t.m, M, opt, t.d_fit_residual);
        t.d_fitted = true;
        if (t.d_fit_residual > opt.fit_tol)
          t.warning = "moment expansion fit residual " + std::to_string(t.d_fit_residual) + " above tolerance";
      }
      t.r = cramer_coefficients(t.m, t.d, M);
      t.hypotheses_verified = analytic && !t.d_fitted;
      break;
    }
  }
  if (mode != TailModel::Mode::constant && !analytic)
    t.warning = t.warning.empty() ? "hypotheses unverified: tabulated perturbation has no derivative bound" : t.warning;
  return t;
}

/// -int_0^i beta(y) dy; the constant in front is left to tail_extract.
inline double predict_log_tail(const TailModel& model, double i) {
  const double v = -model.integral(i);
  if (!std::isfinite(v)) throw ConvergenceError(0.0, "predict_log_tail: non-finite integral at " + std::to_string(i));
  return v;
}

struct TailFit {
  int i0 = 0;
  int i1 = 0;
  double c = 0.0;           // median of c(i) over the window
  double variation = 0.0;   // max |c(i)/c - 1|
  double tolerance = 0.0;
  bool passed = false;
  std::vector<double> log_c;  // log c(i) for i = i0..i1
};

/// c(i) = pi(i) e^{int_0^i beta(y) dy} over [i0, i1], with the compensator
/// given as the log integral.
inline TailFit tail_extract(const StationaryResult& res, const std::function<double(int)>& log_compensator, int i0,
                            int i1, double tol) {
  if (i0 < 0 || i1 < i0 || i1 > res.K)
    throw RangeError("tail_extract: window [" + std::to_string(i0) + ", " + std::to_string(i1) + "] outside 0.." +
                     std::to_string(res.K));
  TailFit f;
  f.i0 = i0;
  f.i1 = i1;
  f.tolerance = tol;
  for (int i = i0; i <= i1; ++i) f.log_c.push_back(res.log_pi[static_cast<std::size_t>(i)] + log_compensator(i));
  std::vector<double> sorted = f.log_c;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  double med = *mid;
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), mid);
    med = 0.5 * (med + lower);
  }
  f.c = std::exp(med);
  for (double lc : f.log_c) f.variation = std::max(f.variation, std::abs(std::expm1(lc - med)));
  f.passed = std::isfinite(med) && f.c > 0.0 && f.variation <= tol;
  return f;
}

inline TailFit tail_extract(const StationaryResult& res, const TailModel& model, int i0, int i1, double tol) {
  return tail_extract(res, [&model](int i) { return model.integral(i); }, i0, i1, tol);
}

// Doob transform and renewal measures ----------------------------------------

struct DoobResult {
  StochasticKernel kernel;
  double max_row_deviation = 0.0;
  int identity_rows = 0;
};

/// P^(i,j) = h(j)/h(i) P(i,j) 1{j > N}, with h given by the estimate
/// (h(j) = e^{rate j} v(j)). Rows above the stored range use the tail of P
/// with h = e^{rate j} * beyond and are renormalized. Rows with h(i) = 0 are
/// identity rows.
inline DoobResult doob_transform(const StochasticKernel& p, const HarmonicEstimate& h, int N, double tol = 1e-8) {
  const int lo = p.band_lo(), hi = p.band_hi();
  const int stored = static_cast<int>(h.values.size()) - 1;
  const int last = h.beyond ? stored : stored - hi;
  if (last < 0) throw DomainError("doob_transform: harmonic function covers no complete row");
  const double rate = h.scale_rate;
  double deviation = 0.0;
  int identity_rows = 0;
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(last + 1));
  for (int i = 0; i <= last; ++i) {
    Row r(static_cast<std::size_t>(lo + hi + 1), 0.0);
    const double hi_val = h.at(i);
    if (!(hi_val > 0.0)) {
      r[static_cast<std::size_t>(lo)] = 1.0;
      ++identity_rows;
      rows.push_back(std::move(r));
      continue;
    }
    double s = 0.0;
    p.for_each(i, [&](int j, double w) {
      if (j <= N) return;
      const double v = w * std::exp(rate * (j - i)) * h.at(j) / hi_val;
      r[static_cast<std::size_t>(j - i + lo)] = v;
      s += v;
    });
    deviation = std::max(deviation, std::abs(s - 1.0));
    if (std::abs(s - 1.0) > tol)
      throw NotHarmonicError(std::abs(s - 1.0), "doob_transform: h is not harmonic at state " + std::to_string(i) +
                                                    " (row sum " + std::to_string(s) + ")");
    for (double& v : r) v /= s;
    rows.push_back(std::move(r));
  }

  TailRule tail;
  if (h.beyond) {
    auto tilted = [rate, lo](Row r) {
      double s = 0.0;
      for (int k = 0; k < static_cast<int>(r.size()); ++k) {
        r[static_cast<std::size_t>(k)] *= std::exp(rate * (k - lo));
        s += r[static_cast<std::size_t>(k)];
      }
      for (double& v : r) v /= s;
      return r;
    };
    const auto& pt = p.kernel().tail();
    if (pt.kind == TailRule::Kind::homogeneous) {
      tail = TailRule::homogeneous(tilted(pt.row));
    } else if (pt.kind == TailRule::Kind::parametric) {
      tail = TailRule::parametric([pk = p.kernel(), tilted](int i) { return tilted(pk.row(i)); });
    }
  }
  return {StochasticKernel(TransitionKernel(lo, hi, std::move(rows), std::move(tail))), deviation, identity_rows};
}

/// G(i) = sum_n (init Q^n)(i) for i = 0..K, computed on the states of
/// {0..K+extra} reachable from the support of init, with mass leaving that
/// range discarded.
inline std::vector<double> green_measure(const TransitionKernel& q, std::span<const double> init, int K, int extra = 400) {
  int top = std::max(K + extra, static_cast<int>(init.size()) - 1);
  if (q.tail().kind == TailRule::Kind::none) top = std::min(top, q.truncation());
  if (top < K) throw RangeError("green_measure: kernel does not cover states up to " + std::to_string(K));

  // index the reachable states
  std::vector<int> index(static_cast<std::size_t>(top + 1), -1);
  std::vector<int> order, queue;
  for (int i = 0; i < static_cast<int>(init.size()) && i <= top; ++i)
    if (init[static_cast<std::size_t>(i)] != 0.0) {
      index[static_cast<std::size_t>(i)] = static_cast<int>(order.size());
      order.push_back(i);
      queue.push_back(i);
    }
  while (!queue.empty()) {
    const int i = queue.back();
    queue.pop_back();
    q.for_each(i, [&](int j, double w) {
      if (w > 0.0 && j <= top && index[static_cast<std::size_t>(j)] < 0) {
        index[static_cast<std::size_t>(j)] = static_cast<int>(order.size());
        order.push_back(j);
        queue.push_back(j);
      }
    });
  }
  std::vector<double> out(static_cast<std::size_t>(K + 1), 0.0);
  if (order.empty()) return out;

  const int n = static_cast<int>(order.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (int a = 0; a < n; ++a) {
    trips.emplace_back(a, a, 1.0);
    q.for_each(order[static_cast<std::size_t>(a)], [&](int j, double w) {
      if (j <= top && index[static_cast<std::size_t>(j)] >= 0) trips.emplace_back(index[static_cast<std::size_t>(j)], a, -w);
    });
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < n; ++a) {
    const int i = order[static_cast<std::size_t>(a)];
    if (i < static_cast<int>(init.size())) b[a] = init[static_cast<std::size_t>(i)];
  }
  detail::SparseLu lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success)
    throw SolverFailure(SolverFailure::Reason::singular, 0.0, "green_measure: chain is not transient on the range");
  const Eigen::VectorXd g = lu.solve(b);
  if (!g.allFinite()) throw SolverFailure(SolverFailure::Reason::singular, 0.0, "green_measure: non-finite solution");
  for (int a = 0; a < n; ++a) {
    const int i = order[static_cast<std::size_t>(a)];
    if (i <= K) out[static_cast<std::size_t>(i)] = g[a];
  }
  return out;
}

/// Renewal measure U(i) = sum_n P{Xhat_n = i} of the transformed chain.
inline std::vector<double> renewal_measure(const StochasticKernel& phat, std::span<const double> init, int K, int extra = 400) {
  return green_measure(phat.kernel(), init, K, extra);
}

/// log of sum_{j<=N} pi(j) sum_n P_j{X_n = i, tau_N > n} for i = 0..K, via the
/// tilted killed kernel (so the solve sees quantities of order one).
inline std::vector<double> regeneration_log_measure(const StochasticKernel& p, const StationaryResult& st, double beta,
                                                    int N) {
  const TransitionKernel q = tilt(p, beta, N);
  std::vector<double> init(static_cast<std::size_t>(N + 1));
  for (int j = 0; j <= N; ++j) init[static_cast<std::size_t>(j)] = std::exp(st.log_pi[static_cast<std::size_t>(j)] + beta * j);
  const std::vector<double> g = green_measure(q, init, st.K, 0);
  std::vector<double> out(g.size());
  for (int i = 0; i < static_cast<int>(g.size()); ++i)
    out[static_cast<std::size_t>(i)] = (g[static_cast<std::size_t>(i)] > 0.0 ? std::log(g[static_cast<std::size_t>(i)])
                                                                             : -std::numeric_limits<double>::infinity()) -
                                       beta * i;
  return out;
}

/// max over the states of |regenerated pi(i) / pi(i) - 1|.
inline double regeneration_identity_error(const StochasticKernel& p, const StationaryResult& st, double beta, int N,
                                          std::span<const int> states) {
  const std::vector<double> lg = regeneration_log_measure(p, st, beta, N);
  double worst = 0.0;
  for (int i : states) {
    if (i <= N || i > st.K) throw RangeError("regeneration identity is stated for N < i <= K");
    worst = std::max(worst, std::abs(std::expm1(lg[static_cast<std::size_t>(i)] - st.log_pi[static_cast<std::size_t>(i)])));
  }
  return worst;
}

struct TransformConsistency {
  double constant = 0.0;     // sum_{j<=N} pi(j) h(j)
  double max_deviation = 0.0;  // max |pi(i) h(i) / U(i) / constant - 1|
  std::vector<double> renewal;   // U(0..K)
};

/// Checks pi(i) h(i) / U(i) = sum_{j<=N} pi(j) h(j), with U the renewal measure
/// of the transformed chain started from pi(j) h(j) / constant on [0, N].
inline TransformConsistency transform_consistency(const StationaryResult& st, const HarmonicEstimate& h,
                                                  const StochasticKernel& phat, int N, int K, std::span<const int> states,
                                                  int extra = 400) {
  std::vector<double> log_w(static_cast<std::size_t>(N + 1));
  for (int j = 0; j <= N; ++j) {
    const double v = h.at(j);
    log_w[static_cast<std::size_t>(j)] = v > 0.0 ? st.log_pi[static_cast<std::size_t>(j)] + h.scale_rate * j + std::log(v)
                                                 : -std::numeric_limits<double>::infinity();
  }
  const double log_c = detail::log_sum_exp(log_w);
  std::vector<double> init(static_cast<std::size_t>(N + 1));
  for (int j = 0; j <= N; ++j) init[static_cast<std::size_t>(j)] = std::exp(log_w[static_cast<std::size_t>(j)] - log_c);
  TransformConsistency out;
  out.constant = std::exp(log_c);
  out.renewal = renewal_measure(phat, init, K, extra);
  for (int i : states) {
    if (i <= N || i > K) throw RangeError("transform consistency is stated for N < i <= K");
    const double lhs = st.log_pi[static_cast<std::size_t>(i)] + h.scale_rate * i + std::log(h.at(i)) -
                       std::log(out.renewal[static_cast<std::size_t>(i)]);
    out.max_deviation = std::max(out.max_deviation, std::abs(std::expm1(lhs - log_c)));
  }
  return out;
}

/// h(i) = e^{beta i} f(i), f harmonic for the tilted kernel of the chain killed
/// in [0, N], from the truncated solve at K with f = 1 above K.
inline HarmonicEstimate tilted_killed_harmonic(const StochasticKernel& p, double beta, int N, int K, double tol,
                                               const SolveOptions& opt = {}) {
  HarmonicEstimate h = build_solve(tilt(p, beta, N), K, tol, opt);
  h.scale_rate = beta;
  return h;
}

struct KillLevelChoice {
  int N = 0;
  double delta = 0.0;            // sum of delta_N^+ over the explicit rows
  double gamma_available = 0.0;
  bool certified = false;        // delta < fraction * gamma_available
};

/// Smallest N with delta_N < fraction * gamma_available for the tilted kernel
/// killed in [0, N]; without one, the N with the smallest ratio.
inline KillLevelChoice select_kill_level(const StochasticKernel& p, double beta, int max_N, double fraction = 0.1) {
  KillLevelChoice best;
  double best_ratio = std::numeric_limits<double>::infinity();
  ConditionOptions opt;
  opt.max_local_time_states = 0;
  for (int N = 0; N <= max_N; ++N) {
    const ConditionReport rep = check_conditions(tilt(p, beta, N), opt);
    const double ratio = rep.gamma_available > 0.0 ? rep.delta_plus_sum / rep.gamma_available
                                                   : std::numeric_limits<double>::infinity();
    if (rep.delta_plus_sum < fraction * rep.gamma_available) return {N, rep.delta_plus_sum, rep.gamma_available, true};
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = {N, rep.delta_plus_sum, rep.gamma_available, false};
    }
  }
  return best;
}

/// Second route to the tail constant: sum_{j<=N} pi(j) h(j) / E xi e^{beta xi}.
inline double renewal_tail_constant(double transform_constant, const LatticeWalk& limit, double beta) {
  return transform_constant / limit.moment(1, beta);
}

}  // namespace harmonic

#endif  // HARMONIC_STATIONARY_HPP
