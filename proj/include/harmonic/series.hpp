#ifndef HARMONIC_SERIES_HPP
#define HARMONIC_SERIES_HPP

// Coefficients R_1..R_M of the correction beta(x) = beta + sum_k R_k alpha(x)^k.
// They make z + sum_k (1/k!) (m_k + sum_j D_{k,j} z^j) R(z)^k vanish to order M.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "harmonic/errors.hpp"

namespace harmonic {

/// Power series truncated after z^order; coefficient n at index n.
class TruncatedSeries {
 public:
  explicit TruncatedSeries(int order) : c_(static_cast<std::size_t>(order + 1), 0.0) {}

  int order() const { return static_cast<int>(c_.size()) - 1; }
  double& operator[](int n) { return c_[static_cast<std::size_t>(n)]; }
  double operator[](int n) const { return c_[static_cast<std::size_t>(n)]; }

  TruncatedSeries operator*(const TruncatedSeries& o) const {
    TruncatedSeries r(order());
    for (int a = 0; a <= order(); ++a) {
      if (c_[static_cast<std::size_t>(a)] == 0.0) continue;
      for (int b = 0; a + b <= order(); ++b) r[a + b] += (*this)[a] * o[b];
    }
    return r;
  }
  TruncatedSeries& operator+=(const TruncatedSeries& o) {
    for (int n = 0; n <= order(); ++n) (*this)[n] += o[n];
    return *this;
  }
  TruncatedSeries operator*(double s) const {
    TruncatedSeries r = *this;
    for (double& v : r.c_) v *= s;
    return r;
  }

 private:
  std::vector<double> c_;
};

namespace detail {

/// D[k-1][j-1] or 0 when not supplied.
inline double expansion_coeff(const std::vector<std::vector<double>>& d, int k, int j) {
  if (k - 1 >= static_cast<int>(d.size())) return 0.0;
  const auto& row = d[static_cast<std::size_t>(k - 1)];
  if (j - 1 >= static_cast<int>(row.size())) return 0.0;
  return row[static_cast<std::size_t>(j - 1)];
}

/// z + sum_{k=1}^M (1/k!) (m_k + sum_{j=1}^{M-k} D_{k,j} z^j) R(z)^k, through z^M.
inline TruncatedSeries cramer_series(std::span<const double> m, const std::vector<std::vector<double>>& d,
                                     std::span<const double> r, int M) {
  TruncatedSeries rz(M);
  for (int j = 1; j <= M && j <= static_cast<int>(r.size()); ++j) rz[j] = r[static_cast<std::size_t>(j - 1)];
  TruncatedSeries out(M);
  if (M >= 1) out[1] = 1.0;
  TruncatedSeries power(M);
  power[0] = 1.0;
  double factorial = 1.0;
  for (int k = 1; k <= M; ++k) {
    power = power * rz;
    factorial *= k;
    TruncatedSeries mk(M);
    mk[0] = m[static_cast<std::size_t>(k - 1)];
    for (int j = 1; j <= M - k; ++j) mk[j] = expansion_coeff(d, k, j);
    out += (mk * power) * (1.0 / factorial);
  }
  return out;
}

}  // namespace detail

/// R_1..R_M from tilted moments m = (m_1..m_M) and expansion coefficients
/// d[k-1][j-1] = D_{k,j}. R_n is fixed by the z^n coefficient, where it enters
/// only through m_1 R_n.
inline std::vector<double> cramer_coefficients(std::span<const double> m, const std::vector<std::vector<double>>& d,
                                               int M) {
  if (M < 1) throw InvalidArgument("cramer_coefficients: order M must be >= 1");
  if (static_cast<int>(m.size()) < M) throw InvalidArgument("cramer_coefficients: need m_1..m_M");
  for (double v : m)
    if (!std::isfinite(v)) throw InvalidArgument("cramer_coefficients: non-finite moment");
  if (!(m[0] > 0.0)) throw DomainError("cramer_coefficients: m_1 must be positive");
  std::vector<double> r(static_cast<std::size_t>(M), 0.0);
  r[0] = -1.0 / m[0];
  for (int n = 2; n <= M; ++n) {
    const TruncatedSeries s = detail::cramer_series(m, d, r, n);
    r[static_cast<std::size_t>(n - 1)] = -s[n] / m[0];
  }
  return r;
}

/// Largest |coefficient| of z^1..z^M after substituting r back into the series.
inline double cramer_series_residual(std::span<const double> m, const std::vector<std::vector<double>>& d,
                                     std::span<const double> r) {
  const int M = static_cast<int>(r.size());
  const TruncatedSeries s = detail::cramer_series(m, d, r, M);
  double worst = 0.0;
  for (int n = 1; n <= M; ++n) worst = std::max(worst, std::abs(s[n]));
  return worst;
}

/// Residual of each coefficient divided by the sum of the absolute values of
/// the terms that make it up, i.e. the backward error in units of the inputs.
inline double cramer_series_relative_residual(std::span<const double> m, const std::vector<std::vector<double>>& d,
                                              std::span<const double> r) {
  const int M = static_cast<int>(r.size());
  auto absolute = [](std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x = std::abs(x);
    return out;
  };
  std::vector<std::vector<double>> dabs = d;
  for (auto& row : dabs)
    for (double& x : row) x = std::abs(x);
  const std::vector<double> mabs = absolute(m), rabs = absolute(r);
  const TruncatedSeries s = detail::cramer_series(m, d, r, M);
  const TruncatedSeries scale = detail::cramer_series(mabs, dabs, rabs, M);
  double worst = 0.0;
  for (int n = 1; n <= M; ++n)
    if (scale[n] > 0.0) worst = std::max(worst, std::abs(s[n]) / scale[n]);
  return worst;
}

}  // namespace harmonic

#endif  // HARMONIC_SERIES_HPP
