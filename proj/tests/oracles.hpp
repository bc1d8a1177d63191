#pragma once
// Independent reference implementations used only by tests.

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tacit::testing {

struct OlsOracle {
  std::vector<double> coef, se, t, p;
  double r2 = 0.0;
};

// Normal equations in long double with Gauss-Jordan inversion; t tail from Boost.
inline OlsOracle ols_oracle(const std::vector<double>& y, const std::vector<std::vector<double>>& X) {
  const std::size_t n = y.size(), m = X[0].size() + 1;
  std::vector<std::vector<long double>> A(m, std::vector<long double>(2 * m, 0.0L));
  std::vector<long double> xty(m, 0.0L);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<long double> row(m);
    row[0] = 1.0L;
    for (std::size_t j = 1; j < m; ++j) row[j] = X[r][j - 1];
    for (std::size_t i = 0; i < m; ++i) {
      xty[i] += row[i] * y[r];
      for (std::size_t j = 0; j < m; ++j) A[i][j] += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i) A[i][m + i] = 1.0L;
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r) {
      if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
    }
    std::swap(A[c], A[piv]);
    if (A[c][c] == 0.0L) throw std::runtime_error("singular");
    const long double d = A[c][c];
    for (auto& v : A[c]) v /= d;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c) continue;
      const long double f = A[r][c];
      for (std::size_t k = 0; k < 2 * m; ++k) A[r][k] -= f * A[c][k];
    }
  }
  OlsOracle o;
  std::vector<long double> beta(m, 0.0L);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) beta[i] += A[i][m + j] * xty[j];
  }
  long double ybar = 0.0L;
  for (double v : y) ybar += v;
  ybar /= n;
  long double sse = 0.0L, sst = 0.0L;
  for (std::size_t r = 0; r < n; ++r) {
    long double fit = beta[0];
    for (std::size_t j = 1; j < m; ++j) fit += beta[j] * X[r][j - 1];
    sse += (y[r] - fit) * (y[r] - fit);
    sst += (y[r] - ybar) * (y[r] - ybar);
  }
  const double df = static_cast<double>(n - m);
  const long double s2 = sse / df;
  boost::math::students_t dist(df);
  for (std::size_t i = 0; i < m; ++i) {
    const double se = static_cast<double>(std::sqrt(s2 * A[i][m + i]));
    const double t = static_cast<double>(beta[i]) / se;
    o.coef.push_back(static_cast<double>(beta[i]));
    o.se.push_back(se);
    o.t.push_back(t);
    o.p.push_back(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
  }
  o.r2 = static_cast<double>(1.0L - sse / sst);
  return o;
}

inline double rel_err(double got, double want) {
  const double scale = std::max(std::fabs(want), 1e-300);
  return std::fabs(got - want) / scale;
}

}  // namespace tacit::testing
