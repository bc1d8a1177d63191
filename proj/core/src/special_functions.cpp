#include <cmath>
#include <limits>
#include <stdexcept>

#include "tacit/stats.hpp"

namespace tacit::stats {

namespace {

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

// x and y = 1 - x are passed separately so callers can supply an exact complement.
double beta_reg(double a, double b, double x, double y) {
  if (x == 0.0) return 0.0;
  if (y == 0.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, y) / b;
}

// Tail mass P(T > |t|) = I_x(df/2, 1/2) / 2 with x = df / (df + t^2).
double upper_tail(double t, double df) {
  const double t2 = t * t;
  return 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2));
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("incomplete_beta: x outside [0, 1]");
  return beta_reg(a, b, x, 1.0 - x);
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t_cdf: df must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = upper_tail(t, df);
  return t >= 0 ? 1.0 - tail : tail;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t_two_sided_p: df must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  return 2.0 * upper_tail(t, df);
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("student_t_quantile: p outside (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  const double target = 1.0 - p;  // upper tail
  double lo = 0.0;
  double hi = 1.0;
  while (upper_tail(hi, df) > target) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (upper_tail(mid, df) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace tacit::stats
