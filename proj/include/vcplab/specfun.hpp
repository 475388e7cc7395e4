#ifndef VCPLAB_SPECFUN_HPP
#define VCPLAB_SPECFUN_HPP

#include <cmath>
#include <string>

#include "vcplab/error.hpp"

// Scalar special functions backing the closed-form cap/shell expressions.
// All functions are pure and re-entrant.

namespace vcplab::specfun {

/// Shape parameters of the (incomplete) Beta function; both must be > 0.
struct BetaParams {
  double a;
  double b;
};

namespace detail {

// Lanczos approximation, g = 7, 9 terms (Godfrey's coefficients).
inline constexpr double kLanczosG = 7.0;
inline constexpr double kLanczos[9] = {
    0.99999999999980993,      676.5203681218851,      -1259.1392167224028,
    771.32342877765313,       -176.61502916214059,    12.507343278686905,
    -0.13857109526572012,     9.9843695780195716e-6,  1.5056327351493116e-7};

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178032973640562;
inline constexpr double kLogPi = 1.1447298858494001741434273513531;

inline double log_gamma_lanczos(double x) {
  // Valid for x >= 0.5; callers reflect smaller arguments.
  const double z = x - 1.0;
  double series = kLanczos[0];
  for (int i = 1; i < 9; ++i) series += kLanczos[i] / (z + i);
  const double base = z + kLanczosG + 0.5;
  return kLogSqrtTwoPi + (z + 0.5) * std::log(base) - base + std::log(series);
}

// Continued fraction for the incomplete beta (modified Lentz). Requires
// x <= (a+1)/(a+b+2); the symmetry transform handles the other half.
inline constexpr double kLentzTiny = 1e-300;
inline constexpr double kLentzTol = 1e-15;
inline constexpr int kLentzMaxIter = 500;

inline double beta_continued_fraction(double x, double a, double b) {
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kLentzTiny) d = kLentzTiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= kLentzMaxIter; ++m) {
    const double dm = static_cast<double>(m);
    // Even step.
    double numerator = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + numerator * d;
    if (std::fabs(d) < kLentzTiny) d = kLentzTiny;
    c = 1.0 + numerator / c;
    if (std::fabs(c) < kLentzTiny) c = kLentzTiny;
    d = 1.0 / d;
    f *= d * c;
    // Odd step.
    numerator = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + numerator * d;
    if (std::fabs(d) < kLentzTiny) d = kLentzTiny;
    c = 1.0 + numerator / c;
    if (std::fabs(c) < kLentzTiny) c = kLentzTiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::fabs(delta - 1.0) < kLentzTol) return f;
  }
  throw ConvergenceError("incomplete beta continued fraction did not converge (a=" +
                         std::to_string(a) + ", b=" + std::to_string(b) +
                         ", x=" + std::to_string(x) + ")");
}

}  // namespace detail

/// ln Gamma(x) for x > 0.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma requires x > 0, got " + std::to_string(x));
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
    return detail::kLogPi - std::log(std::sin(M_PI * x)) - detail::log_gamma_lanczos(1.0 - x);
  }
  return detail::log_gamma_lanczos(x);
}

/// Euler Beta B(a,b) = Gamma(a) Gamma(b) / Gamma(a+b), evaluated in log space.
inline double euler_beta(BetaParams p) {
  return std::exp(log_gamma(p.a) + log_gamma(p.b) - log_gamma(p.a + p.b));
}

/// Regularized incomplete beta I(x; a, b), monotone nondecreasing in x.
inline double reg_inc_beta(double x, BetaParams p) {
  if (!(p.a > 0.0) || !(p.b > 0.0))
    throw DomainError("reg_inc_beta requires a, b > 0");
  if (!(x >= 0.0 && x <= 1.0))
    throw DomainError("reg_inc_beta requires x in [0, 1], got " + std::to_string(x));
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = p.a * std::log(x) + p.b * std::log1p(-x) -
                           (log_gamma(p.a) + log_gamma(p.b) - log_gamma(p.a + p.b));
  // The continued fraction converges fast for x below this threshold; above
  // it, evaluate the reflected integral instead.
  if (x < (p.a + 1.0) / (p.a + p.b + 2.0)) {
    return std::exp(log_front) * detail::beta_continued_fraction(x, p.a, p.b) / p.a;
  }
  return 1.0 - std::exp(log_front) * detail::beta_continued_fraction(1.0 - x, p.b, p.a) / p.b;
}

/// Volume of the unit n-ball, pi^{n/2} / Gamma(1 + n/2).
inline double unit_ball_volume(int dim) {
  if (dim < 1) throw DomainError("unit_ball_volume requires dim >= 1");
  const double n = static_cast<double>(dim);
  return std::exp(0.5 * n * detail::kLogPi - log_gamma(1.0 + 0.5 * n));
}

}  // namespace vcplab::specfun

#endif
