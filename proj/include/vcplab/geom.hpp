#ifndef VCPLAB_GEOM_HPP
#define VCPLAB_GEOM_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include "vcplab/error.hpp"
#include "vcplab/rng.hpp"
#include "vcplab/specfun.hpp"
#include "vcplab/types.hpp"

// Counterfactual-shell geometry: volumes, spherical-cap fractions, the
// closed-form crossing probability for a hyperplane boundary, its small-gap
// asymptotic, and uniform samplers over balls and shells.

namespace vcplab::geom {

/// Annulus between an inner radius (distance to the nearest decision
/// boundary point) and an outer radius (the perturbation budget). Empty when
/// inner_radius >= outer_radius.
struct Shell {
  Vector center;
  double inner_radius = 0.0;
  double outer_radius = 0.0;

  bool empty() const { return inner_radius >= outer_radius; }
};

/// A point drawn from a shell, kept in polar form alongside the assembled
/// coordinates.
struct ShellSample {
  Vector direction;  // unit vector
  double radius = 0.0;
  Vector point;  // center + radius * direction
};

/// A shell together with the unit normal pointing from the center to its
/// nearest boundary point; identifies the spherical cap cut off by the
/// boundary hyperplane.
struct CapSpec {
  Shell shell;
  Vector normal;

  Vector boundary_point() const { return shell.center + shell.inner_radius * normal; }
};

inline bool shell_is_degenerate(double margin, double radius) { return margin >= radius; }

/// Volume of the shell between radii margin and radius in `dim` dimensions;
/// zero when the shell is empty.
inline double shell_volume(const Shell& shell, int dim) {
  if (dim < 1) throw DomainError("shell_volume requires dim >= 1");
  if (shell.center.size() > 0 && shell.center.size() != dim)
    throw DomainError("shell_volume: dim does not match center dimension");
  if (shell.empty()) return 0.0;
  const double ratio = shell.inner_radius / shell.outer_radius;
  return specfun::unit_ball_volume(dim) * std::pow(shell.outer_radius, dim) *
         (1.0 - std::pow(ratio, dim));
}

/// Fraction of a ball lying beyond a hyperplane at distance
/// margin_over_radius * R from its center: (1/2) I(1 - t^2; (n+1)/2, 1/2).
/// Evaluated through whichever tail of the beta integral keeps 1 - t^2 (or
/// t^2) away from catastrophic cancellation.
inline double cap_fraction_of_ball(double margin_over_radius, int dim) {
  if (dim < 1) throw DomainError("cap_fraction_of_ball requires dim >= 1");
  if (!(margin_over_radius >= 0.0 && margin_over_radius <= 1.0))
    throw DomainError("cap_fraction_of_ball requires ratio in [0, 1], got " +
                      std::to_string(margin_over_radius));
  const double t = margin_over_radius;
  if (t == 0.0) return 0.5;
  if (t == 1.0) return 0.0;
  const double a = 0.5 * (dim + 1);
  double fraction;
  if (t < 0.5) {
    fraction = 0.5 * (1.0 - specfun::reg_inc_beta(t * t, {0.5, a}));
  } else {
    fraction = 0.5 * specfun::reg_inc_beta((1.0 - t) * (1.0 + t), {a, 0.5});
  }
  return std::clamp(fraction, 0.0, 0.5);
}

/// Crossing probability for a hyperplane at distance `margin`, conditioning
/// the uniform perturbation on the shell (cap volume over shell volume):
/// (1/2) R^n/(R^n - margin^n) I(1 - (margin/R)^2; (n+1)/2, 1/2).
/// Returns 0 for a degenerate shell and 1/2 for margin = 0 (full ball).
inline double vcp_linear_uniform(double margin, double radius, int dim) {
  if (dim < 1) throw DomainError("vcp_linear_uniform requires dim >= 1");
  if (!(radius > 0.0)) throw DomainError("vcp_linear_uniform requires radius > 0");
  if (!(margin >= 0.0)) throw DomainError("vcp_linear_uniform requires margin >= 0");
  if (shell_is_degenerate(margin, radius)) return 0.0;
  if (margin == 0.0) return 0.5;
  // 1 - t^n via expm1 keeps precision for margins near either end.
  const double gap_fraction = (radius - margin) / radius;  // 1 - t
  const double one_minus_tn = -std::expm1(static_cast<double>(dim) * std::log1p(-gap_fraction));
  const double cap = cap_fraction_of_ball(margin / radius, dim);
  return std::clamp(cap / one_minus_tn, 0.0, 0.5);
}

/// Ball-conditional variant: the fraction of the whole budget ball beyond
/// the boundary. This is what sampling perturbations uniformly in the ball
/// estimates; it differs from the shell-conditional value by the factor
/// R^n/(R^n - margin^n).
inline double vcp_linear_uniform_ball(double margin, double radius, int dim) {
  if (dim < 1) throw DomainError("vcp_linear_uniform_ball requires dim >= 1");
  if (!(radius > 0.0)) throw DomainError("vcp_linear_uniform_ball requires radius > 0");
  if (!(margin >= 0.0)) throw DomainError("vcp_linear_uniform_ball requires margin >= 0");
  if (margin >= radius) return 0.0;
  return cap_fraction_of_ball(margin / radius, dim);
}

/// Two candidate normalizations of the small-gap leading coefficient
/// circulate, differing by a factor of 2:
///   Consistent: 2^{(n+1)/2}
///   Halved:     2^{(n-1)/2}
/// Consistent is the default: expanding the exact expression yields it, and
/// it alone reproduces the exact 1-D constant 1/2 (the tests discriminate
/// the two against vcp_linear_uniform). Halved is retained for comparison.
enum class AsymptoticVariant { Consistent, Halved };

/// Leading coefficient K(n, margin) of the small-gap expansion
/// p = K * gap^{(n-1)/2} * (1 + O(gap)), gap = radius - margin.
inline double asymptotic_coefficient(int dim, double margin,
                                     AsymptoticVariant variant = AsymptoticVariant::Consistent) {
  if (dim < 1) throw DomainError("asymptotic_coefficient requires dim >= 1");
  if (!(margin > 0.0)) throw DomainError("asymptotic_coefficient requires margin > 0");
  const double n = static_cast<double>(dim);
  const double exponent = variant == AsymptoticVariant::Consistent ? 0.5 * (n + 1.0)
                                                                        : 0.5 * (n - 1.0);
  const double beta = specfun::euler_beta({0.5 * (n + 1.0), 0.5});
  return std::pow(2.0, exponent) /
         (n * (n + 1.0) * beta * std::pow(margin, 0.5 * (n - 1.0)));
}

/// Small-gap approximation of vcp_linear_uniform, intended for
/// radius - margin << margin (the locally-flat boundary regime).
inline double vcp_nonlinear_asymptotic(double margin, double radius, int dim,
                                       AsymptoticVariant variant = AsymptoticVariant::Consistent) {
  if (dim < 1) throw DomainError("vcp_nonlinear_asymptotic requires dim >= 1");
  if (!(margin > 0.0)) throw DomainError("vcp_nonlinear_asymptotic requires margin > 0");
  if (!(radius > margin)) throw DomainError("vcp_nonlinear_asymptotic requires radius > margin");
  const double gap = radius - margin;
  return asymptotic_coefficient(dim, margin, variant) *
         std::pow(gap, 0.5 * (static_cast<double>(dim) - 1.0));
}

/// The closed-form crossing probability evaluated at a mean margin; the
/// Jensen lower bound on the dataset-average crossing probability. Strictly
/// decreasing on (0, radius).
inline double g_of_mean_margin(double mean_margin, double radius, int dim) {
  return vcp_linear_uniform(mean_margin, radius, dim);
}

/// Uniform unit direction via normalized Gaussian coordinates (stable in
/// high dimension, unlike rejection from the cube).
inline Vector sample_unit_direction(Index dim, rng::Engine& engine) {
  Vector direction(dim);
  double norm = 0.0;
  do {
    rng::fill_standard_normal(direction, engine);
    norm = direction.norm();
  } while (norm == 0.0);
  return direction / norm;
}

/// Volume-uniform sample from a nonempty shell: uniform direction plus
/// inverse-CDF radius rho = R (t^n + u (1 - t^n))^{1/n}, t = inner/outer.
inline ShellSample sample_shell_uniform(const Shell& shell, rng::Engine& engine) {
  if (shell.empty())
    throw DegenerateShellError("sample_shell_uniform: empty shell (inner radius " +
                               std::to_string(shell.inner_radius) + " >= outer radius " +
                               std::to_string(shell.outer_radius) + ")");
  const Index dim = shell.center.size();
  ShellSample sample;
  sample.direction = sample_unit_direction(dim, engine);
  const double t = shell.inner_radius / shell.outer_radius;
  const double tn = std::pow(t, static_cast<double>(dim));
  const double u = rng::uniform01(engine);
  sample.radius =
      shell.outer_radius * std::pow(tn + u * (1.0 - tn), 1.0 / static_cast<double>(dim));
  sample.point = shell.center + sample.radius * sample.direction;
  return sample;
}

/// Volume-uniform sample from the open ball of radius `radius`.
inline Vector sample_ball_uniform(const VectorRef& center, double radius, rng::Engine& engine) {
  if (!(radius > 0.0)) throw DomainError("sample_ball_uniform requires radius > 0");
  Shell shell{center, 0.0, radius};
  return sample_shell_uniform(shell, engine).point;
}

/// Angle between a sample's direction and the cap normal, in [0, pi].
inline double angle_to(const ShellSample& sample, const CapSpec& cap) {
  const double cosine = std::clamp(sample.direction.dot(cap.normal), -1.0, 1.0);
  return std::acos(cosine);
}

}  // namespace vcplab::geom

#endif
