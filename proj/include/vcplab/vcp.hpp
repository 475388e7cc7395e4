#ifndef VCPLAB_VCP_HPP
#define VCPLAB_VCP_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "vcplab/dataset.hpp"
#include "vcplab/geom.hpp"
#include "vcplab/model.hpp"
#include "vcplab/types.hpp"

// Margins (exact for linear boundaries, first-order estimate otherwise) and
// per-point crossing-probability estimation, with dataset-level aggregation
// and the mean-margin lower bound.

namespace vcplab::vcp {

enum class MarginMethod { ExactLinear, GradientFirstOrder };
enum class Region { Ball, Shell };
enum class EstimateMethod { MonteCarlo, Analytic };

/// Distance-to-boundary estimate. A value of +infinity flags a flat score
/// plateau (gradient norm under the floor): no nearby boundary detected.
struct MarginEstimate {
  double value = 0.0;
  MarginMethod method = MarginMethod::ExactLinear;
  double gradient_norm = 0.0;

  bool unbounded() const { return std::isinf(value); }
};

struct VcpEstimate {
  double p = 0.0;
  long samples = 0;
  double standard_error = 0.0;  // sqrt(p(1-p)/samples) for Monte-Carlo, 0 for analytic
  Region region = Region::Ball;
  EstimateMethod method = EstimateMethod::MonteCarlo;
};

struct AggregateVcp {
  double mean_p = 0.0;
  std::vector<VcpEstimate> per_point;
  std::vector<MarginEstimate> per_point_margin;
  double mean_margin = 0.0;  // over bounded margins only
  double jensen_bound = 0.0;  // g evaluated at mean_margin in the model's input dimension
  Index excluded_margin_count = 0;
};

inline constexpr double kGradientNormFloor = 1e-12;

/// |w.x + b| / ||w||; requires a nonzero weight vector.
MarginEstimate margin_exact_linear(const model::LinearModel& linear, const VectorRef& x);

/// |h(x)| / ||grad h(x)||, the first-order distance-to-boundary estimate.
MarginEstimate margin_gradient_estimate(const model::Model& m, const VectorRef& x);

/// Fraction of perturbed points whose predicted class differs from x's,
/// sampling uniformly in the budget ball (Region::Ball) or in the shell
/// between `margin` and the budget (Region::Shell, margin required).
VcpEstimate vcp_monte_carlo(const model::Model& m, const VectorRef& x, double epsilon,
                            Region region, std::optional<double> margin, long samples,
                            rng::Engine& engine);

/// Closed-form value for a linear model (margin computed exactly).
VcpEstimate vcp_analytic_linear(const model::LinearModel& linear, const VectorRef& x,
                                double epsilon, Region region);

/// Per-point Monte-Carlo estimates with margins via the method matching the
/// model kind. Each point draws from its own (seed, point-index) stream, so
/// results are independent of evaluation order. Points whose shell is empty
/// under Region::Shell get an exact zero estimate.
AggregateVcp aggregate(const model::Model& m, const dataset::Dataset& data, double epsilon,
                       Region region, long samples, std::uint64_t seed);

/// Budget adjustment for expanded feature spaces: epsilon * sqrt(n'/n).
double rescale_epsilon(double base_epsilon, Index dim, Index expanded_dim);

/// Standard error of the aggregate mean from the per-point standard errors.
double mean_standard_error(const AggregateVcp& aggregate);

/// Columns: point_index, margin, margin_method, p, stderr, samples, region.
void write_aggregate_csv(std::ostream& out, const AggregateVcp& aggregate);

}  // namespace vcplab::vcp

#endif
