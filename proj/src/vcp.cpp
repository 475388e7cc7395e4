#include "vcplab/vcp.hpp"

#include <cstdio>
#include <limits>
#include <string>

#include "vcplab/error.hpp"

namespace vcplab::vcp {

namespace {

constexpr std::uint64_t kVcpStreamTag = 0x766370;  // per-point stream domain

const char* method_name(MarginMethod method) {
  return method == MarginMethod::ExactLinear ? "exact-linear" : "gradient-first-order";
}

const char* region_name(Region region) { return region == Region::Ball ? "ball" : "shell"; }

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

MarginEstimate margin_exact_linear(const model::LinearModel& linear, const VectorRef& x) {
  const double weight_norm = linear.weights.norm();
  if (weight_norm == 0.0)
    throw DomainError("margin_exact_linear: zero weight vector, boundary undefined");
  MarginEstimate estimate;
  estimate.method = MarginMethod::ExactLinear;
  estimate.gradient_norm = weight_norm;
  estimate.value = std::fabs(model::score(linear, x)) / weight_norm;
  return estimate;
}

MarginEstimate margin_gradient_estimate(const model::Model& m, const VectorRef& x) {
  const double h = model::score(m, x);
  const double gradient_norm = model::input_gradient(m, x).norm();
  MarginEstimate estimate;
  estimate.method = MarginMethod::GradientFirstOrder;
  estimate.gradient_norm = gradient_norm;
  if (h == 0.0) {
    estimate.value = 0.0;  // on the boundary, whatever the gradient
  } else if (gradient_norm < kGradientNormFloor) {
    estimate.value = std::numeric_limits<double>::infinity();
  } else {
    estimate.value = std::fabs(h) / gradient_norm;
  }
  return estimate;
}

VcpEstimate vcp_monte_carlo(const model::Model& m, const VectorRef& x, double epsilon,
                            Region region, std::optional<double> margin, long samples,
                            rng::Engine& engine) {
  if (!(epsilon > 0.0)) throw DomainError("vcp_monte_carlo requires epsilon > 0");
  if (samples < 1) throw DomainError("vcp_monte_carlo requires samples >= 1");
  double inner_radius = 0.0;
  if (region == Region::Shell) {
    if (!margin.has_value()) throw DomainError("vcp_monte_carlo: shell region requires a margin");
    inner_radius = *margin;
    if (geom::shell_is_degenerate(inner_radius, epsilon))
      throw DegenerateShellError("vcp_monte_carlo: empty shell (margin " +
                                 std::to_string(inner_radius) + " >= epsilon " +
                                 std::to_string(epsilon) + ")");
  }

  const int base_class = model::classify(m, x);
  const geom::Shell shell{x, inner_radius, epsilon};

  Matrix perturbed(samples, x.size());
  for (long i = 0; i < samples; ++i)
    perturbed.row(i) = geom::sample_shell_uniform(shell, engine).point.transpose();

  const Vector scores = model::score_batch(m, perturbed);
  long flips = 0;
  for (long i = 0; i < samples; ++i) {
    if (!std::isfinite(scores[i]))
      throw DivergenceError("vcp_monte_carlo: non-finite score at sample " + std::to_string(i));
    const int predicted = scores[i] >= 0.0 ? 1 : 0;
    if (predicted != base_class) ++flips;
  }

  VcpEstimate estimate;
  estimate.p = static_cast<double>(flips) / static_cast<double>(samples);
  estimate.samples = samples;
  estimate.standard_error =
      std::sqrt(estimate.p * (1.0 - estimate.p) / static_cast<double>(samples));
  estimate.region = region;
  estimate.method = EstimateMethod::MonteCarlo;
  return estimate;
}

VcpEstimate vcp_analytic_linear(const model::LinearModel& linear, const VectorRef& x,
                                double epsilon, Region region) {
  if (!(epsilon > 0.0)) throw DomainError("vcp_analytic_linear requires epsilon > 0");
  const MarginEstimate margin = margin_exact_linear(linear, x);
  const int dim = static_cast<int>(x.size());
  VcpEstimate estimate;
  estimate.p = region == Region::Shell
                   ? geom::vcp_linear_uniform(margin.value, epsilon, dim)
                   : geom::vcp_linear_uniform_ball(margin.value, epsilon, dim);
  estimate.samples = 0;
  estimate.standard_error = 0.0;
  estimate.region = region;
  estimate.method = EstimateMethod::Analytic;
  return estimate;
}

AggregateVcp aggregate(const model::Model& m, const dataset::Dataset& data, double epsilon,
                       Region region, long samples, std::uint64_t seed) {
  if (data.size() < 1) throw DataError("aggregate requires a nonempty dataset");
  const bool linear = std::holds_alternative<model::LinearModel>(m);

  AggregateVcp result;
  result.per_point.reserve(static_cast<std::size_t>(data.size()));
  result.per_point_margin.reserve(static_cast<std::size_t>(data.size()));

  double p_sum = 0.0;
  double margin_sum = 0.0;
  Index bounded_margins = 0;
  for (Index i = 0; i < data.size(); ++i) {
    const Vector x = data.features.row(i).transpose();
    const MarginEstimate margin =
        linear ? margin_exact_linear(std::get<model::LinearModel>(m), x)
               : margin_gradient_estimate(m, x);

    VcpEstimate estimate;
    if (region == Region::Shell && geom::shell_is_degenerate(margin.value, epsilon)) {
      // Empty shell: no budget-respecting counterfactual exists.
      estimate.p = 0.0;
      estimate.samples = 0;
      estimate.standard_error = 0.0;
      estimate.region = region;
      estimate.method = EstimateMethod::Analytic;
    } else {
      rng::Engine engine = rng::derive_stream(seed, kVcpStreamTag, static_cast<std::uint64_t>(i));
      estimate = vcp_monte_carlo(m, x, epsilon, region,
                                 region == Region::Shell ? std::optional<double>(margin.value)
                                                         : std::nullopt,
                                 samples, engine);
    }

    p_sum += estimate.p;
    if (margin.unbounded()) {
      ++result.excluded_margin_count;
    } else {
      margin_sum += margin.value;
      ++bounded_margins;
    }
    result.per_point.push_back(estimate);
    result.per_point_margin.push_back(margin);
  }

  result.mean_p = p_sum / static_cast<double>(data.size());
  result.mean_margin = bounded_margins > 0
                           ? margin_sum / static_cast<double>(bounded_margins)
                           : std::numeric_limits<double>::infinity();
  const int dim = static_cast<int>(model::input_dim(m));
  result.jensen_bound = bounded_margins > 0 && result.mean_margin < epsilon
                            ? geom::g_of_mean_margin(result.mean_margin, epsilon, dim)
                            : 0.0;
  return result;
}

double rescale_epsilon(double base_epsilon, Index dim, Index expanded_dim) {
  if (!(base_epsilon > 0.0)) throw DomainError("rescale_epsilon requires epsilon > 0");
  if (dim < 1 || expanded_dim < 1) throw DomainError("rescale_epsilon requires positive dimensions");
  return base_epsilon *
         std::sqrt(static_cast<double>(expanded_dim) / static_cast<double>(dim));
}

double mean_standard_error(const AggregateVcp& aggregate) {
  double sum_sq = 0.0;
  for (const VcpEstimate& e : aggregate.per_point)
    sum_sq += e.standard_error * e.standard_error;
  return aggregate.per_point.empty()
             ? 0.0
             : std::sqrt(sum_sq) / static_cast<double>(aggregate.per_point.size());
}

void write_aggregate_csv(std::ostream& out, const AggregateVcp& aggregate) {
  out << "point_index,margin,margin_method,p,stderr,samples,region\n";
  for (std::size_t i = 0; i < aggregate.per_point.size(); ++i) {
    const VcpEstimate& e = aggregate.per_point[i];
    const MarginEstimate& margin = aggregate.per_point_margin[i];
    out << i << ',' << format_double(margin.value) << ',' << method_name(margin.method) << ','
        << format_double(e.p) << ',' << format_double(e.standard_error) << ',' << e.samples << ','
        << region_name(e.region) << '\n';
  }
}

}  // namespace vcplab::vcp
