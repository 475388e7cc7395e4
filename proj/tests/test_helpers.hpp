#ifndef VCPLAB_TEST_HELPERS_HPP
#define VCPLAB_TEST_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vcplab/geom.hpp"
#include "vcplab/rng.hpp"
#include "vcplab/types.hpp"

namespace vcplab::testing {

// Monte-Carlo oracle: empirical fraction of uniform shell samples crossing a
// hyperplane at distance `margin` from the shell center. Crossing is judged
// by the projection onto the boundary normal, independently of the
// closed-form expression under test.
inline double mc_crossing_fraction_shell(double margin, double epsilon, int dim, long samples,
                                         rng::Engine& engine) {
  const geom::Shell shell{Vector::Zero(dim), margin, epsilon};
  Vector normal = Vector::Zero(dim);
  normal[0] = 1.0;
  long crossings = 0;
  for (long i = 0; i < samples; ++i) {
    const geom::ShellSample sample = geom::sample_shell_uniform(shell, engine);
    if (sample.point.dot(normal) >= margin) ++crossings;
  }
  return static_cast<double>(crossings) / static_cast<double>(samples);
}

inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mean_x = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double mean_y = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double cov = 0.0, var_x = 0.0, var_y = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    cov += (rx[i] - mean_x) * (ry[i] - mean_y);
    var_x += (rx[i] - mean_x) * (rx[i] - mean_x);
    var_y += (ry[i] - mean_y) * (ry[i] - mean_y);
  }
  return cov / std::sqrt(var_x * var_y);
}

}  // namespace vcplab::testing

#endif
