// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned in code next to each check.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "test_helpers.hpp"
#include "vcplab/dataset.hpp"
#include "vcplab/geom.hpp"
#include "vcplab/harness.hpp"
#include "vcplab/model.hpp"
#include "vcplab/specfun.hpp"
#include "vcplab/vcp.hpp"

using namespace vcplab;

namespace {

struct Criterion {
  int number;
  std::string summary;
  std::function<bool(std::string&)> run;
};

bool check(bool condition, std::string& detail, const std::string& message) {
  if (!condition && detail.empty()) detail = message;
  return condition;
}

// --- criterion 1: special-function fidelity ---------------------------------
bool special_function_fidelity(std::string& detail) {
  rng::Engine engine = rng::make_engine(1001);
  bool ok = true;
  for (int i = 0; i < 10000; ++i) {
    const double x = rng::uniform01(engine);
    const double a = 0.25 + 29.75 * rng::uniform01(engine);
    const double b = 0.25 + 29.75 * rng::uniform01(engine);
    ok &= check(std::fabs(specfun::reg_inc_beta(x, {1.0, 1.0}) - x) <= 1e-12, detail,
                "I(x;1,1) != x at x=" + std::to_string(x));
    ok &= check(std::fabs(specfun::reg_inc_beta(0.5, {a, a}) - 0.5) <= 1e-12, detail,
                "I(0.5;a,a) != 0.5 at a=" + std::to_string(a));
    const double sum =
        specfun::reg_inc_beta(x, {a, b}) + specfun::reg_inc_beta(1.0 - x, {b, a});
    ok &= check(std::fabs(sum - 1.0) <= 1e-12, detail,
                "reflection identity off by " + std::to_string(sum - 1.0));
    if (!ok) break;
  }
  return ok;
}

// --- criterion 2: closed form vs Monte-Carlo over the full grid -------------
bool closed_form_monte_carlo_grid(std::string& detail) {
  const long samples = 100000;
  int misses = 0, cells = 0;
  for (int dim : {2, 3, 5, 9}) {
    for (int tenth = 1; tenth <= 9; ++tenth) {
      const double ratio = 0.1 * tenth;
      rng::Engine engine = rng::derive_stream(1002, static_cast<std::uint64_t>(cells));
      const double empirical =
          testing::mc_crossing_fraction_shell(ratio, 1.0, dim, samples, engine);
      const double exact = geom::vcp_linear_uniform(ratio, 1.0, dim);
      const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(samples));
      if (std::fabs(empirical - exact) > 3.0 * se) ++misses;
      ++cells;
    }
  }
  detail = std::to_string(36 - misses) + "/36 cells within 3*stderr";
  return misses <= 1;
}

// --- criterion 3: limit checks ----------------------------------------------
bool limit_checks(std::string& detail) {
  bool ok = true;
  for (int dim = 1; dim <= 20; ++dim) {
    const double near_boundary = geom::vcp_linear_uniform(1e-9, 1.0, dim);
    ok &= check(near_boundary >= 0.4999 && near_boundary <= 0.5, detail,
                "vanishing-margin value " + std::to_string(near_boundary) + " at dim " +
                    std::to_string(dim));
  }
  for (int dim = 2; dim <= 20; ++dim) {
    const double near_tangent = geom::vcp_linear_uniform(1.0 - 1e-9, 1.0, dim);
    ok &= check(near_tangent <= 1e-3, detail,
                "near-tangent value " + std::to_string(near_tangent) + " at dim " +
                    std::to_string(dim));
  }
  return ok;
}

// --- criterion 4: small-gap asymptotic --------------------------------------
bool asymptotic_expansion(std::string& detail) {
  bool ok = true;
  // The shipped coefficient uses 2^{(n+1)/2}; the alternative prints
  // 2^{(n-1)/2}. Only the former reproduces the exact 1-D constant.
  const double one_d = geom::vcp_nonlinear_asymptotic(1.0, 1.5, 1);
  ok &= check(std::fabs(one_d - 0.5) <= 1e-13, detail, "1-D constant != 0.5");
  for (int dim : {2, 3, 5}) {
    const double at_1e5 = geom::vcp_nonlinear_asymptotic(1.0, 1.0 + 1e-5, dim) /
                          geom::vcp_linear_uniform(1.0, 1.0 + 1e-5, dim);
    ok &= check(at_1e5 >= 0.99 && at_1e5 <= 1.01, detail,
                "ratio " + std::to_string(at_1e5) + " at dim " + std::to_string(dim));
    double previous = std::numeric_limits<double>::infinity();
    for (double gap : {1e-2, 1e-3, 1e-4, 1e-5}) {
      const double ratio = geom::vcp_nonlinear_asymptotic(1.0, 1.0 + gap, dim) /
                           geom::vcp_linear_uniform(1.0, 1.0 + gap, dim);
      ok &= check(std::fabs(ratio - 1.0) < previous, detail,
                  "no convergence at gap " + std::to_string(gap));
      previous = std::fabs(ratio - 1.0);
    }
  }
  if (ok) detail = "selected coefficient variant: 2^{(n+1)/2}, the one consistent with the exact formula";
  return ok;
}

// --- criterion 5: monotonicity of the mean-margin bound ---------------------
bool bound_monotonicity(std::string& detail) {
  bool ok = true;
  for (int dim : {2, 5, 10, 50}) {
    for (double budget : {1.0, 35.0}) {
      double previous = std::numeric_limits<double>::infinity();
      for (int k = 1; k <= 1000 && ok; ++k) {
        const double margin = budget * static_cast<double>(k) / 1001.0;
        const double value = geom::g_of_mean_margin(margin, budget, dim);
        ok &= check(value - previous < 0.0, detail,
                    "non-decreasing difference at dim " + std::to_string(dim) + ", budget " +
                        std::to_string(budget) + ", k " + std::to_string(k));
        previous = value;
      }
    }
  }
  return ok;
}

// --- criterion 6: Jensen bound on random margin multisets -------------------
bool jensen_bound(std::string& detail) {
  rng::Engine engine = rng::make_engine(1006);
  int violations = 0;
  double worst = 0.0;
  int worst_dim = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 2 + static_cast<int>(rng::uniform_below(engine, 9));
    const double budget = 0.5 + 34.5 * rng::uniform01(engine);
    const Index count = 2 + static_cast<Index>(rng::uniform_below(engine, 99));
    double margin_sum = 0.0, value_sum = 0.0;
    for (Index i = 0; i < count; ++i) {
      const double margin = budget * (0.05 + 0.9 * rng::uniform01(engine));
      margin_sum += margin;
      value_sum += geom::g_of_mean_margin(margin, budget, dim);
    }
    const double mean_margin = margin_sum / static_cast<double>(count);
    const double gap = value_sum / static_cast<double>(count) -
                       geom::g_of_mean_margin(mean_margin, budget, dim);
    if (gap < -1e-9) {
      ++violations;
      if (gap < worst) {
        worst = gap;
        worst_dim = dim;
      }
    }
  }
  if (violations == 0) {
    detail = "1000/1000 multisets satisfy the bound";
    return true;
  }
  char buffer[200];
  std::snprintf(buffer, sizeof(buffer),
                "%d/1000 multisets violate the bound (worst %.2e, dim %d): g is not convex in "
                "dim 2 beyond ~0.61 of the budget, so the bound is not universal there",
                violations, worst, worst_dim);
  detail = buffer;
  return false;
}

// --- criterion 7: input gradients vs central differences --------------------
bool gradient_correctness(std::string& detail) {
  rng::Engine engine = rng::make_engine(1007);
  const double step = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    // Alternate between the two experiment shapes.
    const bool five_layer = trial % 2 == 0;
    const Index input_dim = five_layer ? (trial % 4 == 0 ? 9 : 14) : 9;
    const std::vector<Index> widths =
        five_layer ? std::vector<Index>{100, 50, 25, 15, 5} : std::vector<Index>{100, 30};
    const model::MlpModel m =
        model::make_mlp(input_dim, widths, model::Activation::Tanh, 0.0, engine);
    for (int point = 0; point < 10; ++point) {
      Vector x(input_dim);
      rng::fill_standard_normal(x, engine);
      const Vector analytic = model::input_gradient(m, x);
      Vector numeric(input_dim);
      for (Index j = 0; j < input_dim; ++j) {
        Vector lo = x, hi = x;
        lo[j] -= step;
        hi[j] += step;
        numeric[j] = (model::score(m, hi) - model::score(m, lo)) / (2.0 * step);
      }
      const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-12);
      worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / scale);
    }
  }
  detail = "max relative error " + std::to_string(worst);
  return worst <= 1e-4;
}

// --- criterion 8: margin sanity ---------------------------------------------
bool margin_sanity(std::string& detail) {
  rng::Engine engine = rng::make_engine(1008);
  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    const int dim = 2 + static_cast<int>(rng::uniform_below(engine, 7));
    model::LinearModel linear = model::make_linear(dim, engine);
    linear.bias = rng::standard_normal(engine);
    Vector x(dim);
    rng::fill_standard_normal(x, engine);
    const double exact = vcp::margin_exact_linear(linear, x).value;
    const double estimated = vcp::margin_gradient_estimate(model::Model(linear), x).value;
    ok &= check(std::fabs(exact - estimated) <= 1e-12, detail,
                "gradient estimate differs by " + std::to_string(exact - estimated));
  }
  model::LinearModel hand;
  hand.weights.resize(2);
  hand.weights << 3.0, 4.0;
  hand.bias = 0.0;
  Vector x(2);
  x << 1.0, 1.0;
  ok &= check(std::fabs(vcp::margin_exact_linear(hand, x).value - 1.4) <= 1e-15, detail,
              "hand-constructed margin != 1.4");
  return ok;
}

// --- criterion 9: combinatorics and budget rescaling -------------------------
bool combinatorics_and_rescaling(std::string& detail) {
  bool ok = true;
  const dataset::ExpansionSpec spec = dataset::make_expansion_spec(9, 6, true);
  ok &= check(spec.output_dim == 5005, detail,
              "expansion dimension " + std::to_string(spec.output_dim) + " != 5005");
  const double rescaled = vcp::rescale_epsilon(1.5, 9, 5005);
  ok &= check(std::fabs(rescaled - 35.37) <= 0.01, detail,
              "rescaled budget " + std::to_string(rescaled) + " not 35.37 +- 0.01");
  return ok;
}

harness::ExperimentConfig tradeoff_config() {
  harness::ExperimentConfig config;
  harness::SyntheticSpec spec;
  spec.count = 200;
  spec.dim = 2;
  spec.separation = 2.0;
  spec.label_noise = 0.1;
  config.dataset_source = spec;
  config.test_fraction = 0.2;
  config.standardize = true;
  harness::MlpSpec mlp;
  mlp.hidden_widths = {100, 50, 25, 15, 5};
  mlp.activation = model::Activation::Relu;
  mlp.dropout_rate = 0.5;
  config.model.mlp = mlp;
  config.training.optimizer = model::Optimizer::Adam;
  config.training.learning_rate = 1e-3;
  config.training.batch_size = 128;
  config.training.epochs = 2000;
  config.epsilon.mode = harness::EpsilonMode::Fixed;
  config.epsilon.value = 1.0;
  config.vcp.region = vcp::Region::Ball;
  config.vcp.samples = 1000;
  config.checkpoint_every = 100;
  config.seed = 42;
  return config;
}

std::string checkpoints_csv(const std::vector<harness::CheckpointMetrics>& checkpoints) {
  std::ostringstream out;
  harness::write_checkpoints_csv(out, checkpoints);
  return out.str();
}

// Shared between criteria 10 and 11.
struct TradeoffRuns {
  bool ran = false;
  harness::RunResult plain;
  harness::RunResult regularized;
};
TradeoffRuns tradeoff_runs;

// --- criterion 10: desk-scale trade-off reproduction ------------------------
bool tradeoff_reproduction(std::string& detail) {
  const auto [plain, regularized] = harness::run_pair_regularization(tradeoff_config());
  tradeoff_runs = {true, plain, regularized};

  std::vector<double> accuracy, crossing, margin;
  for (const auto& c : plain.checkpoints) {
    accuracy.push_back(c.train_accuracy);
    crossing.push_back(c.mean_vcp);
    margin.push_back(c.mean_margin);
  }
  const double rho_vcp = testing::spearman_rho(accuracy, crossing);
  const double rho_margin = testing::spearman_rho(accuracy, margin);
  const double plain_final = plain.checkpoints.back().mean_vcp;
  const double regularized_final = regularized.checkpoints.back().mean_vcp;

  char buffer[160];
  std::snprintf(buffer, sizeof(buffer),
                "rho(acc,vcp)=%.3f rho(acc,margin)=%.3f final vcp plain=%.4f reg=%.4f",
                rho_vcp, rho_margin, plain_final, regularized_final);
  detail = buffer;
  return rho_vcp > 0.5 && rho_margin < -0.5 && regularized_final <= plain_final;
}

// --- criterion 11: byte-identical rerun --------------------------------------
bool determinism_rerun(std::string& detail) {
  if (!tradeoff_runs.ran) {
    detail = "criterion 10 did not run";
    return false;
  }
  harness::ExperimentConfig config = tradeoff_config();
  config.model.mlp->dropout_rate = 0.0;  // the plain twin, re-run from scratch
  const harness::RunResult rerun = harness::run_experiment(config);
  const std::string first = checkpoints_csv(tradeoff_runs.plain.checkpoints);
  const std::string second = checkpoints_csv(rerun.checkpoints);
  if (first != second) {
    detail = "checkpoints.csv bytes differ";
    return false;
  }
  detail = std::to_string(second.size()) + " CSV bytes identical";
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "special-function fidelity (uniform CDF, symmetry point, reflection)",
       special_function_fidelity},
      {2, "closed form vs Monte-Carlo on the 36-cell shell grid", closed_form_monte_carlo_grid},
      {3, "crossing probability limits (1/2 at zero margin, vanishing near tangency)",
       limit_checks},
      {4, "small-gap asymptotic converges to the exact formula", asymptotic_expansion},
      {5, "mean-margin bound strictly decreasing on 1000-point grids", bound_monotonicity},
      {6, "Jensen bound on 1000 random margin multisets", jensen_bound},
      {7, "input gradients vs central differences on experiment-shaped MLPs",
       gradient_correctness},
      {8, "margin estimates: gradient route equals the exact linear route", margin_sanity},
      {9, "expansion dimension 5005 and budget rescaling 35.37", combinatorics_and_rescaling},
      {10, "desk-scale generalization/explainability trade-off", tradeoff_reproduction},
      {11, "byte-identical checkpoints.csv on rerun", determinism_rerun},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion.number,
                criterion.summary.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures > 0) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
