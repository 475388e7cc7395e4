// Command-line front end: closed-form evaluations, one-shot estimation on
// saved checkpoints, experiment runs, the mean-margin bound curve, and a
// quick oracle self-test. Exit codes: 0 success, 2 config error, 3 data
// error, 4 numerical divergence, 5 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vcplab/geom.hpp"
#include "vcplab/harness.hpp"
#include "vcplab/model.hpp"
#include "vcplab/vcp.hpp"

namespace {

using namespace vcplab;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitIo = 5;

std::string format_value(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

struct AnalyticArgs {
  double gamma = 0.0;
  double epsilon = 1.0;
  int dim = 1;
  std::string region = "shell";
  bool asymptotic = false;
};

int run_analytic(const AnalyticArgs& args) {
  if (args.asymptotic) {
    std::cout << format_value(geom::vcp_nonlinear_asymptotic(args.gamma, args.epsilon, args.dim))
              << "\n";
    return 0;
  }
  const double value = args.region == "shell"
                           ? geom::vcp_linear_uniform(args.gamma, args.epsilon, args.dim)
                           : geom::vcp_linear_uniform_ball(args.gamma, args.epsilon, args.dim);
  std::cout << format_value(value) << "\n";
  if (geom::shell_is_degenerate(args.gamma, args.epsilon))
    std::cerr << "note: degenerate shell (gamma >= epsilon), no valid counterfactual exists\n";
  return 0;
}

struct GcurveArgs {
  int dim = 10;
  double epsilon = 35.0;
  int points = 100;
};

int run_gcurve(const GcurveArgs& args) {
  if (args.points < 1) throw ConfigError("--points must be >= 1");
  std::cout << "gamma,g\n";
  for (int k = 1; k <= args.points; ++k) {
    const double margin =
        args.epsilon * static_cast<double>(k) / static_cast<double>(args.points + 1);
    std::cout << format_value(margin) << ','
              << format_value(geom::g_of_mean_margin(margin, args.epsilon, args.dim)) << "\n";
  }
  return 0;
}

struct EstimateArgs {
  std::string checkpoint_path;
  std::string data;
  std::string label_column = "label";
  std::string missing = "mean-impute";
  bool standardize = false;
  std::string epsilon = "auto";
  long samples = 1000;
  std::string region = "ball";
  std::string out_csv;
  std::optional<std::uint64_t> seed;
};

// Three --data forms: a run config / run.json (full pipeline, train split),
// "synthetic:count=...,dim=...,separation=...,noise=...", or a CSV path.
dataset::Dataset estimate_dataset(const EstimateArgs& args, std::uint64_t seed,
                                  double* auto_epsilon) {
  if (args.data.rfind("synthetic:", 0) == 0) {
    harness::SyntheticSpec spec;
    std::stringstream stream(args.data.substr(10));
    std::string item;
    while (std::getline(stream, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError("synthetic spec items must look like key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (key == "count") {
        spec.count = std::stol(value);
      } else if (key == "dim") {
        spec.dim = std::stol(value);
      } else if (key == "separation") {
        spec.separation = std::stod(value);
      } else if (key == "noise") {
        spec.label_noise = std::stod(value);
      } else {
        throw ConfigError("unknown synthetic spec key '" + key + "'");
      }
    }
    dataset::Dataset data =
        dataset::make_synthetic_gaussians(spec.count, spec.dim, spec.separation, seed);
    if (spec.label_noise > 0.0) dataset::flip_labels(data, spec.label_noise, seed + 1);
    if (args.standardize)
      dataset::standardize_in_place(data, dataset::fit_standardizer(data));
    return data;
  }
  if (args.data.size() > 5 && args.data.substr(args.data.size() - 5) == ".json") {
    const harness::ExperimentConfig config = harness::load_config(args.data);
    harness::PreparedData prepared = harness::prepare_data(config);
    if (auto_epsilon) *auto_epsilon = prepared.resolved_epsilon;
    return std::move(prepared.train);
  }
  const dataset::MissingPolicy policy = args.missing == "drop"
                                            ? dataset::MissingPolicy::Drop
                                            : dataset::MissingPolicy::MeanImpute;
  dataset::Dataset data = dataset::load_csv(args.data, args.label_column, policy);
  if (args.standardize) dataset::standardize_in_place(data, dataset::fit_standardizer(data));
  return data;
}

int run_estimate(const EstimateArgs& args) {
  const model::Checkpoint checkpoint = model::load_checkpoint(args.checkpoint_path);
  const std::uint64_t seed = args.seed.value_or(checkpoint.seed);

  double auto_epsilon = 0.0;
  const dataset::Dataset data = estimate_dataset(args, seed, &auto_epsilon);

  double epsilon;
  if (args.epsilon == "auto") {
    if (auto_epsilon <= 0.0)
      throw ConfigError("--epsilon auto requires --data pointing at a run config");
    epsilon = auto_epsilon;
  } else {
    epsilon = std::stod(args.epsilon);
    if (!(epsilon > 0.0)) throw ConfigError("--epsilon must be positive");
  }

  const vcp::Region region = args.region == "shell" ? vcp::Region::Shell : vcp::Region::Ball;
  const vcp::AggregateVcp agg =
      vcp::aggregate(checkpoint.model, data, epsilon, region, args.samples, seed);

  std::cout << "points " << agg.per_point.size() << "\n";
  std::cout << "epsilon " << format_value(epsilon) << "\n";
  std::cout << "mean_vcp " << format_value(agg.mean_p) << "\n";
  std::cout << "vcp_stderr " << format_value(vcp::mean_standard_error(agg)) << "\n";
  std::cout << "mean_margin " << format_value(agg.mean_margin) << "\n";
  std::cout << "jensen_bound " << format_value(agg.jensen_bound) << "\n";
  std::cout << "excluded_margins " << agg.excluded_margin_count << "\n";
  if (!args.out_csv.empty()) {
    std::ofstream out(args.out_csv);
    if (!out) throw IoError("cannot write '" + args.out_csv + "'");
    vcp::write_aggregate_csv(out, agg);
  }
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  bool no_svg = false;
  bool full = false;
  std::optional<std::uint64_t> seed;
};

harness::ExperimentConfig load_train_config(const TrainArgs& args) {
  harness::ExperimentConfig config = harness::load_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  return config;
}

int run_train(const TrainArgs& args) {
  const harness::ExperimentConfig config = load_train_config(args);
  std::filesystem::create_directories(args.out_dir);
  harness::RunOptions options;
  options.checkpoint_dir = args.out_dir;
  options.allow_full_scale = args.full;
  const harness::RunResult result = harness::run_experiment(config, options);
  harness::emit_results(result, args.out_dir, !args.no_svg);
  std::cout << "wrote " << args.out_dir << "/checkpoints.csv (" << result.checkpoints.size()
            << " checkpoints)\n";
  return 0;
}

int run_pair(const TrainArgs& args) {
  const harness::ExperimentConfig config = load_train_config(args);
  std::filesystem::create_directories(args.out_dir);
  harness::RunOptions options;
  options.checkpoint_dir = args.out_dir;
  options.allow_full_scale = args.full;
  const auto [plain, regularized] = harness::run_pair_regularization(config, options);
  harness::emit_results(plain, args.out_dir + "/plain", !args.no_svg);
  harness::emit_results(regularized, args.out_dir + "/regularized", !args.no_svg);
  std::cout << "plain final mean_vcp " << format_value(plain.checkpoints.back().mean_vcp) << "\n";
  std::cout << "regularized final mean_vcp "
            << format_value(regularized.checkpoints.back().mean_vcp) << "\n";
  return 0;
}

int run_selftest(std::uint64_t seed) {
  int failures = 0;
  const auto report = [&](const char* name, bool ok) {
    std::cout << (ok ? "pass" : "FAIL") << " " << name << "\n";
    if (!ok) ++failures;
  };

  {
    rng::Engine engine = rng::make_engine(seed);
    bool ok = true;
    for (int i = 0; i < 2000 && ok; ++i) {
      const double x = rng::uniform01(engine);
      const double a = 0.25 + 29.75 * rng::uniform01(engine);
      const double b = 0.25 + 29.75 * rng::uniform01(engine);
      ok = std::fabs(specfun::reg_inc_beta(x, {a, b}) +
                     specfun::reg_inc_beta(1.0 - x, {b, a}) - 1.0) <= 1e-12;
    }
    report("incomplete-beta reflection identity", ok);
  }
  {
    bool ok = true;
    for (int dim = 1; dim <= 20 && ok; ++dim) {
      const double near_boundary = geom::vcp_linear_uniform(1e-9, 1.0, dim);
      ok = near_boundary >= 0.4999 && near_boundary <= 0.5;
    }
    report("closed form approaches 1/2 at vanishing margin", ok);
  }
  {
    bool ok = true;
    int cell = 0;
    for (int dim : {2, 5}) {
      for (double ratio : {0.3, 0.7}) {
        rng::Engine engine = rng::derive_stream(seed, 1000 + cell++);
        const geom::Shell shell{Vector::Zero(dim), ratio, 1.0};
        long crossings = 0;
        const long samples = 20000;
        for (long i = 0; i < samples; ++i) {
          const geom::ShellSample s = geom::sample_shell_uniform(shell, engine);
          if (s.point[0] >= ratio) ++crossings;
        }
        const double empirical = static_cast<double>(crossings) / static_cast<double>(samples);
        const double exact = geom::vcp_linear_uniform(ratio, 1.0, dim);
        const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(samples));
        ok = ok && std::fabs(empirical - exact) <= 4.0 * se;
      }
    }
    report("sampler agrees with the closed form", ok);
  }
  {
    const double ratio = geom::vcp_nonlinear_asymptotic(1.0, 1.0 + 1e-5, 3) /
                         geom::vcp_linear_uniform(1.0, 1.0 + 1e-5, 3);
    const bool ok = std::fabs(ratio - 1.0) <= 0.01 &&
                    geom::vcp_nonlinear_asymptotic(0.7, 1.7, 1) == 0.5;
    report("small-gap asymptotic matches the exact formula", ok);
  }
  {
    bool ok = true;
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 200 && ok; ++k) {
      const double value = geom::g_of_mean_margin(35.0 * k / 201.0, 35.0, 10);
      ok = value < previous;
      previous = value;
    }
    report("mean-margin bound is strictly decreasing", ok);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterfactual-probability laboratory"};
  app.require_subcommand(1);

  AnalyticArgs analytic;
  CLI::App* analytic_cmd =
      app.add_subcommand("analytic", "closed-form crossing probability for a linear boundary");
  analytic_cmd->add_option("--gamma", analytic.gamma, "margin (distance to the boundary)")
      ->required();
  analytic_cmd->add_option("--epsilon", analytic.epsilon, "perturbation budget")->required();
  analytic_cmd->add_option("--dim", analytic.dim, "feature-space dimension")->required();
  analytic_cmd->add_option("--region", analytic.region, "conditioning region (default shell)")
      ->check(CLI::IsMember({"ball", "shell"}));
  analytic_cmd->add_flag("--asymptotic", analytic.asymptotic,
                         "small-gap asymptotic instead of the exact value");

  EstimateArgs estimate;
  CLI::App* estimate_cmd =
      app.add_subcommand("estimate", "one-shot estimate for a saved checkpoint");
  estimate_cmd->add_option("--checkpoint", estimate.checkpoint_path, "checkpoint file")
      ->required();
  estimate_cmd
      ->add_option("--data", estimate.data,
                   "run config .json, CSV path, or synthetic:count=..,dim=..,separation=..")
      ->required();
  estimate_cmd->add_option("--label-column", estimate.label_column, "CSV label column");
  estimate_cmd->add_option("--missing", estimate.missing, "CSV missing-value policy")
      ->check(CLI::IsMember({"drop", "mean-impute"}));
  estimate_cmd->add_flag("--standardize", estimate.standardize,
                         "standardize CSV/synthetic features before estimating");
  estimate_cmd->add_option("--epsilon", estimate.epsilon, "budget value, or 'auto' (run config)");
  estimate_cmd->add_option("--samples", estimate.samples, "Monte-Carlo samples per point");
  estimate_cmd->add_option("--region", estimate.region, "ball or shell")
      ->check(CLI::IsMember({"ball", "shell"}));
  estimate_cmd->add_option("--out", estimate.out_csv, "write the per-point CSV here");
  std::uint64_t estimate_seed = 0;
  CLI::Option* estimate_seed_opt = estimate_cmd->add_option(
      "--seed", estimate_seed, "override the checkpoint's stream seed");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "run one experiment from a config");
  train_cmd->add_option("--config", train.config_path, "experiment config JSON")->required();
  train_cmd->add_option("--out", train.out_dir, "output directory")->required();
  train_cmd->add_flag("--no-svg", train.no_svg, "skip curves.svg");
  train_cmd->add_flag("--full", train.full, "allow full-scale epoch counts");
  std::uint64_t train_seed = 0;
  CLI::Option* train_seed_opt =
      train_cmd->add_option("--seed", train_seed, "override the config seed");

  TrainArgs pair;
  CLI::App* pair_cmd =
      app.add_subcommand("pair", "plain-versus-dropout twin runs from one config");
  pair_cmd->add_option("--config", pair.config_path, "experiment config JSON")->required();
  pair_cmd->add_option("--out", pair.out_dir, "output directory")->required();
  pair_cmd->add_flag("--no-svg", pair.no_svg, "skip curves.svg");
  pair_cmd->add_flag("--full", pair.full, "allow full-scale epoch counts");
  std::uint64_t pair_seed = 0;
  CLI::Option* pair_seed_opt =
      pair_cmd->add_option("--seed", pair_seed, "override the config seed");

  GcurveArgs gcurve;
  CLI::App* gcurve_cmd =
      app.add_subcommand("gcurve", "mean-margin bound curve g over (0, epsilon)");
  gcurve_cmd->add_option("--dim", gcurve.dim, "feature-space dimension")->required();
  gcurve_cmd->add_option("--epsilon", gcurve.epsilon, "perturbation budget")->required();
  gcurve_cmd->add_option("--points", gcurve.points, "grid size");

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run the oracle-agreement checks");
  std::uint64_t selftest_seed = 20240901;
  selftest_cmd->add_option("--seed", selftest_seed, "seed for the randomized checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*analytic_cmd) return run_analytic(analytic);
    if (*estimate_cmd) {
      if (*estimate_seed_opt) estimate.seed = estimate_seed;
      return run_estimate(estimate);
    }
    if (*train_cmd) {
      if (*train_seed_opt) train.seed = train_seed;
      return run_train(train);
    }
    if (*pair_cmd) {
      if (*pair_seed_opt) pair.seed = pair_seed;
      return run_pair(pair);
    }
    if (*gcurve_cmd) return run_gcurve(gcurve);
    if (*selftest_cmd) return run_selftest(selftest_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const harness::RunDivergence& e) {
    std::cerr << "error: divergence: " << e.what() << " (" << e.checkpoints.size()
              << " checkpoints completed)\n";
    return kExitDivergence;
  } catch (const DivergenceError& e) {
    std::cerr << "error: divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
