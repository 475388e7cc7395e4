#ifndef VCPLAB_HARNESS_HPP
#define VCPLAB_HARNESS_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcplab/dataset.hpp"
#include "vcplab/error.hpp"
#include "vcplab/model.hpp"
#include "vcplab/vcp.hpp"

// Experiment runner: builds a dataset pipeline from a JSON config, trains a
// classifier while checkpointing accuracy / mean margin / mean crossing
// probability, and emits plot-ready results. Everything is a deterministic
// function of the config (including its seed).

namespace vcplab::harness {

inline constexpr const char* kCodeVersion = "vcplab 0.1.0";

/// Epoch counts above this require the explicit full-scale opt-in; the
/// per-checkpoint Monte-Carlo cost grows linearly with them.
inline constexpr long kFullScaleEpochLimit = 3000;

struct SyntheticSpec {
  Index count = 200;
  Index dim = 2;
  double separation = 2.0;
  double label_noise = 0.0;
};

struct CsvSpec {
  std::string path;
  std::string label_column = "label";
  dataset::MissingPolicy missing_policy = dataset::MissingPolicy::MeanImpute;
};

using DatasetSource = std::variant<CsvSpec, SyntheticSpec>;

struct ExpansionConfig {
  int degree = 1;
  bool include_bias = true;
};

enum class EpsilonMode { Fixed, Auto };

/// Fixed: use `value` as the budget. Auto: treat `value` as the budget in
/// the raw feature space and rescale it by sqrt(n'/n) into the final space.
struct EpsilonPolicy {
  EpsilonMode mode = EpsilonMode::Fixed;
  double value = 1.0;
};

struct MlpSpec {
  std::vector<Index> hidden_widths;
  model::Activation activation = model::Activation::Tanh;
  // Unset means 0 for plain runs; pair runs regularize with 0.5 by default.
  std::optional<double> dropout_rate;
};

/// Linear when mlp is absent.
struct ModelSpec {
  std::optional<MlpSpec> mlp;
};

struct VcpSettings {
  vcp::Region region = vcp::Region::Ball;
  long samples = 1000;
};

struct ExperimentConfig {
  DatasetSource dataset_source = SyntheticSpec{};
  double test_fraction = 0.2;
  bool standardize = true;
  std::optional<ExpansionConfig> expansion;
  ModelSpec model;
  model::TrainingConfig training;
  EpsilonPolicy epsilon;
  VcpSettings vcp;
  long checkpoint_every = 100;
  std::uint64_t seed = 0;
};

struct CheckpointMetrics {
  long epoch = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double mean_margin = 0.0;
  double mean_vcp = 0.0;
  double vcp_stderr = 0.0;
  Index excluded_margin_count = 0;
};

struct RunResult {
  ExperimentConfig config;
  double resolved_epsilon = 0.0;
  std::vector<CheckpointMetrics> checkpoints;
  double wall_time_seconds = 0.0;
  std::string code_version = kCodeVersion;
};

/// Divergence during a run; carries the checkpoints completed before.
struct RunDivergence : DivergenceError {
  RunDivergence(const std::string& message, std::vector<CheckpointMetrics> completed)
      : DivergenceError(message), checkpoints(std::move(completed)) {}
  std::vector<CheckpointMetrics> checkpoints;
};

/// Strict parser: unknown keys anywhere are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Accepts a plain config document or a run.json ({"config": ...}) wrapper.
ExperimentConfig load_config(const std::string& path);

/// The standardized/expanded train and test splits plus the resolved budget;
/// exposed so `estimate` can rebuild exactly what a run used.
struct PreparedData {
  dataset::Dataset train;
  dataset::Dataset test;
  Index raw_dim = 0;
  double resolved_epsilon = 0.0;
};

PreparedData prepare_data(const ExperimentConfig& config);

struct RunOptions {
  std::string checkpoint_dir;  // when set, epoch_<t>.ckpt dumps are written there
  bool allow_full_scale = false;
};

/// Trains per config, recording metrics at epoch 0, every checkpoint_every
/// epochs, and the final epoch, all in inference mode on the training split
/// (test accuracy is logged for context).
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Two runs identical except the dropout rate: 0 versus the configured rate
/// (0.5 when the config leaves it at 0). Requires an MLP model.
std::pair<RunResult, RunResult> run_pair_regularization(const ExperimentConfig& config,
                                                        const RunOptions& options = {});

void write_checkpoints_csv(std::ostream& out, const std::vector<CheckpointMetrics>& checkpoints);
std::vector<CheckpointMetrics> read_checkpoints_csv(std::istream& in);

/// Writes checkpoints.csv, run.json, and (optionally) curves.svg.
void emit_results(const RunResult& result, const std::string& out_dir, bool write_svg = true);

}  // namespace vcplab::harness

#endif
