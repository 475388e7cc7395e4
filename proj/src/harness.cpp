#include "vcplab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace vcplab::harness {

namespace {

using nlohmann::json;

// Substream tags; every random decision of a run draws from its own
// (seed, tag) stream so that config changes never shift unrelated streams.
constexpr std::uint64_t kStreamData = 0x64617461;   // synthetic sample generation
constexpr std::uint64_t kStreamNoise = 0x6e6f6973;  // label flips
constexpr std::uint64_t kStreamSplit = 0x73706c74;  // train/test permutation
constexpr std::uint64_t kStreamInit = 0x696e6974;   // parameter initialization
constexpr std::uint64_t kStreamTrain = 0x7472616e;  // batch shuffling and dropout

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <class T>
T require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' in " + where + " has the wrong type");
  }
}

template <class T>
T optional_or(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' in " + where + " has the wrong type");
  }
}

DatasetSource dataset_source_from_json(const json& j) {
  const std::string type = require<std::string>(j, "type", "dataset");
  if (type == "synthetic") {
    require_keys(j, {"type", "count", "dim", "separation", "label_noise"}, "dataset");
    SyntheticSpec spec;
    spec.count = require<Index>(j, "count", "dataset");
    spec.dim = require<Index>(j, "dim", "dataset");
    spec.separation = require<double>(j, "separation", "dataset");
    spec.label_noise = optional_or<double>(j, "label_noise", "dataset", 0.0);
    return spec;
  }
  if (type == "csv") {
    require_keys(j, {"type", "path", "label_column", "missing_policy"}, "dataset");
    CsvSpec spec;
    spec.path = require<std::string>(j, "path", "dataset");
    spec.label_column = optional_or<std::string>(j, "label_column", "dataset", "label");
    const std::string policy =
        optional_or<std::string>(j, "missing_policy", "dataset", "mean-impute");
    if (policy == "drop") {
      spec.missing_policy = dataset::MissingPolicy::Drop;
    } else if (policy == "mean-impute") {
      spec.missing_policy = dataset::MissingPolicy::MeanImpute;
    } else {
      throw ConfigError("dataset.missing_policy must be 'drop' or 'mean-impute'");
    }
    return spec;
  }
  throw ConfigError("dataset.type must be 'synthetic' or 'csv'");
}

json dataset_source_to_json(const DatasetSource& source) {
  json j;
  if (const auto* synthetic = std::get_if<SyntheticSpec>(&source)) {
    j["type"] = "synthetic";
    j["count"] = synthetic->count;
    j["dim"] = synthetic->dim;
    j["separation"] = synthetic->separation;
    j["label_noise"] = synthetic->label_noise;
  } else {
    const auto& csv = std::get<CsvSpec>(source);
    j["type"] = "csv";
    j["path"] = csv.path;
    j["label_column"] = csv.label_column;
    j["missing_policy"] =
        csv.missing_policy == dataset::MissingPolicy::Drop ? "drop" : "mean-impute";
  }
  return j;
}

model::Activation activation_from_string(const std::string& name, const std::string& where) {
  if (name == "tanh") return model::Activation::Tanh;
  if (name == "relu") return model::Activation::Relu;
  throw ConfigError(where + ".activation must be 'tanh' or 'relu'");
}

void validate_config(const ExperimentConfig& config) {
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  if (config.training.epochs < 1) throw ConfigError("training.epochs must be >= 1");
  if (!(config.training.learning_rate > 0.0))
    throw ConfigError("training.learning_rate must be > 0");
  if (config.training.batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (config.checkpoint_every < 1 || config.checkpoint_every > config.training.epochs)
    throw ConfigError("checkpoint_every must lie in [1, training.epochs]");
  if (config.vcp.samples < 1) throw ConfigError("vcp.samples must be >= 1");
  if (!(config.epsilon.value > 0.0)) throw ConfigError("epsilon.value must be > 0");
  if (config.expansion && config.expansion->degree < 1)
    throw ConfigError("expansion.degree must be >= 1");
  if (config.model.mlp) {
    if (config.model.mlp->hidden_widths.empty())
      throw ConfigError("model.layer_widths must not be empty");
    for (Index w : config.model.mlp->hidden_widths)
      if (w < 1) throw ConfigError("model.layer_widths entries must be >= 1");
    if (config.model.mlp->dropout_rate &&
        !(*config.model.mlp->dropout_rate >= 0.0 && *config.model.mlp->dropout_rate < 1.0))
      throw ConfigError("model.dropout_rate must lie in [0, 1)");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  require_keys(j,
               {"dataset", "test_fraction", "standardize", "expansion", "model", "training",
                "epsilon", "vcp", "checkpoint_every", "seed"},
               "config");
  ExperimentConfig config;
  if (!j.contains("dataset")) throw ConfigError("missing key 'dataset' in config");
  config.dataset_source = dataset_source_from_json(j.at("dataset"));
  config.test_fraction = optional_or<double>(j, "test_fraction", "config", 0.2);
  config.standardize = optional_or<bool>(j, "standardize", "config", true);

  if (j.contains("expansion") && !j.at("expansion").is_null()) {
    const json& e = j.at("expansion");
    require_keys(e, {"degree", "include_bias"}, "expansion");
    ExpansionConfig expansion;
    expansion.degree = require<int>(e, "degree", "expansion");
    expansion.include_bias = optional_or<bool>(e, "include_bias", "expansion", true);
    config.expansion = expansion;
  }

  if (!j.contains("model")) throw ConfigError("missing key 'model' in config");
  const json& m = j.at("model");
  const std::string model_type = require<std::string>(m, "type", "model");
  if (model_type == "linear") {
    require_keys(m, {"type"}, "model");
  } else if (model_type == "mlp") {
    require_keys(m, {"type", "layer_widths", "activation", "dropout_rate"}, "model");
    MlpSpec mlp;
    mlp.hidden_widths = require<std::vector<Index>>(m, "layer_widths", "model");
    mlp.activation =
        activation_from_string(optional_or<std::string>(m, "activation", "model", "tanh"), "model");
    if (m.contains("dropout_rate") && !m.at("dropout_rate").is_null())
      mlp.dropout_rate = require<double>(m, "dropout_rate", "model");
    config.model.mlp = std::move(mlp);
  } else {
    throw ConfigError("model.type must be 'linear' or 'mlp'");
  }

  if (!j.contains("training")) throw ConfigError("missing key 'training' in config");
  const json& t = j.at("training");
  require_keys(t,
               {"optimizer", "learning_rate", "batch_size", "epochs", "adam_beta1", "adam_beta2",
                "adam_epsilon"},
               "training");
  const std::string optimizer = require<std::string>(t, "optimizer", "training");
  if (optimizer == "sgd") {
    config.training.optimizer = model::Optimizer::Sgd;
  } else if (optimizer == "adam") {
    config.training.optimizer = model::Optimizer::Adam;
  } else {
    throw ConfigError("training.optimizer must be 'sgd' or 'adam'");
  }
  config.training.learning_rate = require<double>(t, "learning_rate", "training");
  config.training.batch_size = optional_or<Index>(t, "batch_size", "training", 128);
  config.training.epochs = require<long>(t, "epochs", "training");
  config.training.adam_beta1 = optional_or<double>(t, "adam_beta1", "training", 0.9);
  config.training.adam_beta2 = optional_or<double>(t, "adam_beta2", "training", 0.999);
  config.training.adam_epsilon = optional_or<double>(t, "adam_epsilon", "training", 1e-8);

  if (!j.contains("epsilon")) throw ConfigError("missing key 'epsilon' in config");
  const json& e = j.at("epsilon");
  require_keys(e, {"mode", "value"}, "epsilon");
  const std::string mode = require<std::string>(e, "mode", "epsilon");
  if (mode == "fixed") {
    config.epsilon.mode = EpsilonMode::Fixed;
  } else if (mode == "auto") {
    config.epsilon.mode = EpsilonMode::Auto;
  } else {
    throw ConfigError("epsilon.mode must be 'fixed' or 'auto'");
  }
  config.epsilon.value = require<double>(e, "value", "epsilon");

  if (j.contains("vcp")) {
    const json& v = j.at("vcp");
    require_keys(v, {"region", "samples"}, "vcp");
    const std::string region = optional_or<std::string>(v, "region", "vcp", "ball");
    if (region == "ball") {
      config.vcp.region = vcp::Region::Ball;
    } else if (region == "shell") {
      config.vcp.region = vcp::Region::Shell;
    } else {
      throw ConfigError("vcp.region must be 'ball' or 'shell'");
    }
    config.vcp.samples = optional_or<long>(v, "samples", "vcp", 1000);
  }

  config.checkpoint_every = optional_or<long>(j, "checkpoint_every", "config", 100);
  config.seed = optional_or<std::uint64_t>(j, "seed", "config", 0);

  validate_config(config);
  config.training.dropout_rate =
      config.model.mlp ? config.model.mlp->dropout_rate.value_or(0.0) : 0.0;
  config.training.seed = config.seed;
  return config;
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  j["dataset"] = dataset_source_to_json(config.dataset_source);
  j["test_fraction"] = config.test_fraction;
  j["standardize"] = config.standardize;
  if (config.expansion) {
    j["expansion"] = {{"degree", config.expansion->degree},
                      {"include_bias", config.expansion->include_bias}};
  } else {
    j["expansion"] = nullptr;
  }
  if (config.model.mlp) {
    j["model"] = {{"type", "mlp"},
                  {"layer_widths", config.model.mlp->hidden_widths},
                  {"activation",
                   config.model.mlp->activation == model::Activation::Tanh ? "tanh" : "relu"},
                  {"dropout_rate", config.model.mlp->dropout_rate
                                       ? nlohmann::json(*config.model.mlp->dropout_rate)
                                       : nlohmann::json(nullptr)}};
  } else {
    j["model"] = {{"type", "linear"}};
  }
  j["training"] = {
      {"optimizer", config.training.optimizer == model::Optimizer::Sgd ? "sgd" : "adam"},
      {"learning_rate", config.training.learning_rate},
      {"batch_size", config.training.batch_size},
      {"epochs", config.training.epochs},
      {"adam_beta1", config.training.adam_beta1},
      {"adam_beta2", config.training.adam_beta2},
      {"adam_epsilon", config.training.adam_epsilon}};
  j["epsilon"] = {{"mode", config.epsilon.mode == EpsilonMode::Fixed ? "fixed" : "auto"},
                  {"value", config.epsilon.value}};
  j["vcp"] = {{"region", config.vcp.region == vcp::Region::Ball ? "ball" : "shell"},
              {"samples", config.vcp.samples}};
  j["checkpoint_every"] = config.checkpoint_every;
  j["seed"] = config.seed;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    file >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + std::string(e.what()));
  }
  if (j.is_object() && j.contains("config")) return config_from_json(j.at("config"));
  return config_from_json(j);
}

PreparedData prepare_data(const ExperimentConfig& config) {
  dataset::Dataset raw;
  if (const auto* synthetic = std::get_if<SyntheticSpec>(&config.dataset_source)) {
    raw = dataset::make_synthetic_gaussians(synthetic->count, synthetic->dim,
                                            synthetic->separation,
                                            rng::derive_seed(config.seed, kStreamData));
    if (synthetic->label_noise > 0.0)
      dataset::flip_labels(raw, synthetic->label_noise,
                           rng::derive_seed(config.seed, kStreamNoise));
  } else {
    const auto& csv = std::get<CsvSpec>(config.dataset_source);
    raw = dataset::load_csv(csv.path, csv.label_column, csv.missing_policy);
  }

  PreparedData prepared;
  prepared.raw_dim = raw.dim();
  auto [train, test] = dataset::split(raw, config.test_fraction,
                                      rng::derive_seed(config.seed, kStreamSplit));

  if (config.standardize) {
    const dataset::StandardizationStats stats = dataset::fit_standardizer(train);
    dataset::standardize_in_place(train, stats);
    dataset::standardize_in_place(test, stats);
  }

  if (config.expansion) {
    const dataset::ExpansionSpec spec = dataset::make_expansion_spec(
        train.dim(), config.expansion->degree, config.expansion->include_bias);
    train.features = dataset::expand_polynomial_rows(train.features, spec);
    test.features = dataset::expand_polynomial_rows(test.features, spec);
    train.feature_names.clear();
    test.feature_names.clear();
  }

  prepared.resolved_epsilon =
      config.epsilon.mode == EpsilonMode::Fixed
          ? config.epsilon.value
          : vcp::rescale_epsilon(config.epsilon.value, prepared.raw_dim, train.dim());
  prepared.train = std::move(train);
  prepared.test = std::move(test);
  return prepared;
}

namespace {

CheckpointMetrics measure_checkpoint(const model::Model& m, const PreparedData& data,
                                     const ExperimentConfig& config, long epoch) {
  CheckpointMetrics metrics;
  metrics.epoch = epoch;
  metrics.train_accuracy = model::accuracy(m, data.train);
  metrics.test_accuracy = model::accuracy(m, data.test);
  const vcp::AggregateVcp agg =
      vcp::aggregate(m, data.train, data.resolved_epsilon, config.vcp.region, config.vcp.samples,
                     config.seed);
  metrics.mean_margin = agg.mean_margin;
  metrics.mean_vcp = agg.mean_p;
  metrics.vcp_stderr = vcp::mean_standard_error(agg);
  metrics.excluded_margin_count = agg.excluded_margin_count;
  return metrics;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate_config(config);
  if (config.training.epochs > kFullScaleEpochLimit && !options.allow_full_scale)
    throw ConfigError("training.epochs exceeds the desk-scale limit (" +
                      std::to_string(kFullScaleEpochLimit) +
                      "); pass the full-scale opt-in to run anyway");

  const auto start = std::chrono::steady_clock::now();

  // Resolve the optional dropout rate so the config echo pins the rate the
  // run actually used.
  ExperimentConfig resolved = config;
  if (resolved.model.mlp) {
    resolved.model.mlp->dropout_rate = resolved.model.mlp->dropout_rate.value_or(0.0);
    resolved.training.dropout_rate = *resolved.model.mlp->dropout_rate;
  } else {
    resolved.training.dropout_rate = 0.0;
  }
  resolved.training.seed = resolved.seed;

  const PreparedData data = prepare_data(resolved);

  rng::Engine init_engine = rng::derive_stream(resolved.seed, kStreamInit);
  model::Model m;
  if (resolved.model.mlp) {
    m = model::make_mlp(data.train.dim(), resolved.model.mlp->hidden_widths,
                        resolved.model.mlp->activation, *resolved.model.mlp->dropout_rate,
                        init_engine);
  } else {
    m = model::make_linear(data.train.dim(), init_engine);
  }

  model::OptimizerState state = std::visit(
      [](const auto& concrete) { return model::make_optimizer_state(concrete); }, m);

  RunResult result;
  result.config = resolved;
  result.resolved_epsilon = data.resolved_epsilon;

  const auto checkpoint = [&](long epoch) {
    result.checkpoints.push_back(measure_checkpoint(m, data, resolved, epoch));
    if (!options.checkpoint_dir.empty()) {
      const std::string path =
          options.checkpoint_dir + "/epoch_" + std::to_string(epoch) + ".ckpt";
      model::save_checkpoint({m, epoch, resolved.seed}, path);
    }
  };

  rng::Engine train_engine = rng::derive_stream(resolved.seed, kStreamTrain);
  checkpoint(0);
  for (long epoch = 1; epoch <= resolved.training.epochs; ++epoch) {
    try {
      model::train_epoch(m, state, data.train, resolved.training, train_engine, epoch);
    } catch (const DivergenceError& e) {
      throw RunDivergence(e.what(), result.checkpoints);
    }
    if (epoch % resolved.checkpoint_every == 0 || epoch == resolved.training.epochs)
      checkpoint(epoch);
  }

  result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::pair<RunResult, RunResult> run_pair_regularization(const ExperimentConfig& config,
                                                        const RunOptions& options) {
  if (!config.model.mlp)
    throw ConfigError("run_pair_regularization requires model.type = 'mlp'");

  ExperimentConfig plain = config;
  plain.model.mlp->dropout_rate = 0.0;
  plain.training.dropout_rate = 0.0;

  // The regularized twin uses the configured rate, falling back to 0.5 when
  // the config leaves it unset.
  ExperimentConfig regularized = config;
  const double rate = config.model.mlp->dropout_rate.value_or(0.5);
  regularized.model.mlp->dropout_rate = rate;
  regularized.training.dropout_rate = rate;

  RunOptions plain_options = options;
  RunOptions reg_options = options;
  if (!options.checkpoint_dir.empty()) {
    plain_options.checkpoint_dir = options.checkpoint_dir + "/plain";
    reg_options.checkpoint_dir = options.checkpoint_dir + "/regularized";
    std::filesystem::create_directories(plain_options.checkpoint_dir);
    std::filesystem::create_directories(reg_options.checkpoint_dir);
  }
  return {run_experiment(plain, plain_options), run_experiment(regularized, reg_options)};
}

void write_checkpoints_csv(std::ostream& out,
                           const std::vector<CheckpointMetrics>& checkpoints) {
  out << "epoch,train_acc,test_acc,mean_margin,mean_vcp,vcp_stderr,excluded_margins\n";
  for (const CheckpointMetrics& c : checkpoints) {
    out << c.epoch << ',' << format_double(c.train_accuracy) << ','
        << format_double(c.test_accuracy) << ',' << format_double(c.mean_margin) << ','
        << format_double(c.mean_vcp) << ',' << format_double(c.vcp_stderr) << ','
        << c.excluded_margin_count << '\n';
  }
}

std::vector<CheckpointMetrics> read_checkpoints_csv(std::istream& in) {
  std::vector<CheckpointMetrics> checkpoints;
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoints CSV is empty");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream stream(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw DataError("checkpoints CSV row has " +
                                           std::to_string(cells.size()) + " cells, expected 7");
    CheckpointMetrics c;
    c.epoch = std::stol(cells[0]);
    c.train_accuracy = std::stod(cells[1]);
    c.test_accuracy = std::stod(cells[2]);
    c.mean_margin = std::stod(cells[3]);
    c.mean_vcp = std::stod(cells[4]);
    c.vcp_stderr = std::stod(cells[5]);
    c.excluded_margin_count = std::stol(cells[6]);
    checkpoints.push_back(c);
  }
  return checkpoints;
}

namespace {

// Minimal two-series line plot; the CSV is the canonical output.
void write_curves_svg(const std::string& path, const std::vector<CheckpointMetrics>& checkpoints) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");

  const double width = 640, height = 400, margin = 50;
  double max_epoch = 1, max_value = 1e-12;
  for (const auto& c : checkpoints) {
    max_epoch = std::max(max_epoch, static_cast<double>(c.epoch));
    max_value = std::max(max_value, c.mean_vcp);
    if (std::isfinite(c.mean_margin)) max_value = std::max(max_value, c.mean_margin);
  }
  const auto x_of = [&](double epoch) {
    return margin + (width - 2 * margin) * epoch / max_epoch;
  };
  const auto y_of = [&](double value) {
    return height - margin - (height - 2 * margin) * value / max_value;
  };
  const auto polyline = [&](const char* color, auto&& accessor) {
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& c : checkpoints) {
      const double v = accessor(c);
      if (!std::isfinite(v)) continue;
      out << x_of(static_cast<double>(c.epoch)) << ',' << y_of(v) << ' ';
    }
    out << "\"/>\n";
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  polyline("#d62728", [](const CheckpointMetrics& c) { return c.mean_vcp; });
  polyline("#1f77b4", [](const CheckpointMetrics& c) { return c.mean_margin; });
  out << "  <text x=\"" << width - margin << "\" y=\"" << height - margin + 30
      << "\" text-anchor=\"end\" font-size=\"12\">epoch</text>\n";
  out << "  <text x=\"" << margin + 8 << "\" y=\"" << margin << "\" font-size=\"12\" fill=\"#d62728\">mean_vcp</text>\n";
  out << "  <text x=\"" << margin + 8 << "\" y=\"" << margin + 16
      << "\" font-size=\"12\" fill=\"#1f77b4\">mean_margin</text>\n";
  out << "</svg>\n";
}

}  // namespace

void emit_results(const RunResult& result, const std::string& out_dir, bool write_svg) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

  {
    const std::string path = out_dir + "/checkpoints.csv";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_checkpoints_csv(out, result.checkpoints);
    if (!out) throw IoError("failed writing '" + path + "'");
  }
  {
    const std::string path = out_dir + "/run.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    json j;
    j["config"] = config_to_json(result.config);
    j["resolved_epsilon"] = result.resolved_epsilon;
    j["wall_time_seconds"] = result.wall_time_seconds;
    j["code_version"] = result.code_version;
    out << j.dump(1) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
  }
  if (write_svg) write_curves_svg(out_dir + "/curves.svg", result.checkpoints);
}

}  // namespace vcplab::harness
