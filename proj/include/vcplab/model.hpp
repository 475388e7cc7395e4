#ifndef VCPLAB_MODEL_HPP
#define VCPLAB_MODEL_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "vcplab/dataset.hpp"
#include "vcplab/rng.hpp"
#include "vcplab/types.hpp"

// From-scratch binary classifiers with real-valued scores: logistic
// regression and multilayer perceptrons with inverted dropout, trained by
// mini-batch SGD or Adam on the binary cross-entropy of the sigmoid score.
// Inference operations (score, classify, input_gradient, accuracy) never
// apply dropout and are safe to call concurrently on an immutable model.

namespace vcplab::model {

enum class Activation { Tanh, Relu };
enum class Optimizer { Sgd, Adam };

struct LinearModel {
  Vector weights;
  double bias = 0.0;

  Index input_dim() const { return weights.size(); }
};

struct MlpLayer {
  Matrix weights;  // output_dim x input_dim
  Vector bias;
};

struct MlpModel {
  std::vector<MlpLayer> layers;  // hidden layers followed by the scalar output layer
  Activation activation = Activation::Tanh;
  double dropout_rate = 0.0;  // configured training rate, echoed into checkpoints

  Index input_dim() const { return layers.front().weights.cols(); }
  std::vector<Index> hidden_widths() const;
};

using Model = std::variant<LinearModel, MlpModel>;

struct TrainingConfig {
  Optimizer optimizer = Optimizer::Sgd;
  double learning_rate = 1e-3;
  Index batch_size = 128;
  long epochs = 1;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

/// Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
LinearModel make_linear(Index input_dim, rng::Engine& engine);
MlpModel make_mlp(Index input_dim, const std::vector<Index>& hidden_widths,
                  Activation activation, double dropout_rate, rng::Engine& engine);

double score(const LinearModel& model, const VectorRef& x);
double score(const MlpModel& model, const VectorRef& x);
double score(const Model& model, const VectorRef& x);

Vector score_batch(const LinearModel& model, const MatrixRef& inputs);
Vector score_batch(const MlpModel& model, const MatrixRef& inputs);
Vector score_batch(const Model& model, const MatrixRef& inputs);

/// 1 iff score(x) >= 0 (a score of exactly zero classifies as 1).
int classify(const LinearModel& model, const VectorRef& x);
int classify(const MlpModel& model, const VectorRef& x);
int classify(const Model& model, const VectorRef& x);

/// Gradient of the score with respect to the input, by reverse-mode
/// differentiation through the network (the weight vector for linear models).
Vector input_gradient(const LinearModel& model, const VectorRef& x);
Vector input_gradient(const MlpModel& model, const VectorRef& x);
Vector input_gradient(const Model& model, const VectorRef& x);

double accuracy(const LinearModel& model, const dataset::Dataset& data);
double accuracy(const MlpModel& model, const dataset::Dataset& data);
double accuracy(const Model& model, const dataset::Dataset& data);

Index input_dim(const Model& model);

/// Per-parameter-block first/second moment accumulators plus the shared
/// step counter. Blocks mirror the model's layer shapes; linear models use
/// a single block.
struct OptimizerState {
  std::vector<Matrix> weight_m, weight_v;
  std::vector<Vector> bias_m, bias_v;
  long step = 0;
};

OptimizerState make_optimizer_state(const LinearModel& model);
OptimizerState make_optimizer_state(const MlpModel& model);

/// One optimizer update on a single parameter block, step already advanced
/// to the 1-based update index. Adam uses bias-corrected moments; SGD
/// ignores the moment buffers.
void optimizer_step_block(Eigen::Ref<Matrix> param, const MatrixRef& grad, Eigen::Ref<Matrix> m,
                          Eigen::Ref<Matrix> v, long step, const TrainingConfig& config);

/// One full pass over the shuffled training set in mini-batches. Dropout
/// (inverted, rate from config) is active only here and only for MLPs.
/// Returns the mean batch loss. epoch_index is used for error context only.
double train_epoch(LinearModel& model, OptimizerState& state, const dataset::Dataset& train,
                   const TrainingConfig& config, rng::Engine& engine, long epoch_index = 0);
double train_epoch(MlpModel& model, OptimizerState& state, const dataset::Dataset& train,
                   const TrainingConfig& config, rng::Engine& engine, long epoch_index = 0);
double train_epoch(Model& model, OptimizerState& state, const dataset::Dataset& train,
                   const TrainingConfig& config, rng::Engine& engine, long epoch_index = 0);

/// Self-describing JSON parameter dump; round-trips parameters bit-exactly.
struct Checkpoint {
  Model model;
  long epoch = 0;
  std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vcplab::model

#endif
