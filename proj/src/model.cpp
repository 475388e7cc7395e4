#include "vcplab/model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "vcplab/error.hpp"

namespace vcplab::model {

namespace {

using nlohmann::json;

void check_dim(Index expected, Index got, const char* where) {
  if (expected != got)
    throw DomainError(std::string(where) + ": expected dimension " + std::to_string(expected) +
                      ", got " + std::to_string(got));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::log1p(std::exp(-std::fabs(z))) + std::max(z, 0.0); }

Matrix activate(const Matrix& z, Activation activation) {
  if (activation == Activation::Tanh) return z.array().tanh().matrix();
  return z.cwiseMax(0.0);
}

// Derivative of the activation expressed through its own output value
// (valid for tanh and the rectifier).
Matrix activation_derivative(const Matrix& act, Activation activation) {
  if (activation == Activation::Tanh) return (1.0 - act.array().square()).matrix();
  return (act.array() > 0.0).cast<double>().matrix();
}

struct MlpForwardCache {
  std::vector<Matrix> act_raw;   // per hidden layer, before dropout
  std::vector<Matrix> act_out;   // per hidden layer, as fed to the next layer
  std::vector<Matrix> masks;     // empty when dropout is off
};

// Batched forward pass; rows of `inputs` are samples. When dropout_rate > 0,
// inverted-dropout masks are drawn from `engine` for every hidden layer.
Vector mlp_forward(const MlpModel& model, const MatrixRef& inputs, MlpForwardCache* cache,
                   double dropout_rate, rng::Engine* engine) {
  const std::size_t hidden_count = model.layers.size() - 1;
  Matrix current = inputs;
  for (std::size_t l = 0; l < hidden_count; ++l) {
    const MlpLayer& layer = model.layers[l];
    Matrix z = current * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    Matrix act = activate(z, model.activation);
    if (cache) cache->act_raw.push_back(act);
    if (dropout_rate > 0.0) {
      const double keep = 1.0 - dropout_rate;
      Matrix mask(act.rows(), act.cols());
      for (Index r = 0; r < mask.rows(); ++r)
        for (Index c = 0; c < mask.cols(); ++c)
          mask(r, c) = rng::uniform01(*engine) < keep ? 1.0 / keep : 0.0;
      act = act.cwiseProduct(mask);
      if (cache) cache->masks.push_back(std::move(mask));
    }
    if (cache) cache->act_out.push_back(act);
    current = std::move(act);
  }
  const MlpLayer& out = model.layers.back();
  Vector scores = current * out.weights.row(0).transpose();
  scores.array() += out.bias[0];
  return scores;
}

}  // namespace

std::vector<Index> MlpModel::hidden_widths() const {
  std::vector<Index> widths;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) widths.push_back(layers[l].weights.rows());
  return widths;
}

LinearModel make_linear(Index input_dim, rng::Engine& engine) {
  if (input_dim < 1) throw DomainError("make_linear requires input_dim >= 1");
  LinearModel model;
  model.weights.resize(input_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (Index j = 0; j < input_dim; ++j)
    model.weights[j] = (2.0 * rng::uniform01(engine) - 1.0) * bound;
  model.bias = 0.0;
  return model;
}

MlpModel make_mlp(Index input_dim, const std::vector<Index>& hidden_widths, Activation activation,
                  double dropout_rate, rng::Engine& engine) {
  if (input_dim < 1) throw DomainError("make_mlp requires input_dim >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw DomainError("make_mlp requires dropout_rate in [0, 1)");
  MlpModel model;
  model.activation = activation;
  model.dropout_rate = dropout_rate;
  Index fan_in = input_dim;
  std::vector<Index> widths = hidden_widths;
  widths.push_back(1);  // scalar score head
  for (Index width : widths) {
    if (width < 1) throw DomainError("make_mlp requires positive layer widths");
    MlpLayer layer;
    layer.weights.resize(width, fan_in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index r = 0; r < width; ++r)
      for (Index c = 0; c < fan_in; ++c)
        layer.weights(r, c) = (2.0 * rng::uniform01(engine) - 1.0) * bound;
    layer.bias = Vector::Zero(width);
    model.layers.push_back(std::move(layer));
    fan_in = width;
  }
  return model;
}

double score(const LinearModel& model, const VectorRef& x) {
  check_dim(model.input_dim(), x.size(), "score");
  return model.weights.dot(x) + model.bias;
}

double score(const MlpModel& model, const VectorRef& x) {
  check_dim(model.input_dim(), x.size(), "score");
  return mlp_forward(model, x.transpose(), nullptr, 0.0, nullptr)[0];
}

Vector score_batch(const LinearModel& model, const MatrixRef& inputs) {
  check_dim(model.input_dim(), inputs.cols(), "score_batch");
  return inputs * model.weights + Vector::Constant(inputs.rows(), model.bias);
}

Vector score_batch(const MlpModel& model, const MatrixRef& inputs) {
  check_dim(model.input_dim(), inputs.cols(), "score_batch");
  return mlp_forward(model, inputs, nullptr, 0.0, nullptr);
}

int classify(const LinearModel& model, const VectorRef& x) { return score(model, x) >= 0.0 ? 1 : 0; }
int classify(const MlpModel& model, const VectorRef& x) { return score(model, x) >= 0.0 ? 1 : 0; }

Vector input_gradient(const LinearModel& model, const VectorRef& x) {
  check_dim(model.input_dim(), x.size(), "input_gradient");
  return model.weights;
}

Vector input_gradient(const MlpModel& model, const VectorRef& x) {
  check_dim(model.input_dim(), x.size(), "input_gradient");
  MlpForwardCache cache;
  mlp_forward(model, x.transpose(), &cache, 0.0, nullptr);
  // Walk the layers backwards with the score's unit seed.
  Matrix delta = Matrix::Ones(1, 1);
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    Matrix upstream = delta * model.layers[l].weights;  // 1 x fan_in
    if (l == 0) return upstream.transpose();
    delta = upstream.cwiseProduct(activation_derivative(cache.act_raw[l - 1], model.activation));
  }
  return Vector();  // unreachable; layers is never empty
}

namespace {

template <class ModelT>
double accuracy_impl(const ModelT& model, const dataset::Dataset& data) {
  const Vector scores = score_batch(model, data.features);
  Index correct = 0;
  for (Index i = 0; i < data.size(); ++i) {
    const int predicted = scores[i] >= 0.0 ? 1 : 0;
    if (predicted == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

double accuracy(const LinearModel& model, const dataset::Dataset& data) {
  return accuracy_impl(model, data);
}
double accuracy(const MlpModel& model, const dataset::Dataset& data) {
  return accuracy_impl(model, data);
}

double score(const Model& model, const VectorRef& x) {
  return std::visit([&](const auto& m) { return score(m, x); }, model);
}
Vector score_batch(const Model& model, const MatrixRef& inputs) {
  return std::visit([&](const auto& m) { return score_batch(m, inputs); }, model);
}
int classify(const Model& model, const VectorRef& x) {
  return std::visit([&](const auto& m) { return classify(m, x); }, model);
}
Vector input_gradient(const Model& model, const VectorRef& x) {
  return std::visit([&](const auto& m) { return input_gradient(m, x); }, model);
}
double accuracy(const Model& model, const dataset::Dataset& data) {
  return std::visit([&](const auto& m) { return accuracy(m, data); }, model);
}
Index input_dim(const Model& model) {
  return std::visit([](const auto& m) { return m.input_dim(); }, model);
}

OptimizerState make_optimizer_state(const LinearModel& model) {
  OptimizerState state;
  state.weight_m.push_back(Matrix::Zero(model.weights.size(), 1));
  state.weight_v.push_back(Matrix::Zero(model.weights.size(), 1));
  state.bias_m.push_back(Vector::Zero(1));
  state.bias_v.push_back(Vector::Zero(1));
  return state;
}

OptimizerState make_optimizer_state(const MlpModel& model) {
  OptimizerState state;
  for (const MlpLayer& layer : model.layers) {
    state.weight_m.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    state.weight_v.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    state.bias_m.push_back(Vector::Zero(layer.bias.size()));
    state.bias_v.push_back(Vector::Zero(layer.bias.size()));
  }
  return state;
}

void optimizer_step_block(Eigen::Ref<Matrix> param, const MatrixRef& grad, Eigen::Ref<Matrix> m,
                          Eigen::Ref<Matrix> v, long step, const TrainingConfig& config) {
  if (config.optimizer == Optimizer::Sgd) {
    param -= config.learning_rate * grad;
    return;
  }
  m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad;
  v = (config.adam_beta2 * v.array() + (1.0 - config.adam_beta2) * grad.array().square()).matrix();
  const double m_correction = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
  const double v_correction = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
  param.array() -= config.learning_rate * (m.array() / m_correction) /
                   ((v.array() / v_correction).sqrt() + config.adam_epsilon);
}

namespace {

struct BatchView {
  Matrix features;
  Vector labels;
};

BatchView gather_batch(const dataset::Dataset& train, const std::vector<Index>& order, Index begin,
                       Index end) {
  BatchView batch;
  batch.features.resize(end - begin, train.dim());
  batch.labels.resize(end - begin);
  for (Index i = begin; i < end; ++i) {
    batch.features.row(i - begin) = train.features.row(order[static_cast<std::size_t>(i)]);
    batch.labels[i - begin] = static_cast<double>(train.labels[order[static_cast<std::size_t>(i)]]);
  }
  return batch;
}

double batch_loss_and_residual(const Vector& scores, const Vector& labels, Vector& residual,
                               long epoch_index, Index batch_index) {
  const Index count = scores.size();
  residual.resize(count);
  double loss = 0.0;
  for (Index i = 0; i < count; ++i) {
    const double h = scores[i];
    const double y = labels[i];
    loss += y * softplus(-h) + (1.0 - y) * softplus(h);
    residual[i] = sigmoid(h) - y;
  }
  loss /= static_cast<double>(count);
  if (!std::isfinite(loss))
    throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch_index) + ", batch " +
                          std::to_string(batch_index));
  return loss;
}

std::vector<Index> shuffled_order(Index count, rng::Engine& engine) {
  std::vector<Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Index{0});
  rng::shuffle(order, engine);
  return order;
}

void validate_training_config(const TrainingConfig& config) {
  if (!(config.learning_rate >= 0.0)) throw DomainError("learning_rate must be >= 0");
  if (config.batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
    throw DomainError("dropout_rate must be in [0, 1)");
}

}  // namespace

double train_epoch(LinearModel& model, OptimizerState& state, const dataset::Dataset& train,
                   const TrainingConfig& config, rng::Engine& engine, long epoch_index) {
  validate_training_config(config);
  check_dim(model.input_dim(), train.dim(), "train_epoch");
  const std::vector<Index> order = shuffled_order(train.size(), engine);

  double loss_sum = 0.0;
  Index batch_count = 0;
  for (Index begin = 0; begin < train.size(); begin += config.batch_size) {
    const Index end = std::min(begin + config.batch_size, train.size());
    const BatchView batch = gather_batch(train, order, begin, end);
    const Vector scores = score_batch(model, batch.features);
    Vector residual;
    loss_sum += batch_loss_and_residual(scores, batch.labels, residual, epoch_index, batch_count);
    residual /= static_cast<double>(end - begin);

    Matrix weight_grad = (batch.features.transpose() * residual);
    Matrix bias_grad = Matrix::Constant(1, 1, residual.sum());

    ++state.step;
    Eigen::Map<Matrix> weights_view(model.weights.data(), model.weights.size(), 1);
    optimizer_step_block(weights_view, weight_grad, state.weight_m[0], state.weight_v[0],
                         state.step, config);
    Eigen::Map<Matrix> bias_view(&model.bias, 1, 1);
    Eigen::Map<Matrix> bias_m(state.bias_m[0].data(), 1, 1);
    Eigen::Map<Matrix> bias_v(state.bias_v[0].data(), 1, 1);
    optimizer_step_block(bias_view, bias_grad, bias_m, bias_v, state.step, config);
    ++batch_count;
  }
  return loss_sum / static_cast<double>(batch_count);
}

double train_epoch(MlpModel& model, OptimizerState& state, const dataset::Dataset& train,
                   const TrainingConfig& config, rng::Engine& engine, long epoch_index) {
  validate_training_config(config);
  check_dim(model.input_dim(), train.dim(), "train_epoch");
  const std::vector<Index> order = shuffled_order(train.size(), engine);
  const std::size_t layer_count = model.layers.size();

  double loss_sum = 0.0;
  Index batch_count = 0;
  for (Index begin = 0; begin < train.size(); begin += config.batch_size) {
    const Index end = std::min(begin + config.batch_size, train.size());
    const BatchView batch = gather_batch(train, order, begin, end);

    MlpForwardCache cache;
    const Vector scores =
        mlp_forward(model, batch.features, &cache, config.dropout_rate, &engine);
    Vector residual;
    loss_sum += batch_loss_and_residual(scores, batch.labels, residual, epoch_index, batch_count);
    residual /= static_cast<double>(end - begin);

    // Backward pass, output layer first.
    std::vector<Matrix> weight_grads(layer_count);
    std::vector<Vector> bias_grads(layer_count);
    Matrix delta = residual;  // B x 1
    for (std::size_t l = layer_count; l-- > 0;) {
      const Matrix& layer_input = (l == 0) ? batch.features : cache.act_out[l - 1];
      weight_grads[l] = delta.transpose() * layer_input;
      bias_grads[l] = delta.colwise().sum().transpose();
      if (l == 0) break;
      Matrix upstream = delta * model.layers[l].weights;
      if (!cache.masks.empty()) upstream = upstream.cwiseProduct(cache.masks[l - 1]);
      delta = upstream.cwiseProduct(activation_derivative(cache.act_raw[l - 1], model.activation));
    }

    ++state.step;
    for (std::size_t l = 0; l < layer_count; ++l) {
      optimizer_step_block(model.layers[l].weights, weight_grads[l], state.weight_m[l],
                           state.weight_v[l], state.step, config);
      Eigen::Map<Matrix> bias_view(model.layers[l].bias.data(), model.layers[l].bias.size(), 1);
      Eigen::Map<Matrix> bias_m(state.bias_m[l].data(), state.bias_m[l].size(), 1);
      Eigen::Map<Matrix> bias_v(state.bias_v[l].data(), state.bias_v[l].size(), 1);
      optimizer_step_block(bias_view, bias_grads[l], bias_m, bias_v, state.step, config);
    }
    ++batch_count;
  }
  return loss_sum / static_cast<double>(batch_count);
}

double train_epoch(Model& model, OptimizerState& state, const dataset::Dataset& train,
                   const TrainingConfig& config, rng::Engine& engine, long epoch_index) {
  return std::visit(
      [&](auto& m) { return train_epoch(m, state, train, config, engine, epoch_index); }, model);
}

namespace {

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw DataError("unknown activation '" + name + "'");
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  json j;
  j["format"] = "vcplab-checkpoint-v1";
  j["epoch"] = checkpoint.epoch;
  j["seed"] = checkpoint.seed;
  if (const auto* linear = std::get_if<LinearModel>(&checkpoint.model)) {
    j["kind"] = "linear";
    j["input_dim"] = linear->input_dim();
    j["weights"] = vector_to_json(linear->weights);
    j["bias"] = linear->bias;
  } else {
    const auto& mlp = std::get<MlpModel>(checkpoint.model);
    j["kind"] = "mlp";
    j["input_dim"] = mlp.input_dim();
    j["activation"] = activation_name(mlp.activation);
    j["dropout_rate"] = mlp.dropout_rate;
    json layers = json::array();
    for (const MlpLayer& layer : mlp.layers) {
      json lj;
      lj["weights"] = matrix_to_json(layer.weights);
      lj["bias"] = vector_to_json(layer.bias);
      layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
  }
  std::ofstream file(path);
  if (!file) throw IoError("cannot write checkpoint '" + path + "'");
  file << j.dump(1) << "\n";
  if (!file) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot read checkpoint '" + path + "'");
  json j;
  try {
    file >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint '" + path + "': " + e.what());
  }
  if (j.value("format", "") != "vcplab-checkpoint-v1")
    throw DataError("unsupported checkpoint format in '" + path + "'");

  Checkpoint checkpoint;
  checkpoint.epoch = j.at("epoch").get<long>();
  checkpoint.seed = j.at("seed").get<std::uint64_t>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    LinearModel linear;
    linear.weights = vector_from_json(j.at("weights"));
    linear.bias = j.at("bias").get<double>();
    checkpoint.model = std::move(linear);
  } else if (kind == "mlp") {
    MlpModel mlp;
    mlp.activation = activation_from_name(j.at("activation").get<std::string>());
    mlp.dropout_rate = j.at("dropout_rate").get<double>();
    for (const json& lj : j.at("layers")) {
      MlpLayer layer;
      layer.weights = matrix_from_json(lj.at("weights"));
      layer.bias = vector_from_json(lj.at("bias"));
      mlp.layers.push_back(std::move(layer));
    }
    if (mlp.layers.empty()) throw DataError("checkpoint '" + path + "' has no layers");
    checkpoint.model = std::move(mlp);
  } else {
    throw DataError("unknown model kind '" + kind + "' in '" + path + "'");
  }
  return checkpoint;
}

}  // namespace vcplab::model
