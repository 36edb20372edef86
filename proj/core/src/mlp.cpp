#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "readmit/error.hpp"
#include "readmit/nnet.hpp"
#include "readmit/random.hpp"

namespace readmit {

void MlpConfig::validate(const std::string& path) const {
  if (hidden_sizes.empty()) throw ConfigError(path + ".hidden_sizes", "must not be empty");
  for (std::size_t i = 0; i < hidden_sizes.size(); ++i) {
    if (hidden_sizes[i] < 1) {
      throw ConfigError(path + ".hidden_sizes[" + std::to_string(i) + "]", "must be >= 1");
    }
  }
  if (l2.size() != hidden_sizes.size()) {
    throw ConfigError(path + ".l2", "expected " + std::to_string(hidden_sizes.size()) +
                                        " entries (one per hidden layer), got " +
                                        std::to_string(l2.size()));
  }
  for (std::size_t i = 0; i < l2.size(); ++i) {
    if (!(l2[i] >= 0.0)) throw ConfigError(path + ".l2[" + std::to_string(i) + "]", "must be >= 0");
  }
  if (!(learning_rate > 0.0)) throw ConfigError(path + ".learning_rate", "must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError(path + ".beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError(path + ".beta2", "must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError(path + ".epsilon", "must be > 0");
  if (batch_size < 1) throw ConfigError(path + ".batch_size", "must be >= 1");
  if (max_epochs < 1) throw ConfigError(path + ".max_epochs", "must be >= 1");
  if (patience < 1) throw ConfigError(path + ".patience", "must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError(path + ".validation_fraction", "must lie strictly inside (0, 1)");
  }
}

Index MlpModel::parameter_count() const {
  Index count = 0;
  for (const auto& layer : layers) count += layer.weights.size() + layer.bias.size();
  return count;
}

MlpModel init_mlp(const MlpConfig& config, int input_dim) {
  if (input_dim < 1) throw ConfigError("input_dim", "must be >= 1");
  Rng rng(derive_seed(config.seed, "init"));
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpModel model;
  model.input_dim = input_dim;
  int fan_in = input_dim;
  auto add_layer = [&](int fan_out, Activation activation) {
    DenseLayer layer;
    layer.activation = activation;
    layer.weights.resize(fan_out, fan_in);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index r = 0; r < layer.weights.rows(); ++r) {
      for (Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = scale * normal(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    model.layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (const int width : config.hidden_sizes) add_layer(width, Activation::relu);
  add_layer(1, Activation::sigmoid);
  return model;
}

double stable_sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void check_width(const MlpModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.input_dim) {
    throw DataError("network input width " + std::to_string(model.input_dim) +
                    " does not match matrix width " + std::to_string(x.cols()));
  }
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& a, const DenseLayer& layer) {
  Eigen::MatrixXd z = a * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  return z;
}

double data_loss_term(double p, int y, bool* clamped) {
  const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  if (clamped) *clamped = pc != p;
  return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

double penalty_term(const MlpModel& model, std::span<const double> l2) {
  double penalty = 0.0;
  for (std::size_t l = 0; l < l2.size() && l < model.layers.size(); ++l) {
    penalty += l2[l] * model.layers[l].weights.squaredNorm();
  }
  return penalty;
}

}  // namespace

Eigen::VectorXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x) {
  check_width(model, x);
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
    a = affine(a, model.layers[l]).cwiseMax(0.0);
  }
  return affine(a, model.layers.back()).col(0);
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& x) {
  Eigen::VectorXd z = forward_logits(model, x);
  return z.unaryExpr([](double v) { return stable_sigmoid(v); });
}

LossGrad loss_and_grad(const MlpModel& model, const Eigen::MatrixXd& x,
                       std::span<const int> labels, std::span<const double> l2) {
  check_width(model, x);
  if (x.rows() == 0) throw DataError("loss_and_grad: empty batch");
  if (static_cast<Index>(labels.size()) != x.rows()) {
    throw DataError("loss_and_grad: label count does not match batch");
  }
  const std::size_t depth = model.layers.size();
  // activations[0] = input; activations[l + 1] = post-activation of layer l.
  std::vector<Eigen::MatrixXd> activations;
  activations.reserve(depth);
  activations.push_back(x);
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    activations.push_back(affine(activations.back(), model.layers[l]).cwiseMax(0.0));
  }
  const Eigen::VectorXd logits = affine(activations.back(), model.layers.back()).col(0);

  const auto n = static_cast<double>(x.rows());
  LossGrad out;
  Eigen::MatrixXd delta(x.rows(), 1);
  double data = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double p = stable_sigmoid(logits(i));
    const int y = labels[static_cast<std::size_t>(i)];
    bool clamped = false;
    data += data_loss_term(p, y, &clamped);
    out.correct += (p >= 0.5) == (y == 1);
    delta(i, 0) = clamped ? 0.0 : (p - static_cast<double>(y)) / n;
  }
  out.data_loss = data / n;
  out.penalty = penalty_term(model, l2);
  out.loss = out.data_loss + out.penalty;

  out.gradients.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = model.layers[l];
    auto& grad = out.gradients[l];
    grad.activation = layer.activation;
    grad.weights = delta.transpose() * activations[l];
    grad.bias = delta.colwise().sum().transpose();
    if (l < l2.size()) grad.weights += 2.0 * l2[l] * layer.weights;
    if (l > 0) {
      Eigen::MatrixXd upstream = delta * layer.weights;
      delta = (activations[l].array() > 0.0).select(upstream, 0.0);
    }
  }
  return out;
}

double penalized_loss(const MlpModel& model, const Eigen::MatrixXd& x,
                      std::span<const int> labels, std::span<const double> l2) {
  if (static_cast<Index>(labels.size()) != x.rows()) {
    throw DataError("penalized_loss: label count does not match rows");
  }
  const Eigen::VectorXd p = forward(model, x);
  double data = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    data += data_loss_term(p(i), labels[static_cast<std::size_t>(i)], nullptr);
  }
  return data / static_cast<double>(p.size()) + penalty_term(model, l2);
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kModelFormat = "readmit-mlp";
constexpr int kModelVersion = 1;

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "sigmoid"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw DataError("model document: unknown activation '" + name + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const MlpConfig& c) {
  j = {{"hidden_sizes", c.hidden_sizes},
       {"l2", c.l2},
       {"learning_rate", c.learning_rate},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"epsilon", c.epsilon},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"patience", c.patience},
       {"validation_fraction", c.validation_fraction},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, MlpConfig& c) {
  const MlpConfig defaults;
  c.hidden_sizes = j.value("hidden_sizes", defaults.hidden_sizes);
  c.l2 = j.value("l2", defaults.l2);
  c.learning_rate = j.value("learning_rate", defaults.learning_rate);
  c.beta1 = j.value("beta1", defaults.beta1);
  c.beta2 = j.value("beta2", defaults.beta2);
  c.epsilon = j.value("epsilon", defaults.epsilon);
  c.batch_size = j.value("batch_size", defaults.batch_size);
  c.max_epochs = j.value("max_epochs", defaults.max_epochs);
  c.patience = j.value("patience", defaults.patience);
  c.validation_fraction = j.value("validation_fraction", defaults.validation_fraction);
  c.seed = j.value("seed", defaults.seed);
}

void to_json(nlohmann::json& j, const MlpModel& model) {
  auto layers = nlohmann::json::array();
  for (const auto& layer : model.layers) {
    std::vector<double> weights;
    weights.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Index r = 0; r < layer.weights.rows(); ++r) {
      for (Index c = 0; c < layer.weights.cols(); ++c) weights.push_back(layer.weights(r, c));
    }
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"activation", activation_name(layer.activation)},
                      {"weights", weights},
                      {"bias", std::vector<double>(layer.bias.begin(), layer.bias.end())}});
  }
  j = {{"input_dim", model.input_dim}, {"layers", layers}};
}

void from_json(const nlohmann::json& j, MlpModel& model) {
  model = MlpModel{};
  model.input_dim = j.at("input_dim").get<int>();
  Index expected_cols = model.input_dim;
  for (const auto& lj : j.at("layers")) {
    DenseLayer layer;
    const Index rows = lj.at("rows").get<Index>();
    const Index cols = lj.at("cols").get<Index>();
    if (cols != expected_cols) throw DataError("model document: layer shapes do not chain");
    const auto weights = lj.at("weights").get<std::vector<double>>();
    const auto bias = lj.at("bias").get<std::vector<double>>();
    if (static_cast<Index>(weights.size()) != rows * cols || static_cast<Index>(bias.size()) != rows) {
      throw DataError("model document: layer array sizes do not match shape");
    }
    layer.weights.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        layer.weights(r, c) = weights[static_cast<std::size_t>(r * cols + c)];
      }
    }
    layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
    layer.activation = parse_activation(lj.at("activation").get<std::string>());
    model.layers.push_back(std::move(layer));
    expected_cols = rows;
  }
  if (model.layers.empty() || expected_cols != 1) {
    throw DataError("model document: network must end in a single output unit");
  }
}

nlohmann::json model_document(const MlpModel& model, const MlpConfig& config) {
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"seed", config.seed},
          {"parameter_count", model.parameter_count()},
          {"config", config},
          {"model", model}};
}

MlpModel model_from_document(const nlohmann::json& doc, MlpConfig* config) {
  try {
    if (doc.value("format", std::string()) != kModelFormat) {
      throw DataError("model document: unexpected format tag");
    }
    if (doc.value("version", 0) != kModelVersion) {
      throw DataError("model document: unsupported version");
    }
    if (config) *config = doc.at("config").get<MlpConfig>();
    return doc.at("model").get<MlpModel>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model document: ") + e.what());
  }
}

}  // namespace readmit
