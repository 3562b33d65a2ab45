#include "ddl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "ddl/data_io.hpp"
#include "ddl/error.hpp"
#include "ddl/random.hpp"

namespace ddl {
namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr char kModelMagic[4] = {'D', 'D', 'L', 'W'};

void softmax_inplace(Eigen::Ref<Eigen::VectorXd> z) {
  const double peak = z.maxCoeff();
  z = (z.array() - peak).exp();
  z /= z.sum();
}

void activate(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::Identity:
      break;
    case Activation::Relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::Softmax:
      for (Eigen::Index c = 0; c < z.cols(); ++c) softmax_inplace(z.col(c));
      break;
  }
}

void check_input(const MlpModel& model, Eigen::Index size) {
  if (model.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "model has no layers");
  if (static_cast<std::size_t>(size) != model.input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "input of length " + std::to_string(size) +
                                              " for a model expecting " +
                                              std::to_string(model.input_size()));
  }
}

// Inference-mode activations: inputs[l] feeds layer l, pre[l] is W_l inputs[l] + b_l.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> pre;
  Eigen::VectorXd output;
};

ForwardTrace trace_forward(const MlpModel& model, const Eigen::VectorXd& x) {
  check_input(model, x.size());
  ForwardTrace t;
  Eigen::VectorXd a = x;
  for (const auto& layer : model.layers) {
    t.inputs.push_back(a);
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    t.pre.push_back(z);
    Eigen::MatrixXd act = z;
    activate(act, layer.activation);
    a = act.col(0);
  }
  t.output = a;
  return t;
}

// Pulls row vectors of d(.)/d(pre-activation of the last layer) back to the input.
Eigen::MatrixXd backprop_rows(const MlpModel& model, const ForwardTrace& t, Eigen::MatrixXd rows) {
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    rows = rows * model.layers[l].weights;
    if (l > 0 && model.layers[l - 1].activation == Activation::Relu) {
      const Eigen::ArrayXd mask = (t.pre[l - 1].array() > 0.0).cast<double>();
      rows.array().rowwise() *= mask.transpose();
    }
  }
  return rows;
}

void init_adam(MlpModel& model) {
  model.adam = {};
  for (const auto& layer : model.layers) {
    model.adam.weight_m.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    model.adam.weight_v.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    model.adam.bias_m.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    model.adam.bias_v.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
}

}  // namespace

MlpModel make_mlp(const std::vector<std::size_t>& sizes, const std::vector<double>& dropouts,
                  std::uint64_t seed) {
  if (sizes.size() < 2) throw Error(ErrorCode::InvalidArgument, "need input and output sizes");
  MlpModel model;
  model.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    layer.weights.resize(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l]));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.uniform(-bound, bound);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(layer.weights.rows());
    layer.activation = l + 2 == sizes.size() ? Activation::Softmax : Activation::Relu;
    layer.input_dropout = l < dropouts.size() ? dropouts[l] : 0.0;
    model.layers.push_back(std::move(layer));
  }
  init_adam(model);
  validate(model);
  return model;
}

MlpModel default_mlp(std::size_t input_size, std::size_t num_classes, std::uint64_t seed) {
  return make_mlp({input_size, 784, 256, num_classes}, {0.5, 0.2, 0.0}, seed);
}

void validate(const MlpModel& model) {
  if (model.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "model has no layers");
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    if (layer.bias.size() != layer.weights.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "bias size mismatch in layer " + std::to_string(l));
    }
    if (l > 0 && layer.inputs() != model.layers[l - 1].outputs()) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " does not chain");
    }
    if ((layer.activation == Activation::Softmax) != (l + 1 == model.layers.size())) {
      throw Error(ErrorCode::ShapeMismatch, "softmax must be the final activation, and only it");
    }
    if (!(layer.input_dropout >= 0.0 && layer.input_dropout < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "dropout rate outside [0,1)");
    }
  }
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x) {
  check_input(model, x.size());
  Eigen::MatrixXd a = x;
  for (const auto& layer : model.layers) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    activate(z, layer.activation);
    a = std::move(z);
  }
  return a.col(0);
}

Eigen::VectorXd logits(const MlpModel& model, const Eigen::VectorXd& x) {
  return trace_forward(model, x).pre.back();
}

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  check_input(model, inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (const auto& layer : model.layers) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    activate(z, layer.activation);
    a = std::move(z);
  }
  return a;
}

double cross_entropy(const Eigen::VectorXd& probabilities, int label) {
  return -std::log(std::max(probabilities(label), kProbabilityFloor));
}

Eigen::VectorXd input_gradient(const MlpModel& model, const Eigen::VectorXd& x, int label) {
  const ForwardTrace t = trace_forward(model, x);
  if (label < 0 || static_cast<std::size_t>(label) >= model.num_classes()) {
    throw Error(ErrorCode::ShapeMismatch, "label outside the model's classes");
  }
  // d(-ln p_label)/dz = p - onehot for a softmax head. Inside the 1e-12 clamp
  // the loss is constant, so the gradient vanishes there.
  if (t.output(label) < kProbabilityFloor) return Eigen::VectorXd::Zero(x.size());
  Eigen::RowVectorXd delta = t.output.transpose();
  delta(label) -= 1.0;
  return backprop_rows(model, t, delta).transpose();
}

Eigen::MatrixXd forward_jacobian(const MlpModel& model, const Eigen::VectorXd& x,
                                 JacobianOutput output) {
  const ForwardTrace t = trace_forward(model, x);
  const auto k = static_cast<Eigen::Index>(model.num_classes());
  Eigen::MatrixXd seed = Eigen::MatrixXd::Identity(k, k);
  if (output == JacobianOutput::Softmax) {
    // d softmax_n / d z_j = p_n (delta_nj - p_j)
    seed = Eigen::MatrixXd(t.output.asDiagonal()) - t.output * t.output.transpose();
  }
  return backprop_rows(model, t, seed);
}

void validate(const TrainConfig& config) {
  if (config.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "Adam betas must lie in [0,1)");
  }
  if (!(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  }
}

void adam_step(MlpModel& model, const std::vector<Eigen::MatrixXd>& weight_grads,
               const std::vector<Eigen::VectorXd>& bias_grads, const TrainConfig& config) {
  if (model.adam.weight_m.size() != model.layers.size()) init_adam(model);
  auto& adam = model.adam;
  ++adam.step;
  const double t = static_cast<double>(adam.step);
  const double correct1 = 1.0 - std::pow(config.beta1, t);
  const double correct2 = 1.0 - std::pow(config.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    param.array() -= config.learning_rate * (m.array() / correct1) /
                     ((v.array() / correct2).sqrt() + config.adam_epsilon);
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].weights, adam.weight_m[l], adam.weight_v[l], weight_grads[l]);
    update(model.layers[l].bias, adam.bias_m[l], adam.bias_v[l], bias_grads[l]);
  }
}

std::vector<EpochLog> train(MlpModel& model, const LabeledDataset& train_set,
                            const TrainConfig& config, const LabeledDataset* test_set) {
  validate(model);
  validate(config);
  if (train_set.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
  const Eigen::MatrixXd inputs = to_matrix(train_set);
  check_input(model, inputs.rows());
  if (model.adam.weight_m.size() != model.layers.size()) init_adam(model);

  Rng rng(config.seed);
  const std::size_t n = train_set.size();
  const std::size_t depth = model.layers.size();
  std::vector<std::size_t> order(n);
  std::vector<EpochLog> log;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t batch = std::min(config.batch_size, n - start);
      Eigen::MatrixXd a(inputs.rows(), static_cast<Eigen::Index>(batch));
      Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.num_classes()),
                                                      static_cast<Eigen::Index>(batch));
      for (std::size_t b = 0; b < batch; ++b) {
        a.col(static_cast<Eigen::Index>(b)) = inputs.col(static_cast<Eigen::Index>(order[start + b]));
        targets(train_set.labels[order[start + b]], static_cast<Eigen::Index>(b)) = 1.0;
      }

      std::vector<Eigen::MatrixXd> layer_in(depth), pre(depth), masks(depth);
      for (std::size_t l = 0; l < depth; ++l) {
        const auto& layer = model.layers[l];
        if (layer.input_dropout > 0.0) {
          const double keep = 1.0 - layer.input_dropout;
          masks[l].resize(a.rows(), a.cols());
          for (Eigen::Index i = 0; i < masks[l].size(); ++i) {
            masks[l](i) = rng.uniform() < keep ? 1.0 / keep : 0.0;
          }
          a = a.cwiseProduct(masks[l]);
        }
        layer_in[l] = a;
        Eigen::MatrixXd z = layer.weights * a;
        z.colwise() += layer.bias;
        pre[l] = z;
        activate(z, layer.activation);
        a = std::move(z);
      }
      for (std::size_t b = 0; b < batch; ++b) {
        const int label = train_set.labels[order[start + b]];
        loss_sum += -std::log(std::max(a(label, static_cast<Eigen::Index>(b)), kProbabilityFloor));
      }

      std::vector<Eigen::MatrixXd> weight_grads(depth);
      std::vector<Eigen::VectorXd> bias_grads(depth);
      Eigen::MatrixXd delta = (a - targets) / static_cast<double>(batch);
      for (std::size_t l = depth; l-- > 0;) {
        weight_grads[l] = delta * layer_in[l].transpose();
        bias_grads[l] = delta.rowwise().sum();
        if (l == 0) break;
        delta = model.layers[l].weights.transpose() * delta;
        if (model.layers[l].input_dropout > 0.0) delta = delta.cwiseProduct(masks[l]);
        if (model.layers[l - 1].activation == Activation::Relu) {
          delta = delta.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
      }
      adam_step(model, weight_grads, bias_grads, config);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(n);
    entry.train_acc = evaluate_accuracy(model, train_set);
    if (test_set) entry.test_acc = evaluate_accuracy(model, *test_set);
    log.push_back(entry);
  }
  return log;
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

int predict(const MlpModel& model, const Image& img) { return argmax(forward(model, to_vector(img))); }

std::vector<int> predict_all(const MlpModel& model, const LabeledDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    const std::size_t stop = std::min(ds.size(), start + kChunk);
    Eigen::MatrixXd block(static_cast<Eigen::Index>(ds.images[start].size()),
                          static_cast<Eigen::Index>(stop - start));
    for (std::size_t i = start; i < stop; ++i) {
      block.col(static_cast<Eigen::Index>(i - start)) = to_vector(ds.images[i]);
    }
    const Eigen::MatrixXd probs = forward_batch(model, block);
    for (Eigen::Index c = 0; c < probs.cols(); ++c) out.push_back(argmax(probs.col(c)));
  }
  return out;
}

double evaluate_accuracy(const MlpModel& model, const LabeledDataset& ds) {
  if (ds.empty()) return 0.0;
  const auto predictions = predict_all(model, ds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) correct += predictions[i] == ds.labels[i];
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

Eigen::VectorXd to_vector(const Image& img) {
  return Eigen::Map<const Eigen::VectorXd>(img.pixels.data(), static_cast<Eigen::Index>(img.size()));
}

Eigen::MatrixXd to_matrix(const LabeledDataset& ds) {
  if (ds.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ds.images.front().size()),
                    static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = to_vector(ds.images[i]);
  return m;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  validate(model);
  std::vector<std::uint8_t> bytes(std::begin(kModelMagic), std::end(kModelMagic));
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    bytes.push_back(static_cast<std::uint8_t>(layer.activation));
    put32(static_cast<std::uint32_t>(layer.outputs()));
    put32(static_cast<std::uint32_t>(layer.inputs()));
    append_matrix(bytes, layer.weights);
    append_matrix(bytes, layer.bias);
  }
  write_file(path, bytes);
}

MlpModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 8) throw Error(ErrorCode::Truncated, path.string() + " is too short");
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, path.string() + " is not a DDLW model");
  }
  std::size_t offset = 4;
  auto get32 = [&] {
    if (offset + 4 > bytes.size()) throw Error(ErrorCode::Truncated, path.string() + " cut short");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[offset + i]} << (8 * i);
    offset += 4;
    return v;
  };
  MlpModel model;
  const std::uint32_t count = get32();
  for (std::uint32_t l = 0; l < count; ++l) {
    if (offset >= bytes.size()) throw Error(ErrorCode::Truncated, path.string() + " cut short");
    const std::uint8_t tag = bytes[offset++];
    if (tag > 2) throw Error(ErrorCode::BadMagic, "unknown activation tag " + std::to_string(tag));
    const std::uint32_t out = get32();
    const std::uint32_t in = get32();
    DenseLayer layer;
    layer.activation = static_cast<Activation>(tag);
    layer.weights = read_matrix(bytes, offset);
    const Eigen::MatrixXd bias = read_matrix(bytes, offset);
    if (layer.weights.rows() != out || layer.weights.cols() != in || bias.rows() != out ||
        bias.cols() != 1) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " dims disagree");
    }
    layer.bias = bias.col(0);
    model.layers.push_back(std::move(layer));
  }
  validate(model);
  init_adam(model);
  return model;
}

}  // namespace ddl
