#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ddl/image.hpp"

namespace ddl {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Softmax = 2 };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::Relu;
  double input_dropout = 0.0;  // drop probability on this layer's input, training only

  std::size_t inputs() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t outputs() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

struct AdamMoments {
  std::vector<Eigen::MatrixXd> weight_m, weight_v;
  std::vector<Eigen::VectorXd> bias_m, bias_v;
  std::uint64_t step = 0;
};

struct MlpModel {
  std::vector<DenseLayer> layers;
  AdamMoments adam;
  std::uint64_t seed = 0;

  std::size_t input_size() const { return layers.empty() ? 0 : layers.front().inputs(); }
  std::size_t num_classes() const { return layers.empty() ? 0 : layers.back().outputs(); }
};

// Dense stack with ReLU hidden layers and a softmax head. `sizes` lists every
// width from the input to the class count; `dropouts[l]` is the drop rate on
// the input of layer l. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
MlpModel make_mlp(const std::vector<std::size_t>& sizes, const std::vector<double>& dropouts,
                  std::uint64_t seed);

// Dropout 0.5 -> Dense 784 -> ReLU -> Dropout 0.2 -> Dense 256 -> ReLU -> Dense K -> Softmax.
MlpModel default_mlp(std::size_t input_size, std::size_t num_classes, std::uint64_t seed);

void validate(const MlpModel& model);

// Inference-mode forward pass; returns softmax probabilities.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x);
// Pre-softmax scores of the last layer.
Eigen::VectorXd logits(const MlpModel& model, const Eigen::VectorXd& x);
// Column-per-sample variant of forward().
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs);

// -ln(max(p[label], 1e-12))
double cross_entropy(const Eigen::VectorXd& probabilities, int label);

Eigen::VectorXd input_gradient(const MlpModel& model, const Eigen::VectorXd& x, int label);

enum class JacobianOutput { Softmax, Logits };

// K x M matrix of d output_n / d x_m.
Eigen::MatrixXd forward_jacobian(const MlpModel& model, const Eigen::VectorXd& x,
                                 JacobianOutput output = JacobianOutput::Softmax);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;       // mean training-mode cross-entropy
  double train_acc = 0.0;  // inference mode, after the epoch
  std::optional<double> test_acc;
};

// Mini-batch Adam on mean cross-entropy, seeded shuffling and inverted dropout.
std::vector<EpochLog> train(MlpModel& model, const LabeledDataset& train_set,
                            const TrainConfig& config, const LabeledDataset* test_set = nullptr);

// One Adam update from explicit gradients (exposed for the no-op property).
void adam_step(MlpModel& model, const std::vector<Eigen::MatrixXd>& weight_grads,
               const std::vector<Eigen::VectorXd>& bias_grads, const TrainConfig& config);

// Argmax with ties going to the lowest class index.
int argmax(const Eigen::VectorXd& v);
int predict(const MlpModel& model, const Image& img);
std::vector<int> predict_all(const MlpModel& model, const LabeledDataset& ds);
double evaluate_accuracy(const MlpModel& model, const LabeledDataset& ds);

Eigen::VectorXd to_vector(const Image& img);
Eigen::MatrixXd to_matrix(const LabeledDataset& ds);  // one column per image

// "DDLW": magic, u32 LE layer count, then per layer an activation tag byte,
// u32 LE out and in, and the weights and bias as DDL1 blocks. Dropout rates
// and optimiser state are not persisted.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace ddl
