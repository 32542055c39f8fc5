#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mhgan/mixtures.hpp"
#include "mhgan/models.hpp"
#include "mhgan/rng.hpp"

namespace mhgan {

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Fully connected binary classifier: ReLU hidden layers, sigmoid output.
class MLPNet {
 public:
  /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static MLPNet initialized(std::vector<std::size_t> widths, Rng& rng);
  static MLPNet zeros(std::vector<std::size_t> widths);
  /// Input d, four hidden layers of width 100, scalar output.
  static std::vector<std::size_t> discriminator_widths(std::size_t input_dim);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  /// Pre-sigmoid output.
  double logit(std::span<const double> x) const;
  /// Probability in (0,1). Throws InvalidArgument on dimension mismatch.
  double forward(std::span<const double> x) const;
  /// Same values as forward(), point for point and bit for bit.
  std::vector<double> forward_batch(std::span<const Point> xs) const;

  /// {"widths": [...], "parameters": [...]} with parameters flattened layer
  /// by layer, weights row-major then bias.
  nlohmann::json to_json() const;
  static MLPNet from_json(const nlohmann::json& j);

 private:
  explicit MLPNet(std::vector<std::size_t> widths);
  Eigen::VectorXd logits_chunk(const Eigen::MatrixXd& inputs) const;

  std::vector<std::size_t> widths_;
  std::vector<DenseLayer> layers_;
};

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct TrainResult {
  MLPNet net;
  std::vector<double> epoch_loss;  // full-data mean loss after each epoch
  double final_loss = 0.0;
};

struct LabeledBatch {
  std::vector<Point> points;
  std::vector<double> labels;  // 1 = real, 0 = fake
};

/// Minimises mean binary cross-entropy (real = 1, fake = 0) by mini-batch
/// SGD or Adam. Throws InvalidArgument on an invalid config or empty sets and
/// RuntimeError (naming the epoch) when the loss stops being finite.
TrainResult mlp_train(MLPNet net, std::span<const Point> real, std::span<const Point> fake,
                      const TrainConfig& cfg);

/// Mean binary cross-entropy of the net on a labelled batch.
double mlp_loss(const MLPNet& net, const LabeledBatch& batch);

/// Analytic gradient of mlp_loss, one entry per layer.
std::vector<DenseLayer> mlp_gradient(const MLPNet& net, const LabeledBatch& batch);

/// Largest per-parameter relative error between mlp_gradient and central
/// finite differences with the given step.
double grad_check(const MLPNet& net, const LabeledBatch& batch, double step = 1e-5);

/// Probability-type discriminator backed by a trained net.
Discriminator mlp_discriminator(MLPNet net);

}  // namespace mhgan
