#include "mhgan/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mhgan/error.hpp"

namespace mhgan {

namespace {

// Every evaluation goes through a matrix of exactly this many columns, so a
// point's score never depends on which other points share its batch.
constexpr Eigen::Index kChunk = 64;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_widths(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw InvalidArgument("mlp needs at least input and output widths");
  if (widths.back() != 1) throw InvalidArgument("mlp output width must be 1");
  for (auto w : widths)
    if (w == 0) throw InvalidArgument("mlp layer widths must be positive");
}

}  // namespace

MLPNet::MLPNet(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  check_widths(widths_);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths_[l]);
    const auto out = static_cast<Eigen::Index>(widths_[l + 1]);
    layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
}

MLPNet MLPNet::zeros(std::vector<std::size_t> widths) { return MLPNet(std::move(widths)); }

MLPNet MLPNet::initialized(std::vector<std::size_t> widths, Rng& rng) {
  MLPNet net(std::move(widths));
  for (auto& layer : net.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = u(rng);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = u(rng);
  }
  return net;
}

std::vector<std::size_t> MLPNet::discriminator_widths(std::size_t input_dim) {
  return {input_dim, 100, 100, 100, 100, 1};
}

std::size_t MLPNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

Eigen::VectorXd MLPNet::logits_chunk(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd act = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * act;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size())
      act = z.cwiseMax(0.0);
    else
      act = std::move(z);
  }
  return act.row(0).transpose();
}

std::vector<double> MLPNet::forward_batch(std::span<const Point> xs) const {
  std::vector<double> out(xs.size());
  const auto d = static_cast<Eigen::Index>(input_dim());
  Eigen::MatrixXd chunk(d, kChunk);
  for (std::size_t start = 0; start < xs.size(); start += kChunk) {
    const std::size_t count = std::min<std::size_t>(kChunk, xs.size() - start);
    chunk.setZero();
    for (std::size_t i = 0; i < count; ++i) {
      const auto& x = xs[start + i];
      if (x.size() != input_dim())
        throw InvalidArgument("mlp: point has dimension " + std::to_string(x.size()) +
                              ", net expects " + std::to_string(input_dim()));
      for (Eigen::Index j = 0; j < d; ++j) chunk(j, static_cast<Eigen::Index>(i)) = x[j];
    }
    const Eigen::VectorXd z = logits_chunk(chunk);
    for (std::size_t i = 0; i < count; ++i) out[start + i] = open_unit(sigmoid(z(static_cast<Eigen::Index>(i))));
  }
  return out;
}

double MLPNet::logit(std::span<const double> x) const {
  if (x.size() != input_dim())
    throw InvalidArgument("mlp: point has dimension " + std::to_string(x.size()) +
                          ", net expects " + std::to_string(input_dim()));
  Eigen::MatrixXd chunk = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(input_dim()), kChunk);
  for (std::size_t j = 0; j < x.size(); ++j) chunk(static_cast<Eigen::Index>(j), 0) = x[j];
  return logits_chunk(chunk)(0);
}

double MLPNet::forward(std::span<const double> x) const { return open_unit(sigmoid(logit(x))); }

nlohmann::json MLPNet::to_json() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) flat.push_back(layer.weights(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat.push_back(layer.bias(r));
  }
  return {{"widths", widths_}, {"parameters", flat}};
}

MLPNet MLPNet::from_json(const nlohmann::json& j) {
  MLPNet net(j.at("widths").get<std::vector<std::size_t>>());
  const auto flat = j.at("parameters").get<std::vector<double>>();
  if (flat.size() != net.parameter_count())
    throw InvalidArgument("mlp json: expected " + std::to_string(net.parameter_count()) +
                          " parameters, got " + std::to_string(flat.size()));
  std::size_t k = 0;
  for (auto& layer : net.layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = flat[k++];
  }
  return net;
}

namespace {

Eigen::MatrixXd to_matrix(std::span<const Point> xs, std::size_t dim) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != dim)
      throw InvalidArgument("mlp: point has dimension " + std::to_string(xs[i].size()) +
                            ", net expects " + std::to_string(dim));
    for (std::size_t j = 0; j < dim; ++j)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = xs[i][j];
  }
  return m;
}

// Loss and gradient for one batch laid out column-wise.
double loss_and_gradient(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                         const Eigen::RowVectorXd& labels, std::vector<DenseLayer>* grads) {
  const auto n = static_cast<double>(inputs.cols());
  std::vector<Eigen::MatrixXd> pre;  // pre-activations per layer
  std::vector<Eigen::MatrixXd> act{inputs};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * act.back();
    z.colwise() += layers[l].bias;
    pre.push_back(z);
    if (l + 1 < layers.size()) act.push_back(z.cwiseMax(0.0));
  }
  const Eigen::RowVectorXd logits = pre.back().row(0);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) loss += softplus(logits(i)) - labels(i) * logits(i);
  loss /= n;
  if (grads == nullptr) return loss;

  grads->resize(layers.size());
  Eigen::MatrixXd delta(1, logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) delta(0, i) = (sigmoid(logits(i)) - labels(i)) / n;
  for (std::size_t l = layers.size(); l-- > 0;) {
    (*grads)[l].weights = delta * act[l].transpose();
    (*grads)[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
    // ReLU derivative, taken as 0 at exactly 0.
    delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

void check_batch(const LabeledBatch& batch) {
  if (batch.points.empty()) throw InvalidArgument("mlp: batch must be non-empty");
  if (batch.points.size() != batch.labels.size())
    throw InvalidArgument("mlp: batch has mismatched points and labels");
}

}  // namespace

double mlp_loss(const MLPNet& net, const LabeledBatch& batch) {
  check_batch(batch);
  const Eigen::MatrixXd x = to_matrix(batch.points, net.input_dim());
  const Eigen::RowVectorXd y =
      Eigen::Map<const Eigen::RowVectorXd>(batch.labels.data(), static_cast<Eigen::Index>(batch.labels.size()));
  return loss_and_gradient(net.layers(), x, y, nullptr);
}

std::vector<DenseLayer> mlp_gradient(const MLPNet& net, const LabeledBatch& batch) {
  check_batch(batch);
  const Eigen::MatrixXd x = to_matrix(batch.points, net.input_dim());
  const Eigen::RowVectorXd y =
      Eigen::Map<const Eigen::RowVectorXd>(batch.labels.data(), static_cast<Eigen::Index>(batch.labels.size()));
  std::vector<DenseLayer> grads;
  loss_and_gradient(net.layers(), x, y, &grads);
  return grads;
}

double grad_check(const MLPNet& net, const LabeledBatch& batch, double step) {
  const auto analytic = mlp_gradient(net, batch);
  const Eigen::MatrixXd x = to_matrix(batch.points, net.input_dim());
  const Eigen::RowVectorXd y =
      Eigen::Map<const Eigen::RowVectorXd>(batch.labels.data(), static_cast<Eigen::Index>(batch.labels.size()));

  std::vector<DenseLayer> probe = net.layers();
  auto numeric = [&](double& param) {
    const double saved = param;
    param = saved + step;
    const double up = loss_and_gradient(probe, x, y, nullptr);
    param = saved - step;
    const double down = loss_and_gradient(probe, x, y, nullptr);
    param = saved;
    return (up - down) / (2.0 * step);
  };
  auto rel_error = [](double a, double b) {
    // Floor keeps parameters with (near) zero gradient from dividing noise by noise.
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
  };

  double worst = 0.0;
  for (std::size_t l = 0; l < probe.size(); ++l) {
    auto& w = probe[l].weights;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        worst = std::max(worst, rel_error(analytic[l].weights(r, c), numeric(w(r, c))));
    auto& b = probe[l].bias;
    for (Eigen::Index r = 0; r < b.size(); ++r)
      worst = std::max(worst, rel_error(analytic[l].bias(r), numeric(b(r))));
  }
  return worst;
}

TrainResult mlp_train(MLPNet net, std::span<const Point> real, std::span<const Point> fake,
                      const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("mlp_train: learning rate must be > 0");
  if (cfg.epochs < 1) throw InvalidArgument("mlp_train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw InvalidArgument("mlp_train: batch size must be >= 1");
  if (real.empty() || fake.empty()) throw InvalidArgument("mlp_train: real and fake sets must be non-empty");

  const std::size_t dim = net.input_dim();
  std::vector<Point> points(real.begin(), real.end());
  points.insert(points.end(), fake.begin(), fake.end());
  std::vector<double> labels(real.size(), 1.0);
  labels.resize(points.size(), 0.0);
  const Eigen::MatrixXd all_x = to_matrix(points, dim);
  const Eigen::RowVectorXd all_y =
      Eigen::Map<const Eigen::RowVectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));

  auto& layers = net.layers();
  std::vector<DenseLayer> m1, m2;
  for (const auto& layer : layers) {
    m1.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                  Eigen::VectorXd::Zero(layer.bias.size())});
  }
  m2 = m1;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<DenseLayer> grads;
  std::size_t t = 0;
  TrainResult result{net, {}, 0.0};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      Eigen::MatrixXd bx(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
      Eigen::RowVectorXd by(static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i) {
        const auto src = static_cast<Eigen::Index>(order[start + i]);
        bx.col(static_cast<Eigen::Index>(i)) = all_x.col(src);
        by(static_cast<Eigen::Index>(i)) = all_y(src);
      }
      const double loss = loss_and_gradient(layers, bx, by, &grads);
      if (!std::isfinite(loss))
        throw RuntimeError("mlp_train: non-finite loss at epoch " + std::to_string(epoch));
      ++t;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (cfg.optimizer == Optimizer::kSgd) {
          layers[l].weights -= cfg.learning_rate * grads[l].weights;
          layers[l].bias -= cfg.learning_rate * grads[l].bias;
          continue;
        }
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        auto adam = [&](auto& param, auto& mean, auto& var, const auto& g) {
          mean = cfg.beta1 * mean + (1.0 - cfg.beta1) * g;
          var = cfg.beta2 * var + (1.0 - cfg.beta2) * g.cwiseProduct(g);
          param.array() -= cfg.learning_rate * (mean.array() / c1) /
                           ((var.array() / c2).sqrt() + cfg.adam_epsilon);
        };
        adam(layers[l].weights, m1[l].weights, m2[l].weights, grads[l].weights);
        adam(layers[l].bias, m1[l].bias, m2[l].bias, grads[l].bias);
      }
    }
    const double epoch_loss = loss_and_gradient(layers, all_x, all_y, nullptr);
    if (!std::isfinite(epoch_loss))
      throw RuntimeError("mlp_train: non-finite loss at epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(epoch_loss);
  }
  result.final_loss = result.epoch_loss.back();
  result.net = std::move(net);
  return result;
}

Discriminator mlp_discriminator(MLPNet net) {
  auto shared = std::make_shared<const MLPNet>(std::move(net));
  return Discriminator([shared](std::span<const double> x) { return shared->forward(x); }, true,
                       [shared](std::span<const Point> xs) { return shared->forward_batch(xs); });
}

}  // namespace mhgan
