#include "mhgan/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "mhgan/error.hpp"

namespace mhgan {

std::string_view to_string(CalibratorKind kind) {
  switch (kind) {
    case CalibratorKind::kIdentity: return "identity";
    case CalibratorKind::kLogistic: return "logistic";
    case CalibratorKind::kIsotonic: return "isotonic";
    case CalibratorKind::kBeta: return "beta";
  }
  return "identity";
}

CalibratorKind calibrator_kind_from_string(std::string_view name) {
  if (name == "identity") return CalibratorKind::kIdentity;
  if (name == "logistic") return CalibratorKind::kLogistic;
  if (name == "isotonic") return CalibratorKind::kIsotonic;
  if (name == "beta") return CalibratorKind::kBeta;
  throw InvalidArgument("unknown calibrator '" + std::string(name) +
                        "' (expected identity, logistic, isotonic or beta)");
}

CalibrationSet make_calibration_set(std::span<const Point> real, std::span<const Point> fake,
                                    const Discriminator& d, Rng& rng) {
  if (real.size() != fake.size())
    throw InvalidArgument("calibration set needs equal real and fake counts, got " +
                          std::to_string(real.size()) + " and " + std::to_string(fake.size()));
  if (real.size() < 2) throw InvalidArgument("calibration set needs at least 2 real and 2 fake points");

  const auto real_scores = d.score_batch(real);
  const auto fake_scores = d.score_batch(fake);
  std::vector<std::size_t> order(real.size() + fake.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  CalibrationSet cs;
  cs.is_probability = d.is_probability();
  cs.scores.reserve(order.size());
  cs.labels.reserve(order.size());
  for (auto i : order) {
    const bool is_real = i < real.size();
    cs.scores.push_back(is_real ? real_scores[i] : fake_scores[i - real.size()]);
    cs.labels.push_back(is_real ? 1 : 0);
  }
  return cs;
}

namespace {

struct Block {
  double sum, weight;  // sum of weight * value
  std::size_t count;
  double mean() const { return sum / weight; }
};

std::vector<Block> pava_blocks(std::span<const double> values, std::span<const double> weights) {
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(weights[i] > 0.0)) throw InvalidArgument("pava: weights must be positive");
    blocks.push_back({values[i] * weights[i], weights[i], 1});
    // Equal neighbours merge too, so runs of one value form one block.
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() >= blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      prev.sum += top.sum;
      prev.weight += top.weight;
      prev.count += top.count;
    }
  }
  return blocks;
}

std::vector<double> expand(const std::vector<Block>& blocks) {
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean());
  return out;
}

}  // namespace

std::vector<double> pava(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw InvalidArgument("pava: values and weights differ in length");
  return expand(pava_blocks(values, weights));
}

namespace {

// Maximum-likelihood logistic regression by damped Newton. `features` is
// n x p and must already contain an intercept column if one is wanted.
Eigen::VectorXd newton_logistic(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  const Eigen::Index n = features.rows(), p = features.cols();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];

  auto loglik = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = features * w;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log sigmoid(z) = -softplus(-z), log(1 - sigmoid(z)) = -softplus(z)
      const double sp_pos = z(i) > 0 ? z(i) + std::log1p(std::exp(-z(i))) : std::log1p(std::exp(z(i)));
      ll += y(i) * (z(i) - sp_pos) - (1.0 - y(i)) * sp_pos;
    }
    return ll;
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  double current = loglik(w);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd z = features * w;
    Eigen::VectorXd prob(n), curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(z(i));
      curv(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = features.transpose() * (y - prob);
    const Eigen::MatrixXd info = features.transpose() * curv.asDiagonal() * features;
    Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite()) break;

    double scale = 1.0;
    double next = loglik(w + step);
    while (next < current && scale > 1e-10) {
      scale *= 0.5;
      next = loglik(w + scale * step);
    }
    if (next < current) break;
    w += scale * step;
    current = next;
    if ((scale * step).lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  return w;
}

bool all_identical(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

}  // namespace

Calibrator fit_calibrator(CalibratorKind kind, const CalibrationSet& cs,
                          double isotonic_pseudo_count) {
  if (!(isotonic_pseudo_count >= 0.0))
    throw InvalidArgument("isotonic pseudo-count must be >= 0");
  if (cs.scores.size() != cs.labels.size())
    throw InvalidArgument("calibration set has mismatched scores and labels");
  if (cs.scores.empty()) throw InvalidArgument("calibration set is empty");
  for (int y : cs.labels)
    if (y != 0 && y != 1) throw InvalidArgument("calibration labels must be 0 or 1");

  Calibrator c;
  c.kind_ = kind;
  c.logit_input_ = cs.is_probability;
  const auto n = static_cast<Eigen::Index>(cs.scores.size());

  switch (kind) {
    case CalibratorKind::kIdentity:
      break;

    case CalibratorKind::kLogistic: {
      if (all_identical(cs.scores))
        throw InvalidArgument("logistic calibration needs more than one distinct score");
      Eigen::MatrixXd f(n, 2);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = cs.scores[static_cast<std::size_t>(i)];
        f(i, 0) = cs.is_probability ? logit(open_unit(s)) : s;
        f(i, 1) = 1.0;
      }
      const auto w = newton_logistic(f, cs.labels);
      c.a_ = w(0);
      c.b_ = w(1);
      break;
    }

    case CalibratorKind::kBeta: {
      if (!cs.is_probability)
        throw InvalidArgument("beta calibration needs probability scores in (0,1)");
      if (all_identical(cs.scores))
        throw InvalidArgument("beta calibration needs more than one distinct score");
      Eigen::MatrixXd f(n, 3);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = open_unit(cs.scores[static_cast<std::size_t>(i)]);
        f(i, 0) = std::log(s);
        f(i, 1) = -std::log1p(-s);
        f(i, 2) = 1.0;
      }
      auto w = newton_logistic(f, cs.labels);
      // A negative shape coefficient is fixed at zero and the rest refitted.
      if (w(0) < 0.0 || w(1) < 0.0) {
        const Eigen::Index keep = w(0) < 0.0 ? 1 : 0;
        Eigen::MatrixXd g(n, 2);
        g.col(0) = f.col(keep);
        g.col(1) = f.col(2);
        const auto v = newton_logistic(g, cs.labels);
        w.setZero();
        w(keep) = std::max(0.0, v(0));
        w(2) = v(1);
      }
      c.a_ = w(0);
      c.b_ = w(1);
      c.c_ = w(2);
      break;
    }

    case CalibratorKind::kIsotonic: {
      std::vector<std::size_t> order(cs.scores.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t i, std::size_t j) { return cs.scores[i] < cs.scores[j]; });
      // Pool tied scores into one weighted observation.
      std::vector<double> means, weights;
      for (std::size_t k = 0; k < order.size();) {
        const double s = cs.scores[order[k]];
        double sum = 0.0, count = 0.0;
        for (; k < order.size() && cs.scores[order[k]] == s; ++k) {
          sum += cs.labels[order[k]];
          count += 1.0;
        }
        c.xs_.push_back(s);
        means.push_back(sum / count);
        weights.push_back(count);
      }
      auto blocks = pava_blocks(means, weights);
      if (isotonic_pseudo_count > 0.0) {
        const double a = isotonic_pseudo_count;
        std::vector<double> shrunk, shrunk_w;
        for (const auto& b : blocks) {
          shrunk.push_back((b.sum + a) / (b.weight + 2.0 * a));
          shrunk_w.push_back(b.weight + 2.0 * a);
        }
        // Shrinking can reorder neighbouring blocks of different sizes.
        const auto pooled = pava(shrunk, shrunk_w);
        for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] = {pooled[i], 1.0, blocks[i].count};
      }
      c.ys_ = expand(blocks);
      c.pseudo_count_ = isotonic_pseudo_count;
      break;
    }
  }
  return c;
}

double Calibrator::fitted(double score) const {
  switch (kind_) {
    case CalibratorKind::kIdentity:
      return score;
    case CalibratorKind::kLogistic: {
      const double s = logit_input_ ? logit(open_unit(score)) : score;
      return sigmoid(a_ * s + b_);
    }
    case CalibratorKind::kBeta: {
      const double s = open_unit(score);
      return sigmoid(a_ * std::log(s) - b_ * std::log1p(-s) + c_);
    }
    case CalibratorKind::kIsotonic: {
      if (xs_.empty()) return 0.5;
      if (score <= xs_.front()) return ys_.front();
      if (score >= xs_.back()) return ys_.back();
      const auto hi = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), score) - xs_.begin());
      const std::size_t lo = hi - 1;
      const double t = (score - xs_[lo]) / (xs_[hi] - xs_[lo]);
      return ys_[lo] + t * (ys_[hi] - ys_[lo]);
    }
  }
  return score;
}

double Calibrator::apply(double score) const {
  const double p = fitted(score);
  if (std::isnan(p)) return 0.5;
  return std::clamp(p, epsilon_, 1.0 - epsilon_);
}

nlohmann::json Calibrator::to_json() const {
  nlohmann::json j{{"kind", std::string(to_string(kind_))}, {"epsilon", epsilon_}};
  switch (kind_) {
    case CalibratorKind::kIdentity: break;
    case CalibratorKind::kLogistic:
      j["a"] = a_;
      j["b"] = b_;
      j["logit_input"] = logit_input_;
      break;
    case CalibratorKind::kBeta:
      j["a"] = a_;
      j["b"] = b_;
      j["c"] = c_;
      break;
    case CalibratorKind::kIsotonic:
      j["breakpoints"] = xs_;
      j["values"] = ys_;
      j["pseudo_count"] = pseudo_count_;
      break;
  }
  return j;
}

Calibrator Calibrator::from_json(const nlohmann::json& j) {
  Calibrator c;
  c.kind_ = calibrator_kind_from_string(j.at("kind").get<std::string>());
  c.epsilon_ = j.value("epsilon", kCalibrationEpsilon);
  c.a_ = j.value("a", 1.0);
  c.b_ = j.value("b", 0.0);
  c.c_ = j.value("c", 0.0);
  c.logit_input_ = j.value("logit_input", true);
  if (c.kind_ == CalibratorKind::kIsotonic) {
    c.xs_ = j.at("breakpoints").get<std::vector<double>>();
    c.ys_ = j.at("values").get<std::vector<double>>();
    c.pseudo_count_ = j.value("pseudo_count", 0.0);
    if (c.xs_.size() != c.ys_.size())
      throw InvalidArgument("isotonic calibrator json: breakpoints and values differ in length");
  }
  return c;
}

Discriminator calibrated(const Discriminator& d, const Calibrator& c) {
  return Discriminator([d, c](std::span<const double> x) { return c.apply(d.score(x)); }, true,
                       [d, c](std::span<const Point> xs) {
                         auto s = d.score_batch(xs);
                         for (double& v : s) v = c.apply(v);
                         return s;
                       });
}

double z_statistic(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size())
    throw InvalidArgument("z_statistic: probabilities and labels differ in length");
  if (probs.empty()) throw InvalidArgument("z_statistic: needs at least one observation");
  double num = 0.0, var = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("z_statistic: probabilities must lie in [0,1]");
    num += labels[i] - p;
    var += p * (1.0 - p);
  }
  if (!(var > 0.0)) throw InvalidArgument("z_statistic: zero variance (all probabilities at 0 or 1)");
  return num / std::sqrt(var);
}

}  // namespace mhgan
