#include "mhgan/mixtures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "mhgan/error.hpp"

namespace mhgan {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

double isotropic_normal_logpdf(std::span<const double> x, std::span<const double> mean,
                               double sigma) {
  double sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - mean[j];
    sq += diff * diff;
  }
  const double d = static_cast<double>(x.size());
  return -0.5 * sq / (sigma * sigma) - 0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components,
                                 std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
  if (components_.size() != weights_.size())
    throw InvalidArgument("mixture has " + std::to_string(components_.size()) +
                          " components but " + std::to_string(weights_.size()) + " weights");
  dim_ = components_.front().mean.size();
  if (dim_ == 0) throw InvalidArgument("mixture dimension must be >= 1");
  double total = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    if (c.mean.size() != dim_)
      throw InvalidArgument("component " + std::to_string(i) + " has dimension " +
                            std::to_string(c.mean.size()) + ", expected " + std::to_string(dim_));
    if (!(c.sigma > 0.0) || !std::isfinite(c.sigma))
      throw InvalidArgument("component " + std::to_string(i) + " sigma must be positive");
    if (!(weights_[i] > 0.0))
      throw InvalidArgument("component " + std::to_string(i) + " weight must be positive");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidArgument("mixture weights sum to " + std::to_string(total) + ", expected 1");

  log_weights_.reserve(weights_.size());
  log_norm_.reserve(weights_.size());
  const double d = static_cast<double>(dim_);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    log_weights_.push_back(std::log(weights_[i]));
    const double s = components_[i].sigma;
    log_norm_.push_back(-0.5 * d * std::log(2.0 * std::numbers::pi * s * s));
  }
  cdf_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cdf_.begin());
}

GaussianMixture GaussianMixture::uniform(std::vector<GaussianComponent> components) {
  const std::size_t n = components.size();
  if (n == 0) throw InvalidArgument("mixture needs at least one component");
  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  // 1/n summed n times can drift a few ulps off 1; put the residue on the last weight.
  const double head = std::accumulate(weights.begin(), weights.end() - 1, 0.0);
  weights.back() = 1.0 - head;
  return GaussianMixture(std::move(components), std::move(weights));
}

double GaussianMixture::logpdf(std::span<const double> x) const {
  if (x.size() != dim_)
    throw InvalidArgument("point has dimension " + std::to_string(x.size()) + ", mixture has " +
                          std::to_string(dim_));
  // Small fixed buffer keeps the hot path allocation-free for typical sizes.
  constexpr std::size_t kInline = 32;
  double inline_terms[kInline];
  std::vector<double> heap_terms;
  double* terms = inline_terms;
  if (components_.size() > kInline) {
    heap_terms.resize(components_.size());
    terms = heap_terms.data();
  }
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    double sq = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double diff = x[j] - c.mean[j];
      sq += diff * diff;
    }
    terms[i] = log_weights_[i] + log_norm_[i] - 0.5 * sq / (c.sigma * c.sigma);
  }
  return log_sum_exp(std::span<const double>(terms, components_.size()));
}

Point GaussianMixture::sample(Rng& rng) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()),
                                       components_.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto& c = components_[k];
  Point x(dim_);
  for (std::size_t j = 0; j < dim_; ++j) x[j] = c.mean[j] + c.sigma * noise(rng);
  return x;
}

std::vector<Point> GaussianMixture::sample(std::size_t n, Rng& rng) const {
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample(rng));
  return out;
}

GaussianMixture GaussianMixture::without(std::size_t index) const {
  if (index >= components_.size())
    throw InvalidArgument("component index " + std::to_string(index) + " out of range");
  if (components_.size() == 1) throw InvalidArgument("cannot remove the only component");
  std::vector<GaussianComponent> comps;
  std::vector<double> w;
  double kept = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i == index) continue;
    comps.push_back(components_[i]);
    w.push_back(weights_[i]);
    kept += weights_[i];
  }
  for (double& v : w) v /= kept;
  const double head = std::accumulate(w.begin(), w.end() - 1, 0.0);
  w.back() = 1.0 - head;
  return GaussianMixture(std::move(comps), std::move(w));
}

GaussianMixture make_grid25() {
  std::vector<GaussianComponent> comps;
  comps.reserve(25);
  for (int row = 0; row < 5; ++row)
    for (int col = 0; col < 5; ++col)
      comps.push_back({{static_cast<double>(col - 2), static_cast<double>(2 - row)}, kGrid25Sigma});
  return GaussianMixture::uniform(std::move(comps));
}

GaussianMixture make_univariate4(std::optional<std::size_t> missing) {
  std::vector<GaussianComponent> comps;
  for (double m : {-3.0, -1.0, 1.0, 3.0}) comps.push_back({{m}, kUnivariate4Sigma});
  auto full = GaussianMixture::uniform(std::move(comps));
  if (!missing) return full;
  if (*missing > 3)
    throw InvalidArgument("univariate4 missing index must be in 0..3, got " +
                          std::to_string(*missing));
  return full.without(*missing);
}

}  // namespace mhgan
