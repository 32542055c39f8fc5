#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mhgan/rng.hpp"

namespace mhgan {

using Point = std::vector<double>;

struct GaussianComponent {
  Point mean;
  double sigma = 1.0;  // isotropic standard deviation
};

/// Isotropic Gaussian mixture with exact log-density and sampling.
/// Immutable after construction.
class GaussianMixture {
 public:
  /// Throws InvalidArgument unless weights sum to 1 (within 1e-12), all
  /// components share one dimension d >= 1, and every sigma is positive.
  GaussianMixture(std::vector<GaussianComponent> components, std::vector<double> weights);

  /// Equal weights over the given components.
  static GaussianMixture uniform(std::vector<GaussianComponent> components);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return components_.size(); }
  const std::vector<GaussianComponent>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }

  /// log sum_i w_i N(x; mu_i, sigma_i^2 I), log-sum-exp stabilised.
  double logpdf(std::span<const double> x) const;

  Point sample(Rng& rng) const;
  std::vector<Point> sample(std::size_t n, Rng& rng) const;

  /// Mixture without component `index`, remaining weights renormalised.
  GaussianMixture without(std::size_t index) const;

 private:
  std::vector<GaussianComponent> components_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<double> log_norm_;  // -d/2 log(2 pi sigma^2) per component
  std::vector<double> cdf_;
  std::size_t dim_ = 0;
};

/// log N(x; mean, sigma^2 I).
double isotropic_normal_logpdf(std::span<const double> x, std::span<const double> mean,
                               double sigma);

/// Numerically stable log(sum(exp(values))). Returns -inf for empty input.
double log_sum_exp(std::span<const double> values);

/// The 5x5 benchmark: means on {-2,-1,0,1,2}^2, sigma 0.05, equal weights.
/// Component k = 5*row + col sits at (col - 2, 2 - row), so indices 20..24
/// form the bottom row y = -2.
GaussianMixture make_grid25();

inline constexpr double kGrid25Sigma = 0.05;

/// Four well separated 1-d modes at {-3,-1,1,3} with sigma 0.5. With
/// `missing` set, that component is removed (the generator of the
/// missing-mode study). Throws InvalidArgument for an index outside 0..3.
GaussianMixture make_univariate4(std::optional<std::size_t> missing = std::nullopt);

inline constexpr double kUnivariate4Sigma = 0.5;

}  // namespace mhgan
