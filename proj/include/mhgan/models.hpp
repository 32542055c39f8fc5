#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "mhgan/mixtures.hpp"
#include "mhgan/rng.hpp"

namespace mhgan {

/// Black-box sample source. When the generator is analytic its log-density
/// is exposed as well, which is what the oracle discriminator needs.
class Generator {
 public:
  using DrawFn = std::function<Point(Rng&)>;
  using LogDensityFn = std::function<double(std::span<const double>)>;

  Generator(DrawFn draw, std::size_t dim, LogDensityFn log_density = {});

  /// Analytic generator backed by a mixture.
  static Generator from_mixture(GaussianMixture m);

  Point draw(Rng& rng) const { return draw_(rng); }
  std::vector<Point> draw(std::size_t n, Rng& rng) const;

  std::size_t dim() const { return dim_; }
  bool is_analytic() const { return static_cast<bool>(log_density_); }
  /// Throws InvalidArgument when the generator is not analytic.
  double log_density(std::span<const double> x) const;
  /// The underlying mixture, when the generator is exactly one.
  const std::optional<GaussianMixture>& mixture() const { return mixture_; }

 private:
  DrawFn draw_;
  LogDensityFn log_density_;
  std::optional<GaussianMixture> mixture_;
  std::size_t dim_;
};

/// Deterministic score function. Probability-type discriminators score in
/// (0,1); raw ones (WGAN critics) are unbounded and must be calibrated before
/// any sampler sees them.
class Discriminator {
 public:
  using ScoreFn = std::function<double(std::span<const double>)>;
  using BatchFn = std::function<std::vector<double>(std::span<const Point>)>;

  Discriminator(ScoreFn score, bool is_probability, BatchFn batch = {});

  double score(std::span<const double> x) const { return score_(x); }
  /// Equals score() row by row; batched implementations only change speed.
  std::vector<double> score_batch(std::span<const Point> xs) const;
  bool is_probability() const { return is_probability_; }

 private:
  ScoreFn score_;
  BatchFn batch_;
  bool is_probability_;
};

/// Scores every point with `value`.
Discriminator constant_discriminator(double value);

/// D(x) = p_data(x) / (p_data(x) + p_g(x)), evaluated from log-densities.
Discriminator oracle_discriminator(const GaussianMixture& p_data, const GaussianMixture& p_g);
/// Same, for any analytic generator.
Discriminator oracle_discriminator(const GaussianMixture& p_data, const Generator& g);

/// score'(x) = sigmoid(a * logit(score(x)) + b). Monotone for a > 0, so it
/// keeps the ranking (and the AUC) while breaking calibration.
Discriminator warp_discriminator(const Discriminator& d, double a, double b);

double sigmoid(double z);
double logit(double p);
/// Clamps into the open interval (0,1) at double resolution.
double open_unit(double p);

/// Stand-in for an imperfectly trained grid25 GAN: grid25 without the
/// `drop` modes, mixed with weight `bridge_weight` of "bridge" mass spread
/// uniformly along the segments joining horizontally or vertically adjacent
/// grid means (all 40 pairs of the full grid), plus N(0, sigma^2 I) noise.
/// Each segment is trimmed to the part farther than 4 sigma from both
/// means, so bridge draws count as off-mode. The result is analytic.
Generator imperfect_grid_generator(const std::set<std::size_t>& drop, double bridge_weight);

}  // namespace mhgan
