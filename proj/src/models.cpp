#include "mhgan/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mhgan/error.hpp"

namespace mhgan {

Generator::Generator(DrawFn draw, std::size_t dim, LogDensityFn log_density)
    : draw_(std::move(draw)), log_density_(std::move(log_density)), dim_(dim) {
  if (!draw_) throw InvalidArgument("generator needs a draw function");
  if (dim_ == 0) throw InvalidArgument("generator dimension must be >= 1");
}

Generator Generator::from_mixture(GaussianMixture m) {
  const std::size_t dim = m.dim();
  auto shared = std::make_shared<const GaussianMixture>(m);
  Generator g([shared](Rng& rng) { return shared->sample(rng); }, dim,
              [shared](std::span<const double> x) { return shared->logpdf(x); });
  g.mixture_ = std::move(m);
  return g;
}

std::vector<Point> Generator::draw(std::size_t n, Rng& rng) const {
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_(rng));
  return out;
}

double Generator::log_density(std::span<const double> x) const {
  if (!log_density_) throw InvalidArgument("generator has no analytic density");
  if (x.size() != dim_)
    throw InvalidArgument("point has dimension " + std::to_string(x.size()) +
                          ", generator has " + std::to_string(dim_));
  return log_density_(x);
}

Discriminator::Discriminator(ScoreFn score, bool is_probability, BatchFn batch)
    : score_(std::move(score)), batch_(std::move(batch)), is_probability_(is_probability) {
  if (!score_) throw InvalidArgument("discriminator needs a score function");
}

std::vector<double> Discriminator::score_batch(std::span<const Point> xs) const {
  if (batch_) return batch_(xs);
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(score_(x));
  return out;
}

Discriminator constant_discriminator(double value) {
  return Discriminator([value](std::span<const double>) { return value; },
                       value > 0.0 && value < 1.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double open_unit(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

namespace {

Discriminator oracle_from(std::function<double(std::span<const double>)> log_data,
                          std::function<double(std::span<const double>)> log_gen) {
  return Discriminator(
      [ld = std::move(log_data), lg = std::move(log_gen)](std::span<const double> x) {
        return open_unit(sigmoid(ld(x) - lg(x)));
      },
      true);
}

}  // namespace

Discriminator oracle_discriminator(const GaussianMixture& p_data, const GaussianMixture& p_g) {
  if (p_data.dim() != p_g.dim())
    throw InvalidArgument("oracle: data dimension " + std::to_string(p_data.dim()) +
                          " differs from generator dimension " + std::to_string(p_g.dim()));
  auto data = std::make_shared<const GaussianMixture>(p_data);
  auto gen = std::make_shared<const GaussianMixture>(p_g);
  return oracle_from([data](std::span<const double> x) { return data->logpdf(x); },
                     [gen](std::span<const double> x) { return gen->logpdf(x); });
}

Discriminator oracle_discriminator(const GaussianMixture& p_data, const Generator& g) {
  if (p_data.dim() != g.dim())
    throw InvalidArgument("oracle: data dimension " + std::to_string(p_data.dim()) +
                          " differs from generator dimension " + std::to_string(g.dim()));
  if (!g.is_analytic()) throw InvalidArgument("oracle: generator has no analytic density");
  auto data = std::make_shared<const GaussianMixture>(p_data);
  return oracle_from([data](std::span<const double> x) { return data->logpdf(x); },
                     [g](std::span<const double> x) { return g.log_density(x); });
}

Discriminator warp_discriminator(const Discriminator& d, double a, double b) {
  if (!d.is_probability())
    throw InvalidArgument("warp: input discriminator must produce probabilities");
  if (a == 0.0) throw InvalidArgument("warp: slope a must be non-zero");
  if (a == 1.0 && b == 0.0) return d;
  auto warp = [a, b](double s) { return open_unit(sigmoid(a * logit(s) + b)); };
  return Discriminator([d, warp](std::span<const double> x) { return warp(d.score(x)); }, true,
                       [d, warp](std::span<const Point> xs) {
                         auto s = d.score_batch(xs);
                         for (double& v : s) v = warp(v);
                         return s;
                       });
}

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

// log of the standard normal upper tail Q(z) = P(Z > z).
double log_upper_tail(double z) {
  if (z < 20.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(z) - kLogSqrt2Pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

// log(Phi(hi) - Phi(lo)) for lo < hi, accurate in both tails.
double log_normal_interval(double lo, double hi) {
  if (lo >= 0.0) {
    const double a = log_upper_tail(lo), b = log_upper_tail(hi);
    return a + std::log1p(-std::exp(b - a));
  }
  if (hi <= 0.0) {
    const double a = log_upper_tail(-hi), b = log_upper_tail(-lo);
    return a + std::log1p(-std::exp(b - a));
  }
  // Straddles 0: 1 - Q(hi) - Q(-lo), no cancellation issue.
  return std::log1p(-0.5 * std::erfc(hi / std::numbers::sqrt2) -
                    0.5 * std::erfc(-lo / std::numbers::sqrt2));
}

struct Segment {
  Point from;
  Point to;
};

// Density of A + t (B - A) + N(0, sigma^2 I) with t ~ U(0,1).
double log_segment_density(std::span<const double> x, const Segment& s, double sigma) {
  const std::size_t d = x.size();
  double len2 = 0.0, along = 0.0, dist2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double dir = s.to[j] - s.from[j];
    const double rel = x[j] - s.from[j];
    len2 += dir * dir;
    along += rel * dir;
    dist2 += rel * rel;
  }
  const double len = std::sqrt(len2);
  along /= len;
  const double perp2 = std::max(0.0, dist2 - along * along);
  const double log_axial = log_normal_interval((along - len) / sigma, along / sigma) - std::log(len);
  const double log_perp = -0.5 * perp2 / (sigma * sigma) -
                          static_cast<double>(d - 1) * (kLogSqrt2Pi + std::log(sigma));
  return log_axial + log_perp;
}

}  // namespace

Generator imperfect_grid_generator(const std::set<std::size_t>& drop, double bridge_weight) {
  const GaussianMixture grid = make_grid25();
  for (auto k : drop)
    if (k >= grid.size())
      throw InvalidArgument("imperfect_grid_generator: mode index " + std::to_string(k) +
                            " out of range 0..24");
  if (drop.size() >= grid.size())
    throw InvalidArgument("imperfect_grid_generator: cannot drop all 25 modes");
  if (!(bridge_weight >= 0.0 && bridge_weight < 1.0))
    throw InvalidArgument("imperfect_grid_generator: bridge_weight must be in [0,1)");

  std::vector<GaussianComponent> kept;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (!drop.contains(k)) kept.push_back(grid.components()[k]);
  auto modes = std::make_shared<const GaussianMixture>(GaussianMixture::uniform(std::move(kept)));
  if (bridge_weight == 0.0) return Generator::from_mixture(*modes);

  const double sigma = kGrid25Sigma;
  // Bridges stop 4 sigma short of both means (grid spacing is 1).
  const double trim = 4.0 * sigma;
  auto segments = std::make_shared<std::vector<Segment>>();
  const auto& comps = grid.components();
  auto add = [&](const Point& a, const Point& b) {
    Segment s{a, b};
    for (std::size_t j = 0; j < a.size(); ++j) {
      s.from[j] = a[j] + trim * (b[j] - a[j]);
      s.to[j] = b[j] - trim * (b[j] - a[j]);
    }
    segments->push_back(std::move(s));
  };
  for (std::size_t row = 0; row < 5; ++row)
    for (std::size_t col = 0; col < 5; ++col) {
      const std::size_t k = 5 * row + col;
      if (col + 1 < 5) add(comps[k].mean, comps[k + 1].mean);
      if (row + 1 < 5) add(comps[k].mean, comps[k + 5].mean);
    }

  const double log_modes_w = std::log1p(-bridge_weight);
  const double log_bridge_w = std::log(bridge_weight) - std::log(static_cast<double>(segments->size()));

  auto draw = [modes, segments, bridge_weight, sigma](Rng& rng) {
    if (uniform01(rng) >= bridge_weight) return modes->sample(rng);
    std::uniform_int_distribution<std::size_t> pick(0, segments->size() - 1);
    const Segment& s = (*segments)[pick(rng)];
    const double t = uniform01(rng);
    std::normal_distribution<double> noise(0.0, sigma);
    Point x(s.from.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = s.from[j] + t * (s.to[j] - s.from[j]) + noise(rng);
    return x;
  };
  auto log_density = [modes, segments, sigma, log_modes_w,
                      log_bridge_w](std::span<const double> x) {
    std::vector<double> terms;
    terms.reserve(segments->size() + 1);
    terms.push_back(log_modes_w + modes->logpdf(x));
    for (const auto& s : *segments) terms.push_back(log_bridge_w + log_segment_density(x, s, sigma));
    return log_sum_exp(terms);
  };
  return Generator(std::move(draw), 2, std::move(log_density));
}

}  // namespace mhgan
