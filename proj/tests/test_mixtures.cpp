#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mhgan/error.hpp"
#include "mhgan/metrics.hpp"
#include "mhgan/mixtures.hpp"

using namespace mhgan;

namespace {

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST(GaussianMixture, SingleStandardNormalAtZero) {
  const GaussianMixture m({{{0.0}, 1.0}}, {1.0});
  const Point x{0.0};
  EXPECT_NEAR(m.logpdf(x), -0.9189385332046727, 1e-15);
}

TEST(GaussianMixture, TwoComponentsMatchDirectSum) {
  const auto m = GaussianMixture::uniform({{{-1.0}, 1.0}, {{1.0}, 1.0}});
  const Point x{0.0};
  const double direct = 0.5 * normal_pdf(0.0, -1.0, 1.0) + 0.5 * normal_pdf(0.0, 1.0, 1.0);
  EXPECT_NEAR(m.logpdf(x), std::log(direct), 1e-14);
}

TEST(GaussianMixture, Grid25AtOriginMatchesBruteForce) {
  const auto m = make_grid25();
  double sum = 0.0;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      const double px = normal_pdf(0.0, c - 2.0, kGrid25Sigma);
      const double py = normal_pdf(0.0, 2.0 - r, kGrid25Sigma);
      sum += px * py / 25.0;
    }
  const Point x{0.0, 0.0};
  EXPECT_NEAR(m.logpdf(x), std::log(sum), 1e-12);
}

TEST(GaussianMixture, FarPointsStayFinite) {
  const auto m = make_grid25();
  for (double v : {-100.0, -37.5, 55.0, 100.0}) {
    const Point x{v, -v};
    const double lp = m.logpdf(x);
    ASSERT_TRUE(std::isfinite(lp)) << v;
    // Bounded by the nearest component's own log-density and that minus log 25.
    const double dx = std::min(std::abs(v - 2.0), std::abs(v + 2.0));
    const double nearest = -(2.0 * dx * dx) / (2.0 * kGrid25Sigma * kGrid25Sigma) -
                           std::log(2.0 * std::numbers::pi * kGrid25Sigma * kGrid25Sigma);
    EXPECT_LE(lp, nearest + 1e-9);
    EXPECT_GE(lp, nearest - std::log(25.0) - 1e-9);
  }
}

TEST(GaussianMixture, DimensionMismatchThrows) {
  const auto m = make_grid25();
  const Point x{0.0};
  EXPECT_THROW(m.logpdf(x), InvalidArgument);
}

TEST(GaussianMixture, ConstructorValidates) {
  EXPECT_THROW(GaussianMixture({{{0.0}, 1.0}}, {0.9}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{{0.0}, 1.0}, {{0.0, 1.0}, 1.0}}, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{{0.0}, 0.0}}, {1.0}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{{0.0}, -1.0}}, {1.0}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{Point{}, 1.0}}, {1.0}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({}, {}), InvalidArgument);
  EXPECT_NO_THROW(GaussianMixture({{{0.0}, 1.0}, {{1.0}, 1.0}}, {0.3, 0.7}));
}

TEST(GaussianMixture, SampleZeroIsEmpty) {
  Rng rng = substream(1, 0);
  EXPECT_TRUE(make_grid25().sample(0, rng).empty());
}

TEST(GaussianMixture, SingleComponentMoments) {
  const GaussianMixture m({{{0.0}, 0.05}}, {1.0});
  Rng rng = substream(7, 0);
  const auto xs = m.sample(10000, rng);
  double mean = 0.0, sq = 0.0;
  for (const auto& x : xs) mean += x[0];
  mean /= xs.size();
  for (const auto& x : xs) sq += (x[0] - mean) * (x[0] - mean);
  const double sd = std::sqrt(sq / (xs.size() - 1));
  EXPECT_NEAR(mean, 0.0, 0.005);
  EXPECT_NEAR(sd, 0.05, 0.005);
}

TEST(GaussianMixture, Grid25CountsPerComponent) {
  const auto m = make_grid25();
  Rng rng = substream(11, 0);
  const auto xs = m.sample(100000, rng);
  const auto a = assign_modes(xs, m);
  ASSERT_EQ(a.counts.size(), 25u);
  for (auto c : a.counts) {
    EXPECT_GE(c, 3600u);
    EXPECT_LE(c, 4400u);
  }
}

TEST(Grid25, Layout) {
  const auto m = make_grid25();
  ASSERT_EQ(m.size(), 25u);
  bool low = false, high = false;
  for (const auto& c : m.components()) {
    EXPECT_EQ(c.sigma, 0.05);
    if (c.mean == Point{-2.0, -2.0}) low = true;
    if (c.mean == Point{2.0, 2.0}) high = true;
  }
  EXPECT_TRUE(low);
  EXPECT_TRUE(high);
  for (std::size_t k = 20; k < 25; ++k) EXPECT_EQ(m.components()[k].mean[1], -2.0);
  for (double w : m.weights()) EXPECT_NEAR(w, 1.0 / 25.0, 1e-15);
}

TEST(Univariate4, DataAndGenerator) {
  const auto data = make_univariate4();
  ASSERT_EQ(data.size(), 4u);
  for (double w : data.weights()) EXPECT_DOUBLE_EQ(w, 0.25);
  const auto gen = make_univariate4(3);
  ASSERT_EQ(gen.size(), 3u);
  for (double w : gen.weights()) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(make_univariate4(4), InvalidArgument);
  const Point at{3.0};
  EXPECT_LT(gen.logpdf(at), data.logpdf(at) - 5.0);
}

TEST(Univariate4, MissingComponentBoundedByRemainingComponents) {
  const auto data = make_univariate4();
  for (std::size_t k = 0; k < 4; ++k) {
    const auto gen = make_univariate4(k);
    for (const auto& c : gen.components()) EXPECT_NE(c.mean, data.components()[k].mean);
    for (double x = -8.0; x <= 8.0; x += 0.01) {
      const Point p{x};
      double bound = -INFINITY;
      for (const auto& c : gen.components()) bound = std::max(bound, isotropic_normal_logpdf(p, c.mean, c.sigma));
      EXPECT_LE(gen.logpdf(p), bound + 1e-12);
    }
  }
}

TEST(GaussianMixture, IntegratesToOne) {
  const std::vector<GaussianMixture> mixtures{make_univariate4(), make_univariate4(0),
                                              GaussianMixture({{{-0.5}, 0.3}, {{2.0}, 1.5}}, {0.2, 0.8})};
  for (const auto& m : mixtures) {
    const int n = 20000;
    const double h = 20.0 / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
      const Point x{-10.0 + i * h};
      const double f = std::exp(m.logpdf(x));
      total += (i == 0 || i == n) ? 0.5 * f : f;
    }
    EXPECT_NEAR(total * h, 1.0, 1e-3);
  }
}

TEST(GaussianMixture, IndependentSamplesPassKs) {
  const auto m = make_univariate4();
  int passes = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Rng a = substream(1000 + t, 0), b = substream(1000 + t, 1);
    const auto xa = m.sample(1000, a), xb = m.sample(1000, b);
    if (ks_two_sample(xa, xb).p_value > 0.01) ++passes;
  }
  EXPECT_GE(passes, 0.95 * trials);
}

TEST(GaussianMixture, WithoutRenormalises) {
  const GaussianMixture m({{{0.0}, 1.0}, {{1.0}, 1.0}, {{2.0}, 1.0}}, {0.2, 0.3, 0.5});
  const auto w = m.without(2);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_NEAR(w.weights()[0], 0.4, 1e-15);
  EXPECT_NEAR(w.weights()[1], 0.6, 1e-15);
  EXPECT_THROW(m.without(3), InvalidArgument);
}

TEST(LogSumExp, Basics) {
  const std::vector<double> empty;
  EXPECT_EQ(log_sum_exp(empty), -INFINITY);
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> with_inf{-INFINITY, 0.0};
  EXPECT_NEAR(log_sum_exp(with_inf), 0.0, 1e-15);
}
