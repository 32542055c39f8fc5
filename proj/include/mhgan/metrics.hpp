#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mhgan/mixtures.hpp"

namespace mhgan {

/// Nearest-mode assignment with a 4-sigma acceptance radius.
struct ModeAssignment {
  static constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);

  std::vector<std::size_t> category;  // mode index, or kUnassigned
  std::vector<std::size_t> counts;    // per mode
  std::size_t unassigned = 0;
  std::vector<double> weights;        // reference weights of the mixture modes
  std::size_t total() const { return category.size(); }
};

/// Each sample goes to its nearest mean (lowest index on ties) when that
/// mean is within 4 sigma of it, otherwise to the unassigned category.
ModeAssignment assign_modes(std::span<const Point> samples, const GaussianMixture& m);

/// 1 - unassigned / total. Throws InvalidArgument for an empty sample set.
double high_quality_rate(const ModeAssignment& a);

/// Jensen-Shannon divergence (nats) between the empirical distribution over
/// modes + unassigned and the mixture weights (zero mass on unassigned).
double mode_jsd(const ModeAssignment& a);

/// Jensen-Shannon divergence (nats) between two histograms of equal length;
/// each is normalised first.
double jensen_shannon(std::span<const double> p, std::span<const double> q);

/// Per mode with at least two samples: root-mean-square L2 deviation from
/// the mode mean divided by sqrt(d), so N(mu, sigma^2 I) gives about sigma;
/// averaged over modes weighted by their counts. Throws InvalidArgument when no mode has two samples.
double within_mode_std(std::span<const Point> samples, const ModeAssignment& a,
                       const GaussianMixture& m);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function Q(lambda), series cut at 100 terms.
double kolmogorov_survival(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// sqrt(n m / (n + m)) * D. Throws InvalidArgument on an empty input.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Per-coordinate KS; p-value is the Bonferroni-combined min(1, d * min p).
KsResult ks_two_sample(std::span<const Point> a, std::span<const Point> b);

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counted half.
double roc_auc(std::span<const double> positive, std::span<const double> negative);

}  // namespace mhgan
