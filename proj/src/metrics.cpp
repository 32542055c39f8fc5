#include "mhgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mhgan/error.hpp"

namespace mhgan {

ModeAssignment assign_modes(std::span<const Point> samples, const GaussianMixture& m) {
  ModeAssignment a;
  a.counts.assign(m.size(), 0);
  a.weights = m.weights();
  a.category.reserve(samples.size());
  const auto& comps = m.components();
  for (const auto& x : samples) {
    if (x.size() != m.dim())
      throw InvalidArgument("assign_modes: sample dimension " + std::to_string(x.size()) +
                            " differs from mixture dimension " + std::to_string(m.dim()));
    std::size_t best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < comps.size(); ++k) {
      double sq = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - comps[k].mean[j];
        sq += diff * diff;
      }
      if (sq < best_sq) {  // strict: ties keep the lower index
        best_sq = sq;
        best = k;
      }
    }
    if (std::sqrt(best_sq) <= 4.0 * comps[best].sigma) {
      a.category.push_back(best);
      ++a.counts[best];
    } else {
      a.category.push_back(ModeAssignment::kUnassigned);
      ++a.unassigned;
    }
  }
  return a;
}

double high_quality_rate(const ModeAssignment& a) {
  if (a.total() == 0) throw InvalidArgument("high_quality_rate: empty sample set");
  return 1.0 - static_cast<double>(a.unassigned) / static_cast<double>(a.total());
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("jensen_shannon: histograms differ in length");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (!(sp > 0.0) || !(sq > 0.0)) throw InvalidArgument("jensen_shannon: histogram has no mass");
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i] / sp, qi = q[i] / sq;
    const double mi = 0.5 * (pi + qi);
    if (pi > 0.0) js += 0.5 * pi * std::log(pi / mi);
    if (qi > 0.0) js += 0.5 * qi * std::log(qi / mi);
  }
  return std::max(0.0, js);
}

double mode_jsd(const ModeAssignment& a) {
  std::vector<double> empirical(a.counts.begin(), a.counts.end());
  empirical.push_back(static_cast<double>(a.unassigned));
  std::vector<double> reference = a.weights;
  reference.push_back(0.0);
  return jensen_shannon(empirical, reference);
}

double within_mode_std(std::span<const Point> samples, const ModeAssignment& a,
                       const GaussianMixture& m) {
  if (samples.size() != a.total())
    throw InvalidArgument("within_mode_std: assignment does not match the samples");
  const std::size_t modes = m.size();
  std::vector<double> sum_sq(modes, 0.0);
  const auto& comps = m.components();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto k = a.category[i];
    if (k == ModeAssignment::kUnassigned) continue;
    for (std::size_t j = 0; j < samples[i].size(); ++j) {
      const double diff = samples[i][j] - comps[k].mean[j];
      sum_sq[k] += diff * diff;
    }
  }
  double weighted = 0.0, total = 0.0;
  for (std::size_t k = 0; k < modes; ++k) {
    if (a.counts[k] < 2) continue;
    const auto n = static_cast<double>(a.counts[k]);
    weighted += n * std::sqrt(sum_sq[k] / n);
    total += n;
  }
  if (total == 0.0) throw InvalidArgument("within_mode_std: no mode has two or more samples");
  return weighted / total / std::sqrt(static_cast<double>(m.dim()));
}

double kolmogorov_survival(double lambda) {
  // The alternating series needs many more than 100 terms below ~0.2, where
  // the survival function is 1 to double precision anyway.
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: samples must be non-empty");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double stat = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    stat = std::max(stat, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double ne = n * m / (n + m);
  return {stat, kolmogorov_survival(std::sqrt(ne) * stat)};
}

KsResult ks_two_sample(std::span<const Point> a, std::span<const Point> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: samples must be non-empty");
  const std::size_t d = a.front().size();
  KsResult combined{0.0, 1.0};
  double min_p = 1.0;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> ca, cb;
    ca.reserve(a.size());
    cb.reserve(b.size());
    for (const auto& p : a) ca.push_back(p.at(j));
    for (const auto& p : b) cb.push_back(p.at(j));
    const auto r = ks_two_sample(ca, cb);
    combined.statistic = std::max(combined.statistic, r.statistic);
    min_p = std::min(min_p, r.p_value);
  }
  combined.p_value = std::min(1.0, static_cast<double>(d) * min_p);
  return combined;
}

double roc_auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw InvalidArgument("roc_auc: both classes must be non-empty");
  std::vector<double> neg(negative.begin(), negative.end());
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double s : positive) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(lo, neg.end(), s);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(positive.size()) * static_cast<double>(neg.size()));
}

}  // namespace mhgan
