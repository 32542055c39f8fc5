#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mhgan/mixtures.hpp"
#include "mhgan/models.hpp"
#include "mhgan/rng.hpp"

namespace mhgan {

inline constexpr double kCalibrationEpsilon = 1e-6;

enum class CalibratorKind { kIdentity, kLogistic, kIsotonic, kBeta };

std::string_view to_string(CalibratorKind kind);
/// Throws InvalidArgument for an unknown name.
CalibratorKind calibrator_kind_from_string(std::string_view name);

/// Balanced real/fake scores held out from discriminator training.
struct CalibrationSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = real, 0 = fake
  bool is_probability = true;
};

/// Scores real and fake points with `d`, labels them 1/0 and shuffles the
/// rows with `rng`. Requires |real| == |fake| >= 2.
CalibrationSet make_calibration_set(std::span<const Point> real, std::span<const Point> fake,
                                    const Discriminator& d, Rng& rng);

/// Pool-adjacent-violators fit of `values` (weighted, in the given order)
/// to the closest non-decreasing sequence in weighted least squares.
std::vector<double> pava(std::span<const double> values, std::span<const double> weights);

/// Fitted monotone map from raw discriminator score to probability.
class Calibrator {
 public:
  /// Identity map (with the epsilon clamp).
  Calibrator() = default;

  CalibratorKind kind() const { return kind_; }
  double epsilon() const { return epsilon_; }

  /// Monotone non-decreasing in `score`, result in [epsilon, 1 - epsilon].
  double apply(double score) const;

  // Fitted parameters, meaningful for the matching kind.
  double slope() const { return a_; }
  double intercept() const { return b_; }
  double beta_c() const { return c_; }
  const std::vector<double>& breakpoints() const { return xs_; }
  const std::vector<double>& fitted_values() const { return ys_; }
  double pseudo_count() const { return pseudo_count_; }
  /// True when the logistic fit works on logit(score) (probability inputs).
  bool logit_input() const { return logit_input_; }

  nlohmann::json to_json() const;
  static Calibrator from_json(const nlohmann::json& j);

  friend Calibrator fit_calibrator(CalibratorKind kind, const CalibrationSet& cs,
                                   double isotonic_pseudo_count);

 private:
  double fitted(double score) const;

  CalibratorKind kind_ = CalibratorKind::kIdentity;
  double epsilon_ = kCalibrationEpsilon;
  double a_ = 1.0, b_ = 0.0, c_ = 0.0;
  bool logit_input_ = true;
  double pseudo_count_ = 0.0;
  std::vector<double> xs_, ys_;
};

/// Logistic: damped Newton on sigmoid(a * s + b), s = logit(score) for
/// probability scores and the raw score otherwise. Isotonic: PAVA over
/// score-sorted labels, tied scores pooled first. Beta: logistic regression
/// on (ln s, -ln(1 - s)); a negative shape coefficient is fixed at 0 and the
/// others refitted.
/// A positive `isotonic_pseudo_count` adds that many virtual 0 and 1 labels
/// to every pooled block and re-pools, which keeps pure blocks away from 0
/// and 1. Throws InvalidArgument when a parametric fit sees only one distinct
/// score, when beta is asked to fit unbounded scores, or for a negative
/// pseudo-count.
Calibrator fit_calibrator(CalibratorKind kind, const CalibrationSet& cs,
                          double isotonic_pseudo_count = 0.0);

/// Discriminator whose scores are `c.apply(d.score(x))`.
Discriminator calibrated(const Discriminator& d, const Calibrator& c);

/// Calibration Z statistic: sum(y - p) / sqrt(sum p (1 - p)). Approximately
/// N(0,1) for a calibrated classifier. Throws InvalidArgument on length
/// mismatch, empty input, or a zero denominator.
double z_statistic(std::span<const double> probs, std::span<const int> labels);

}  // namespace mhgan
