#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mhgan/calibration.hpp"
#include "mhgan/error.hpp"
#include "mhgan/mixtures.hpp"
#include "mhgan/mlp.hpp"
#include "mhgan/models.hpp"
#include "mhgan/samplers.hpp"

namespace mhgan {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& path, const std::string& what) : InvalidArgument(path + ": " + what) {}
};

enum class ExperimentKind { kUnivariate4, kGrid25, kCalibrationStudy };
enum class SelectorKind { kNone, kMH, kDRS };
enum class DiscriminatorKind { kOracle, kWarped, kMlp };

struct DiscriminatorSpec {
  DiscriminatorKind kind = DiscriminatorKind::kOracle;
  double warp_a = 1.0, warp_b = 0.0;
  std::size_t n_train = 10000;  // per class
  TrainConfig train{.learning_rate = 1e-3, .epochs = 300, .batch_size = 256};
};

struct MixtureSpec {
  std::vector<Point> means;
  std::vector<double> sigmas;  // one per mean
  std::vector<double> weights;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kGrid25;
  std::uint64_t seed = 0;
  std::size_t n_samples = 10000;
  std::size_t k = 640;
  std::vector<SelectorKind> selectors{SelectorKind::kNone, SelectorKind::kMH, SelectorKind::kDRS};
  DiscriminatorSpec discriminator;
  CalibratorKind calibrator = CalibratorKind::kIdentity;
  double isotonic_pseudo_count = 0.0;
  std::size_t n_calibration = 2000;  // total, half real and half fake
  std::size_t n_real_pool = 10000;   // chain start points

  // grid25 generator
  std::vector<std::size_t> drop{20, 21, 22, 23, 24};
  double bridge_weight = 0.1;
  // univariate4 / calibration_study generator: data without this component
  std::size_t missing = 3;
  std::optional<MixtureSpec> data_mixture;

  bool restart_on_no_accept = true;
  std::size_t max_restarts = 100;
  std::size_t threads = 1;
  double gamma = 0.0;
  std::size_t n_pilot = 10000;
  std::size_t drs_max_draws = 1'000'000;
  bool capped_ratio = true;

  bool write_traces = false;
  std::size_t trace_chains = 100;  // chains written to traces.csv
  std::string output_dir = "out";

  /// Parses and validates. Missing fields take the defaults above, except
  /// `seed`, which is required; defaults also depend on `experiment`.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Full config with every field spelled out; from_json(to_json()) == *this.
  nlohmann::json to_json() const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

std::string to_string(ExperimentKind kind);
std::string to_string(SelectorKind kind);

/// Models, discriminator and calibrator built for one config and seed.
struct Pipeline {
  GaussianMixture data;
  Generator generator;
  Discriminator raw;
  Calibrator calibrator;
  Discriminator selector_d;  // raw composed with the calibrator
  std::vector<Point> real_pool;
  std::optional<double> z_raw;  // held-out set, probability discriminators only
  double z_calibrated = 0.0;
  double auc = 0.0;  // raw scores on the held-out set
  std::optional<double> train_loss;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
};

Pipeline build_pipeline(const ExperimentConfig& cfg);

struct MetricsRow {
  std::string experiment;
  std::string selector;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  double high_quality_rate = 0.0;
  double mode_jsd = 0.0;
  double within_mode_std = 0.0;  // NaN when no mode has two samples
  double acceptance_rate = 0.0;  // MH: accepted / attempted; DRS: 1 / mean draws
  double restart_rate = 0.0;
  double mean_generator_draws = 0.0;
  std::optional<double> z_raw;
  double z_calibrated = 0.0;
};

struct SelectorRun {
  MetricsRow metrics;
  std::vector<Point> samples;
  std::vector<ChainResult> chains;  // MH only
};

/// Runs one selector on a built pipeline with chain length `k`.
SelectorRun run_selector(const ExperimentConfig& cfg, const Pipeline& p, SelectorKind selector,
                         std::size_t k);

struct RunManifest {
  nlohmann::json config;
  std::string version = kVersion;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::pair<std::string, std::string>> digests;  // file name, SHA-256 hex
  std::vector<MetricsRow> metrics;
  nlohmann::json to_json() const;
};

/// Builds the pipeline, runs every selector and writes samples.csv,
/// metrics.csv, traces.csv (when enabled) and manifest.json into
/// cfg.output_dir. CSV bytes depend only on the config.
RunManifest run_experiment(const ExperimentConfig& cfg);

/// One metrics row per (k, selector); the pipeline is built once and every k
/// reuses the same seed. Writes sweep_k.csv when cfg.output_dir is non-empty.
/// k_values must be non-empty and strictly ascending.
std::vector<MetricsRow> sweep_k(const ExperimentConfig& cfg, const std::vector<std::size_t>& k_values);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace mhgan
